/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "werr/covariance.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "werr/error.h"

namespace werr::cov {

namespace {

// Copy the upper triangle onto the lower one so storage is bitwise symmetric.
Matrix symmetrized(Matrix m) {
  require(m.rows() == m.cols(), "CovarianceMatrix: matrix must be square");
  const auto n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

constexpr double kIndefiniteTol = 1e-12;  // relative to lambda_max

}  // namespace

struct CovarianceMatrix::Cache {
  std::once_flag once;
  Matrix sqrt;
};

CovarianceMatrix::CovarianceMatrix(Matrix entries)
    : entries_(symmetrized(std::move(entries))), cache_(std::make_shared<Cache>()) {}

const Matrix& CovarianceMatrix::sqrt_factor() const {
  require(cache_ != nullptr, "CovarianceMatrix: empty matrix has no factor");
  std::call_once(cache_->once, [this] {
    const int n = dim();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("sqrt_factor: eigen-decomposition failed");
    }
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (lmax <= 0.0) {
      if (lmin < -kIndefiniteTol) throw NotPsdError("sqrt_factor: matrix is negative");
      cache_->sqrt = Matrix::Zero(n, n);  // zero matrix
      return;
    }
    if (lmin < -kIndefiniteTol * lmax) {
      throw NotPsdError("sqrt_factor: matrix is indefinite; apply ensure_psd first");
    }
    // Plain Cholesky when safely positive definite, otherwise a tiny
    // diagonal shift keeps the factorization alive for rank-deficient input.
    Matrix work = entries_;
    if (lmin <= 1e-10 * lmax) work.diagonal().array() += 1e-10 * lmax;
    Eigen::LLT<Matrix> llt(work);
    if (llt.info() != Eigen::Success) {
      work.diagonal().array() += 1e-8 * lmax;
      llt.compute(work);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("sqrt_factor: Cholesky failed; lambda_min/lambda_max = " +
                             std::to_string(lmin / lmax));
      }
    }
    cache_->sqrt = llt.matrixL();
  });
  return cache_->sqrt;
}

void TaperSpec::validate() const {
  require(d0 >= 0.0 && d0 < d1, "TaperSpec: need 0 <= d0 < d1");
  require(vertical_halfwidth > 0.0, "TaperSpec: vertical halfwidth must be positive");
}

CovarianceMatrix sample_covariance(const SampleSet& s) {
  const int m = s.count();
  if (m < 2) {
    throw InsufficientSamplesError("sample_covariance: need at least 2 samples, got " +
                                   std::to_string(m));
  }
  const Vector mean = s.samples.rowwise().mean();
  const Matrix centered = s.samples.colwise() - mean;
  Matrix c = (centered * centered.transpose()) / static_cast<double>(m - 1);
  return CovarianceMatrix(std::move(c));
}

double cosine_taper(double d, double d0, double d1) {
  if (d <= d0) return 1.0;
  if (d >= d1) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (d - d0) / (d1 - d0)));
}

double quadratic_taper(double delta, double halfwidth) {
  const double r = delta / halfwidth;
  return std::max(0.0, 1.0 - r * r);
}

Matrix taper_matrix(const TaperSpec& t, int n) {
  t.validate();
  Matrix w(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d = cyclic_distance(i, j, n);
      double v = 1.0;
      if (t.mode == TaperMode::horizontal || t.mode == TaperMode::both) {
        v *= cosine_taper(d, t.d0, t.d1);
      }
      if (t.mode == TaperMode::vertical || t.mode == TaperMode::both) {
        v *= quadratic_taper(d, t.vertical_halfwidth);
      }
      w(i, j) = v;
    }
  }
  // A compactly supported taper sampled on the ring is not automatically a
  // valid covariance; project onto the PSD cone, then restore the unit
  // diagonal.  Schur products with the result preserve PSD-ness and leave
  // diagonals untouched.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
  if (eig.info() != Eigen::Success) throw NumericalError("taper_matrix: eigen failure");
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
    w = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    Vector d = w.diagonal().cwiseMax(1e-300).cwiseSqrt();
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) w(i, j) /= d[i] * d[j];
    }
    w = symmetrized(std::move(w));
  }
  return w;
}

CovarianceMatrix localize(const CovarianceMatrix& c, const TaperSpec& t) {
  const Matrix w = taper_matrix(t, c.dim());
  return ensure_psd(CovarianceMatrix(c.entries().cwiseProduct(w)));
}

CovarianceMatrix ensure_psd(const CovarianceMatrix& c, double floor, int* clipped_count) {
  require(floor >= 0.0, "ensure_psd: floor must be >= 0");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c.entries());
  if (eig.info() != Eigen::Success) {
    std::ostringstream os;
    os << "ensure_psd: eigen-decomposition failed; diagonal range [";
    os << c.entries().diagonal().minCoeff() << ", " << c.entries().diagonal().maxCoeff() << "]";
    throw NumericalError(os.str());
  }
  const double lmax = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double threshold = floor * lmax;
  const double slack = 1e-13 * std::max(lmax, 1e-300);
  if (eig.eigenvalues().minCoeff() >= threshold - slack) {
    if (clipped_count != nullptr) *clipped_count = 0;
    return c;  // within tolerance: leave the input bitwise unchanged
  }
  int clipped = 0;
  Vector lifted = eig.eigenvalues();
  for (int i = 0; i < lifted.size(); ++i) {
    if (lifted[i] < threshold) {
      lifted[i] = threshold;
      ++clipped;
    }
  }
  if (clipped_count != nullptr) *clipped_count = clipped;
  Matrix repaired = eig.eigenvectors() * lifted.asDiagonal() * eig.eigenvectors().transpose();
  return CovarianceMatrix(std::move(repaired));
}

CovarianceMatrix scale_std(const CovarianceMatrix& c, double factor) {
  require(factor > 0.0, "scale_std: factor must be positive");
  return CovarianceMatrix(c.entries() * (factor * factor));
}

CovarianceMatrix correlation_from_covariance(const CovarianceMatrix& c,
                                             int* zero_variance_count) {
  const int n = c.dim();
  const Vector diag = c.entries().diagonal();
  int zeros = 0;
  Vector inv_std(n);
  for (int i = 0; i < n; ++i) {
    if (diag[i] <= 1e-300) {
      inv_std[i] = 0.0;
      ++zeros;
    } else {
      inv_std[i] = 1.0 / std::sqrt(diag[i]);
    }
  }
  if (zero_variance_count != nullptr) *zero_variance_count = zeros;
  Matrix r(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) r(i, j) = c(i, j) * inv_std[i] * inv_std[j];
  }
  for (int i = 0; i < n; ++i) r(i, i) = 1.0;  // zero-variance rows: identity pattern
  return CovarianceMatrix(std::move(r));
}

LengthScale length_scale(const Vector& corr_row, int self) {
  const int n = static_cast<int>(corr_row.size());
  require(self >= 0 && self < n, "length_scale: self index out of range");
  const int dmax = n / 2;

  // Correlation as a function of cyclic distance, averaging the two sides.
  Vector by_dist(dmax + 1);
  by_dist[0] = corr_row[self];
  for (int d = 1; d <= dmax; ++d) {
    const double a = corr_row[wrap_index(self + d, n)];
    const double b = corr_row[wrap_index(self - d, n)];
    by_dist[d] = (2 * d == n) ? a : 0.5 * (a + b);
  }

  if (dmax >= 1 && by_dist[1] < 0.5) return {0.0, true};
  for (int d = 2; d <= dmax; ++d) {
    if (by_dist[d] < 0.5) {
      const double c0 = by_dist[d - 1];
      const double c1 = by_dist[d];
      return {(d - 1) + (c0 - 0.5) / (c0 - c1), true};
    }
  }
  return {static_cast<double>(dmax), false};
}

std::vector<LengthScale> row_length_scales(const CovarianceMatrix& corr) {
  std::vector<LengthScale> out;
  out.reserve(corr.dim());
  for (int i = 0; i < corr.dim(); ++i) out.push_back(length_scale(corr.entries().row(i), i));
  return out;
}

double median_length_scale(const CovarianceMatrix& cov) {
  const CovarianceMatrix corr = correlation_from_covariance(cov);
  std::vector<LengthScale> ls = row_length_scales(corr);
  std::vector<double> v;
  v.reserve(ls.size());
  for (const auto& l : ls) v.push_back(l.distance);
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

CovarianceMatrix gaussian_ring_covariance(int n, double sigma, double corr_len) {
  require(n >= 1, "gaussian_ring_covariance: n must be >= 1");
  require(sigma >= 0.0 && corr_len > 0.0, "gaussian_ring_covariance: bad parameters");
  Matrix c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d = cyclic_distance(i, j, n);
      c(i, j) = sigma * sigma * std::exp(-0.5 * d * d / (corr_len * corr_len));
    }
  }
  return ensure_psd(CovarianceMatrix(std::move(c)));
}

void write_werrmat(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_werrmat: cannot open " + path);
  out << "WERRMAT 1 " << m.rows() << " " << m.cols() << "\n";
  static_assert(sizeof(double) == 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!out) throw IoError("write_werrmat: write failed for " + path);
}

Matrix read_werrmat(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_werrmat: cannot open " + path);
  std::string magic;
  int version = 0;
  Eigen::Index rows = 0, cols = 0;
  in >> magic >> version >> rows >> cols;
  if (magic != "WERRMAT" || version != 1 || rows < 0 || cols < 0) {
    throw IoError("read_werrmat: bad header in " + path);
  }
  in.get();  // newline after the header
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(i, j) = v;
    }
  }
  if (!in) throw IoError("read_werrmat: truncated payload in " + path);
  return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("write_matrix_csv: cannot open " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf << (j + 1 < m.cols() ? "," : "");
    }
    out << "\n";
  }
}

}  // namespace werr::cov
