/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "werr/types.h"

namespace werr::cov {

// Dense symmetric covariance matrix with a lazily cached lower-triangular
// square-root factor.  Immutable after construction; copies share the cache.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;
  explicit CovarianceMatrix(Matrix entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  // Lower-triangular L with L L^T ~= entries.  Reconstruction is within
  // 1e-10 (relative Frobenius) for positive definite input and 1e-8 for
  // rank-deficient PSD input.  Throws NotPsdError on indefinite input.
  const Matrix& sqrt_factor() const;

  Vector std_profile() const { return entries_.diagonal().cwiseMax(0.0).cwiseSqrt(); }

 private:
  Matrix entries_;
  struct Cache;
  std::shared_ptr<Cache> cache_;
};

// A set of equal-dimension sample vectors with a provenance tag.
struct SampleSet {
  Matrix samples;     // one column per sample
  std::string label;  // pred | eta | ann | increment

  int dim() const { return static_cast<int>(samples.rows()); }
  int count() const { return static_cast<int>(samples.cols()); }
};

enum class TaperMode { horizontal, vertical, both };

// Localization taper: cosine roll-off between d0 and d1 (horizontal) and/or
// quadratic decay with scale L (vertical).  On the toy ring both act on the
// same cyclic grid distance; they differ only in shape.
struct TaperSpec {
  double d0 = 4.0;
  double d1 = 6.0;
  double vertical_halfwidth = 7.0;
  TaperMode mode = TaperMode::both;

  void validate() const;
};

// Unbiased sample covariance (divisor m-1) about the sample mean.
// Throws InsufficientSamplesError when fewer than two samples are given.
CovarianceMatrix sample_covariance(const SampleSet& s);

// 1 for d <= d0, cosine roll-off on (d0, d1), 0 beyond d1.
double cosine_taper(double d, double d0, double d1);

// max(0, 1 - (delta/L)^2).
double quadratic_taper(double delta, double halfwidth);

// The n x n Schur-product weight matrix for a taper on the cyclic grid.
// Projected to the PSD cone with its unit diagonal restored, so that
// localization cannot break positive semi-definiteness.
Matrix taper_matrix(const TaperSpec& t, int n);

// Schur product with the taper matrix, passed through ensure_psd.
CovarianceMatrix localize(const CovarianceMatrix& c, const TaperSpec& t);

// Clips eigenvalues below floor * lambda_max.  Returns the input unchanged
// (bitwise) when no eigenvalue is out of tolerance; idempotent.
CovarianceMatrix ensure_psd(const CovarianceMatrix& c, double floor = 0.0,
                            int* clipped_count = nullptr);

// D C D with D = factor * I: every standard deviation scales by factor,
// correlations are untouched.
CovarianceMatrix scale_std(const CovarianceMatrix& c, double factor);

// R_ij = C_ij / sqrt(C_ii C_jj); zero-variance rows/columns become identity
// rows (flag reported through zero_variance_count if given).
CovarianceMatrix correlation_from_covariance(const CovarianceMatrix& c,
                                             int* zero_variance_count = nullptr);

struct LengthScale {
  double distance = 0.0;
  bool crossed = false;  // false: correlation never fell below 0.5
};

// First distance at which the correlation around grid point `self` drops
// below 0.5, linearly interpolated between integer distances.
LengthScale length_scale(const Vector& corr_row, int self);

// Per-row length scales and their median, for a correlation matrix.
std::vector<LengthScale> row_length_scales(const CovarianceMatrix& corr);
double median_length_scale(const CovarianceMatrix& cov);

// sigma^2 * exp(-d^2 / (2 ell^2)) on the cyclic grid; PSD by construction.
CovarianceMatrix gaussian_ring_covariance(int n, double sigma, double corr_len);

// WERRMAT v1: text header "WERRMAT 1 <rows> <cols>\n" followed by row-major
// 8-byte IEEE-754 little-endian values.
void write_werrmat(const std::string& path, const Matrix& m);
Matrix read_werrmat(const std::string& path);

// Lossless CSV (%.17g), one line per row.
void write_matrix_csv(const std::string& path, const Matrix& m);

}  // namespace werr::cov
