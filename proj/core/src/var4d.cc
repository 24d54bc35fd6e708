/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "werr/var4d.h"

#include <cmath>
#include <string>

#include "werr/error.h"

namespace werr::var4d {

int ObsSet::total_count() const {
  int m = 0;
  for (const auto& b : at) m += static_cast<int>(b.indices.size());
  return m;
}

void ObsSet::validate(int n, int subwindows) const {
  require(static_cast<int>(at.size()) == subwindows + 1,
          "ObsSet: need one batch per sub-window boundary 0..N");
  for (const auto& b : at) {
    const auto m = static_cast<Eigen::Index>(b.indices.size());
    require(b.values.size() == m && b.sigma.size() == m, "ObsSet: batch sizes disagree");
    for (int idx : b.indices) require(idx >= 0 && idx < n, "ObsSet: index out of grid");
    require((b.sigma.array() > 0.0).all(), "ObsSet: observation error std must be positive");
  }
}

EtaMask EtaMask::full(int n) { return {Vector::Ones(n)}; }

EtaMask EtaMask::band(int n, int lo, int hi, int ramp) {
  require(0 <= lo && lo <= hi && hi < n, "EtaMask::band: bad active range");
  require(ramp >= 0, "EtaMask::band: ramp must be >= 0");
  Vector w = Vector::Zero(n);
  for (int i = lo; i <= hi; ++i) w[i] = 1.0;
  for (int r = 1; r <= ramp; ++r) {
    const double v = 1.0 - static_cast<double>(r) / (ramp + 1);
    const int left = lo - r;
    const int right = hi + r;
    if (left >= 0) w[left] = v;
    if (right < n) w[right] = v;
  }
  return {std::move(w)};
}

void EtaMask::validate(int n) const {
  require(weights.size() == n, "EtaMask: length does not match grid");
  require((weights.array() >= 0.0).all() && (weights.array() <= 1.0).all(),
          "EtaMask: weights must lie in [0, 1]");
}

namespace detail {

Vector solve_lower(const Matrix& L, const Vector& r, const char* what) {
  const double dmax = L.diagonal().cwiseAbs().maxCoeff();
  if (!(L.diagonal().cwiseAbs().minCoeff() > 1e-154 * std::max(dmax, 1.0))) {
    throw RegularizationError(std::string(what) +
                              " is singular; apply ensure_psd with an eigenvalue floor");
  }
  return L.triangularView<Eigen::Lower>().solve(r);
}

Vector solve_lower_t(const Matrix& L, const Vector& r, const char* what) {
  const double dmax = L.diagonal().cwiseAbs().maxCoeff();
  if (!(L.diagonal().cwiseAbs().minCoeff() > 1e-154 * std::max(dmax, 1.0))) {
    throw RegularizationError(std::string(what) +
                              " is singular; apply ensure_psd with an eigenvalue floor");
  }
  return L.transpose().triangularView<Eigen::Upper>().solve(r);
}

Vector apply_inverse(const cov::CovarianceMatrix& c, const Vector& r, const char* what) {
  const Matrix& L = c.sqrt_factor();
  return solve_lower_t(L, solve_lower(L, r, what), what);
}

namespace {

double dot(const UV& a, const UV& b) {
  double s = a.u.dot(b.u);
  if (a.v.size() > 0) s += a.v.dot(b.v);
  return s;
}

void axpy(double alpha, const UV& x, UV& y) {
  y.u += alpha * x.u;
  if (x.v.size() > 0) y.v += alpha * x.v;
}

}  // namespace

CgResult conjugate_gradient(const std::function<UV(const UV&)>& apply_hessian, const UV& rhs,
                            double cost_at_zero, int max_iterations,
                            double residual_reduction) {
  CgResult res;
  res.solution = UV{Vector::Zero(rhs.u.size()), Vector::Zero(rhs.v.size())};
  res.cost_trace.push_back(cost_at_zero);

  UV r = rhs;  // residual b - A w at w = 0
  double rr = dot(r, r);
  const double r0_norm = std::sqrt(rr);
  if (!(r0_norm > 0.0)) return res;  // already at the minimum

  const double target = residual_reduction * r0_norm;
  UV p = r;
  bool restarted = false;

  for (int it = 0; it < max_iterations; ++it) {
    UV ap = apply_hessian(p);
    double pap = dot(p, ap);
    if (!(pap > 0.0) || !std::isfinite(pap)) {
      if (!restarted) {
        // Restart once from the current iterate along steepest descent.
        restarted = true;
        ++res.restarts;
        p = r;
        ap = apply_hessian(p);
        pap = dot(p, ap);
      }
      if (!(pap > 0.0) || !std::isfinite(pap)) {
        res.status = CgStatus::breakdown;
        return res;
      }
    }
    const double alpha = rr / pap;
    axpy(alpha, p, res.solution);
    axpy(-alpha, ap, r);
    const double rr_new = dot(r, r);

    // j(w) - j(0) = -(w.b + w.r) / 2 on the quadratic.
    res.cost_trace.push_back(cost_at_zero -
                             0.5 * (dot(res.solution, rhs) + dot(res.solution, r)));
    ++res.iterations;

    if (std::sqrt(rr_new) <= target) {
      res.status = CgStatus::converged;
      return res;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    UV p_next = r;
    axpy(beta, p, p_next);
    p = std::move(p_next);
  }
  res.status = CgStatus::iteration_cap;
  return res;
}

}  // namespace detail

namespace {

Vector apply_h(const ObsBatch& b, const Vector& x) {
  Vector y(static_cast<Eigen::Index>(b.indices.size()));
  for (std::size_t i = 0; i < b.indices.size(); ++i) y[static_cast<Eigen::Index>(i)] = x[b.indices[i]];
  return y;
}

void scatter_ht(const ObsBatch& b, const Vector& q, Vector& out) {
  for (std::size_t i = 0; i < b.indices.size(); ++i) out[b.indices[i]] += q[static_cast<Eigen::Index>(i)];
}

double obs_cost(const ObsSet& obs, const model::Trajectory& traj) {
  double jo = 0.0;
  for (std::size_t k = 0; k < obs.at.size(); ++k) {
    const ObsBatch& b = obs.at[k];
    if (b.indices.empty()) continue;
    const Vector d = (apply_h(b, traj.states[k]) - b.values).cwiseQuotient(b.sigma);
    jo += 0.5 * d.squaredNorm();
  }
  return jo;
}

// R^{-1}-weighted observation residuals of a trajectory, one vector per boundary.
std::vector<Vector> weighted_residuals(const ObsSet& obs, const model::Trajectory& traj) {
  std::vector<Vector> out(obs.at.size());
  for (std::size_t k = 0; k < obs.at.size(); ++k) {
    const ObsBatch& b = obs.at[k];
    if (b.indices.empty()) continue;
    out[k] = (apply_h(b, traj.states[k]) - b.values)
                 .cwiseQuotient(b.sigma.cwiseProduct(b.sigma));
  }
  return out;
}

// Pulls H^T-weighted co-states back to (x0, eta) sensitivities.
std::pair<Vector, Vector> pull_back(const ObsSet& obs, const model::Trajectory& traj,
                                    const std::vector<Vector>& weighted, int n) {
  const int nsub = traj.subwindows();
  std::vector<Vector> costates(nsub, Vector::Zero(n));
  for (int k = 1; k <= nsub; ++k) {
    if (!obs.at[k].indices.empty()) scatter_ht(obs.at[k], weighted[k], costates[k - 1]);
  }
  auto [gx, ge] = model::adjoint(traj, costates);
  if (!obs.at[0].indices.empty()) scatter_ht(obs.at[0], weighted[0], gx);
  return {gx, ge};
}

struct CostContext {
  const Priors& p;
  const ObsSet& obs;
  const EtaMask& mask;
  const model::ModelSpec& spec;
  bool strong = false;

  CostBreakdown evaluate(const Vector& x0, const Vector& eta) const {
    CostBreakdown out;
    const Vector db = detail::solve_lower(p.B.sqrt_factor(), x0 - p.xb, "B");
    out.jb = 0.5 * db.squaredNorm();
    const Vector eta_eff = mask.weights.cwiseProduct(eta);
    const model::Trajectory traj = model::integrate_forced(x0, spec, eta_eff);
    out.jo = obs_cost(obs, traj);
    if (!strong) {
      const Vector dq = detail::solve_lower(p.Q.sqrt_factor(), eta - p.etab, "Q");
      out.jq = 0.5 * dq.squaredNorm();
    }
    return out;
  }
};

}  // namespace

CostBreakdown cost(const ControlVector& c, const Priors& p, const ObsSet& obs,
                   const EtaMask& mask, const model::ModelSpec& spec) {
  spec.validate();
  obs.validate(spec.n, spec.subwindows_per_window);
  mask.validate(spec.n);
  require(c.x0.size() == spec.n && c.eta.size() == spec.n, "cost: control dimension mismatch");
  CostContext ctx{p, obs, mask, spec, false};
  return ctx.evaluate(c.x0, c.eta);
}

ControlVector gradient(const ControlVector& c, const Priors& p, const ObsSet& obs,
                       const EtaMask& mask, const model::ModelSpec& spec) {
  spec.validate();
  obs.validate(spec.n, spec.subwindows_per_window);
  mask.validate(spec.n);
  require(c.x0.size() == spec.n && c.eta.size() == spec.n,
          "gradient: control dimension mismatch");

  const Vector eta_eff = mask.weights.cwiseProduct(c.eta);
  const model::Trajectory traj = model::integrate_forced(c.x0, spec, eta_eff);
  const std::vector<Vector> weighted = weighted_residuals(obs, traj);
  auto [gx, ge] = pull_back(obs, traj, weighted, spec.n);

  ControlVector g;
  g.x0 = detail::apply_inverse(p.B, c.x0 - p.xb, "B") + gx;
  g.eta = detail::apply_inverse(p.Q, c.eta - p.etab, "Q") + mask.weights.cwiseProduct(ge);
  return g;
}

std::pair<ControlVector, MinimizeReport> minimize(const Priors& p, const ObsSet& obs,
                                                  const EtaMask& mask,
                                                  const model::ModelSpec& spec,
                                                  const MinimizeOptions& opts) {
  spec.validate();
  obs.validate(spec.n, spec.subwindows_per_window);
  mask.validate(spec.n);
  const int n = spec.n;
  const bool strong = opts.strong_constraint;

  // In strong-constraint mode the forcing is excluded from the control:
  // the same inner machinery runs with an empty v block and a zero mask.
  const EtaMask active_mask = strong ? EtaMask{Vector::Zero(n)} : mask;
  const Vector& d_weights = active_mask.weights;
  Vector support(n);  // indicator of the mask support: freezes masked entries
  for (int i = 0; i < n; ++i) support[i] = d_weights[i] > 0.0 ? 1.0 : 0.0;

  const Matrix& lb = p.B.sqrt_factor();
  const Matrix* lq = nullptr;
  if (!strong) lq = &p.Q.sqrt_factor();

  CostContext ctx{p, obs, active_mask, spec, strong};

  Vector x_g = p.xb;
  Vector eta_g = strong ? Vector::Zero(n) : p.etab;

  MinimizeReport report;
  CostBreakdown jg = ctx.evaluate(x_g, eta_g);
  report.outer_costs.push_back(jg.total());

  for (int outer = 0; outer < opts.outer_iterations; ++outer) {
    const Vector eta_eff_g = d_weights.cwiseProduct(eta_g);
    const model::Trajectory traj = model::integrate_forced(x_g, spec, eta_eff_g);

    // Gradient of the quadratic inner cost at zero increment.
    const std::vector<Vector> weighted = weighted_residuals(obs, traj);
    auto [gx, ge] = pull_back(obs, traj, weighted, n);
    detail::UV g0;
    g0.u = detail::solve_lower(lb, x_g - p.xb, "B") + lb.transpose() * gx;
    if (!strong) {
      const Vector jq_part =
          support.cwiseProduct(detail::apply_inverse(p.Q, eta_g - p.etab, "Q"));
      g0.v = lq->transpose() * (jq_part + d_weights.cwiseProduct(ge));
    } else {
      g0.v = Vector::Zero(0);
    }

    detail::UV rhs{-g0.u, -g0.v};

    auto apply_hessian = [&](const detail::UV& z) -> detail::UV {
      const Vector dx0 = lb * z.u;
      Vector deta_eff = Vector::Zero(n);
      if (!strong) deta_eff = d_weights.cwiseProduct((*lq) * z.v);
      const std::vector<Vector> pert = model::tangent_linear(traj, dx0, deta_eff);

      std::vector<Vector> q(obs.at.size());
      for (std::size_t k = 0; k < obs.at.size(); ++k) {
        const ObsBatch& b = obs.at[k];
        if (b.indices.empty()) continue;
        q[k] = apply_h(b, pert[k]).cwiseQuotient(b.sigma.cwiseProduct(b.sigma));
      }
      auto [hx, he] = pull_back(obs, traj, q, n);

      detail::UV out;
      out.u = z.u + lb.transpose() * hx;
      if (!strong) {
        const Vector jq_part = support.cwiseProduct(detail::apply_inverse(
            p.Q, support.cwiseProduct((*lq) * z.v), "Q"));
        out.v = lq->transpose() * (jq_part + d_weights.cwiseProduct(he));
      } else {
        out.v = Vector::Zero(0);
      }
      return out;
    };

    detail::CgResult cg = detail::conjugate_gradient(apply_hessian, rhs, jg.total(),
                                                     opts.max_inner, opts.grad_reduction);
    report.inner_iterations += cg.iterations;
    report.restarts += cg.restarts;
    report.inner_costs.insert(report.inner_costs.end(), cg.cost_trace.begin(),
                              cg.cost_trace.end());
    if (cg.status == detail::CgStatus::breakdown ||
        cg.status == detail::CgStatus::iteration_cap) {
      report.converged = false;
    }

    // Candidate update, halved if the nonlinear cost would increase.
    const Vector dx0 = lb * cg.solution.u;
    Vector deta = Vector::Zero(n);
    if (!strong) deta = support.cwiseProduct((*lq) * cg.solution.v);

    double scale = 1.0;
    bool accepted = false;
    CostBreakdown jc = jg;
    for (int h = 0; h < 40; ++h) {
      const Vector cand_x = x_g + scale * dx0;
      const Vector cand_eta = eta_g + scale * deta;
      CostBreakdown jt;
      bool finite = true;
      try {
        jt = ctx.evaluate(cand_x, cand_eta);
      } catch (const NumericalError&) {
        finite = false;
      }
      if (finite && jt.total() <= jg.total()) {
        x_g = cand_x;
        eta_g = cand_eta;
        jc = jt;
        accepted = true;
        break;
      }
      scale *= 0.5;
      report.step_halved = true;
    }
    if (!accepted) jc = jg;  // keep the previous iterate; cost unchanged
    jg = jc;
    report.outer_costs.push_back(jg.total());
  }

  report.final_breakdown = jg;
  ControlVector analysis{x_g, strong ? Vector::Zero(n) : eta_g};
  return {analysis, report};
}

model::Trajectory debias_forecast(const ControlVector& analysis, const model::ModelSpec& spec,
                                  const EtaMask& mask) {
  spec.validate();
  mask.validate(spec.n);
  require(analysis.x0.size() == spec.n && analysis.eta.size() == spec.n,
          "debias_forecast: control dimension mismatch");
  return model::integrate_forced(analysis.x0, spec, mask.weights.cwiseProduct(analysis.eta));
}

}  // namespace werr::var4d
