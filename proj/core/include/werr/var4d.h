/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "werr/covariance.h"
#include "werr/dynamics.h"
#include "werr/types.h"

namespace werr::var4d {

// The 4D-Var control: initial state plus one constant model-error forcing
// per window.  In strong-constraint mode eta is identically zero.
struct ControlVector {
  Vector x0;
  Vector eta;
};

struct Priors {
  Vector xb;    // background initial state
  Vector etab;  // prior model-error forcing (previous window's estimate)
  cov::CovarianceMatrix B;
  cov::CovarianceMatrix Q;
};

// Point observations of selected grid indices at one sub-window boundary.
struct ObsBatch {
  std::vector<int> indices;
  Vector values;
  Vector sigma;  // per-observation error std (R diagonal)
};

struct ObsSet {
  std::vector<ObsBatch> at;  // one batch per boundary 0..N; batches may be empty

  int total_count() const;
  void validate(int n, int subwindows) const;
};

// Pointwise weights in [0, 1] restricting where the model-error forcing acts.
struct EtaMask {
  Vector weights;

  static EtaMask full(int n);
  // Active on [lo, hi] with linear ramps of `ramp` points on each side.
  static EtaMask band(int n, int lo, int hi, int ramp);
  void validate(int n) const;
};

struct CostBreakdown {
  double jb = 0.0;
  double jo = 0.0;
  double jq = 0.0;
  double total() const { return jb + jo + jq; }
};

// The weak-constraint cost: background, observation, and model-error terms.
// The trajectory is integrated with the masked forcing (mask o eta).
CostBreakdown cost(const ControlVector& c, const Priors& p, const ObsSet& obs,
                   const EtaMask& mask, const model::ModelSpec& spec);

// Exact adjoint gradient of cost() with respect to (x0, eta).
ControlVector gradient(const ControlVector& c, const Priors& p, const ObsSet& obs,
                       const EtaMask& mask, const model::ModelSpec& spec);

struct MinimizeOptions {
  int outer_iterations = 2;
  int max_inner = 200;
  double grad_reduction = 1e-3;  // inner CG stops at this residual-norm ratio
  bool strong_constraint = false;
};

struct MinimizeReport {
  std::vector<double> outer_costs;  // nonlinear total cost, initial value first
  std::vector<double> inner_costs;  // quadratic cost at every CG iterate
  int inner_iterations = 0;
  int restarts = 0;
  bool converged = true;   // every inner solve hit its tolerance
  bool step_halved = false;
  CostBreakdown final_breakdown;
};

// Incremental minimization of the weak-constraint cost: outer relinearization
// around the current trajectory, inner conjugate-gradient solve in the
// preconditioned control (u, v) with x0 = xb + B^{1/2} u and
// eta = etab + [mask > 0] o (Q^{1/2} v).  Restricting the eta increment to
// the mask support keeps masked entries exactly at their prior.
std::pair<ControlVector, MinimizeReport> minimize(const Priors& p, const ObsSet& obs,
                                                  const EtaMask& mask,
                                                  const model::ModelSpec& spec,
                                                  const MinimizeOptions& opts = {});

// Forecast over the next window with the analysed forcing kept active.
model::Trajectory debias_forecast(const ControlVector& analysis, const model::ModelSpec& spec,
                                  const EtaMask& mask);

namespace detail {

// Inner-loop control vector, kept in separate blocks so that an inert v
// block contributes exact zeros to every reduction.
struct UV {
  Vector u;
  Vector v;  // size 0 in strong-constraint mode
};

enum class CgStatus { converged, iteration_cap, breakdown };

struct CgResult {
  UV solution;
  CgStatus status = CgStatus::converged;
  int iterations = 0;
  int restarts = 0;
  std::vector<double> cost_trace;  // quadratic cost offset by `cost_at_zero`
};

// Conjugate gradients on the quadratic j(w) = j0 + g0.w + 1/2 w.A w given
// b = -g0.  On breakdown (non-positive curvature) restarts once from the
// current iterate with a fresh steepest-descent direction, then gives up and
// returns the best iterate found.
CgResult conjugate_gradient(const std::function<UV(const UV&)>& apply_hessian, const UV& rhs,
                            double cost_at_zero, int max_iterations, double residual_reduction);

// Triangular solves against a cached Cholesky factor; throws
// RegularizationError when the factor has a (near-)zero pivot.
Vector solve_lower(const Matrix& L, const Vector& r, const char* what);
Vector solve_lower_t(const Matrix& L, const Vector& r, const char* what);
Vector apply_inverse(const cov::CovarianceMatrix& c, const Vector& r, const char* what);

}  // namespace detail

}  // namespace werr::var4d
