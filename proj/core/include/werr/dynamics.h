/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <utility>
#include <vector>

#include "werr/rng.h"
#include "werr/types.h"

namespace werr::model {

// Which tendency the integrator runs.  lorenz96 is the production system;
// linear (dx/dt = A x) and zero are test hooks used by the solver and
// covariance-estimator checks.
enum class TendencyKind { lorenz96, linear, zero };

struct ModelSpec {
  int n = 40;
  double forcing = 8.0;
  Vector bias;  // length n systematic tendency bias; empty means zero
  double dt = 0.01;
  int steps_per_subwindow = 5;
  int subwindows_per_window = 4;
  double sppt_amplitude = 0.0;
  double sppt_corr_len = 1.5;  // grid units
  TendencyKind kind = TendencyKind::lorenz96;
  Matrix linear_op;  // used when kind == linear

  bool has_bias() const { return bias.size() > 0; }
  double window_span() const { return dt * steps_per_subwindow * subwindows_per_window; }
  void validate() const;
};

// Smooth sinusoidal tendency bias, the systematic error the truth model
// carries and the forecast model lacks.
Vector sinusoidal_bias(int n, double amplitude);

// Multiplicative tendency-noise source (SPPT analog).  Each field is a
// spatially correlated N(0, 1) pattern built by circular convolution of
// white noise with a Gaussian kernel.
class SpptStream {
 public:
  SpptStream(const ModelSpec& spec, Rng rng);

  // One zero-mean, unit-variance correlated field; one field per model step.
  Vector next_field();

 private:
  int n_;
  Vector kernel_;  // normalized so the convolved field has unit variance
  Rng rng_;
};

struct Trajectory {
  ModelSpec spec;
  std::vector<StateVector> states;      // sub-window boundaries, length N+1
  std::vector<StateVector> step_states; // state before each model step, length N*steps

  int subwindows() const { return static_cast<int>(states.size()) - 1; }
};

// Instantaneous tendency at x. Deterministic.
StateVector tendency(const StateVector& x, const ModelSpec& spec);

// One RK4 step of size dt.  With a perturber, every tendency evaluation in
// the step is scaled pointwise by (1 + sppt_amplitude * xi) with a single
// correlated field xi drawn for the step.
StateVector step(const StateVector& x, const ModelSpec& spec, SpptStream* perturber = nullptr);

// Integrates one assimilation window: N sub-windows of steps_per_subwindow
// RK4 steps each, adding the constant forcing eta once at the end of every
// sub-window.
Trajectory integrate_forced(const StateVector& x0, const ModelSpec& spec,
                            const StateVector& eta, SpptStream* perturber = nullptr);

// Propagates (dx0, deta) through the linearization of integrate_forced about
// traj.  Returns perturbations at all sub-window boundaries (length N+1,
// entry 0 is dx0).  The linearization is of the deterministic model.
std::vector<StateVector> tangent_linear(const Trajectory& traj, const StateVector& dx0,
                                        const StateVector& deta);

// Transpose of tangent_linear.  forcing holds one co-state per sub-window
// boundary 1..N; returns sensitivities with respect to x0 and eta.
std::pair<StateVector, StateVector> adjoint(const Trajectory& traj,
                                            const std::vector<StateVector>& forcing);

}  // namespace werr::model
