/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "werr/dynamics.h"

#include <cmath>
#include <string>

#include "werr/error.h"

namespace werr::model {

void ModelSpec::validate() const {
  require(n >= 4, "ModelSpec: n must be >= 4, got " + std::to_string(n));
  require(dt > 0.0, "ModelSpec: dt must be positive");
  require(steps_per_subwindow >= 1, "ModelSpec: steps_per_subwindow must be >= 1");
  require(subwindows_per_window >= 1, "ModelSpec: subwindows_per_window must be >= 1");
  require(sppt_amplitude >= 0.0, "ModelSpec: sppt_amplitude must be >= 0");
  require(!has_bias() || bias.size() == n, "ModelSpec: bias length does not match n");
  if (kind == TendencyKind::linear) {
    require(linear_op.rows() == n && linear_op.cols() == n,
            "ModelSpec: linear_op must be n x n");
  }
}

Vector sinusoidal_bias(int n, double amplitude) {
  Vector b(n);
  for (int i = 0; i < n; ++i) b[i] = amplitude * std::sin(2.0 * kPi * i / n);
  return b;
}

namespace {

void check_state(const StateVector& x, const ModelSpec& spec, const char* where) {
  require(x.size() == spec.n, std::string(where) + ": state length does not match spec.n");
}

Vector lorenz96_tendency(const StateVector& x, const ModelSpec& spec) {
  const int n = spec.n;
  Vector f(n);
  for (int i = 0; i < n; ++i) {
    const double xm2 = x[wrap_index(i - 2, n)];
    const double xm1 = x[wrap_index(i - 1, n)];
    const double xp1 = x[wrap_index(i + 1, n)];
    f[i] = (xp1 - xm2) * xm1 - x[i] + spec.forcing;
  }
  if (spec.has_bias()) f += spec.bias;
  return f;
}

// Jacobian-vector product of the tendency at x.
Vector tendency_jvp(const StateVector& x, const Vector& v, const ModelSpec& spec) {
  switch (spec.kind) {
    case TendencyKind::zero:
      return Vector::Zero(spec.n);
    case TendencyKind::linear:
      return spec.linear_op * v;
    case TendencyKind::lorenz96:
      break;
  }
  const int n = spec.n;
  Vector out(n);
  for (int i = 0; i < n; ++i) {
    const int im2 = wrap_index(i - 2, n);
    const int im1 = wrap_index(i - 1, n);
    const int ip1 = wrap_index(i + 1, n);
    out[i] = x[im1] * (v[ip1] - v[im2]) + (x[ip1] - x[im2]) * v[im1] - v[i];
  }
  return out;
}

// Transposed Jacobian-vector product of the tendency at x.
Vector tendency_vjp(const StateVector& x, const Vector& w, const ModelSpec& spec) {
  switch (spec.kind) {
    case TendencyKind::zero:
      return Vector::Zero(spec.n);
    case TendencyKind::linear:
      return spec.linear_op.transpose() * w;
    case TendencyKind::lorenz96:
      break;
  }
  const int n = spec.n;
  Vector out(n);
  for (int j = 0; j < n; ++j) {
    const int jm2 = wrap_index(j - 2, n);
    const int jm1 = wrap_index(j - 1, n);
    const int jp1 = wrap_index(j + 1, n);
    const int jp2 = wrap_index(j + 2, n);
    // x_j enters f_{j-1} via x_{i+1}, f_{j+2} via x_{i-2}, f_{j+1} via x_{i-1}.
    out[j] = x[jm2] * w[jm1] - x[jp1] * w[jp2] + (x[jp2] - x[jm1]) * w[jp1] - w[j];
  }
  return out;
}

struct Rk4Stages {
  Vector x1, x2, x3;  // stage linearization points: x, x + dt/2 k1, x + dt/2 k2, x + dt k3
  Vector x4;
};

Rk4Stages rk4_stage_points(const StateVector& x, const ModelSpec& spec) {
  const double dt = spec.dt;
  Rk4Stages s;
  s.x1 = x;
  const Vector k1 = tendency(x, spec);
  s.x2 = x + 0.5 * dt * k1;
  const Vector k2 = tendency(s.x2, spec);
  s.x3 = x + 0.5 * dt * k2;
  const Vector k3 = tendency(s.x3, spec);
  s.x4 = x + dt * k3;
  return s;
}

// Tangent linear of one deterministic RK4 step about stored state x.
Vector rk4_step_tl(const StateVector& x, const Vector& dx, const ModelSpec& spec) {
  const double dt = spec.dt;
  const Rk4Stages s = rk4_stage_points(x, spec);
  const Vector dk1 = tendency_jvp(s.x1, dx, spec);
  const Vector dk2 = tendency_jvp(s.x2, dx + 0.5 * dt * dk1, spec);
  const Vector dk3 = tendency_jvp(s.x3, dx + 0.5 * dt * dk2, spec);
  const Vector dk4 = tendency_jvp(s.x4, dx + dt * dk3, spec);
  return dx + (dt / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
}

// Exact transpose of rk4_step_tl.
Vector rk4_step_adj(const StateVector& x, const Vector& w, const ModelSpec& spec) {
  const double dt = spec.dt;
  const Rk4Stages s = rk4_stage_points(x, spec);
  Vector xbar = w;
  Vector k4bar = (dt / 6.0) * w;
  Vector k3bar = (dt / 3.0) * w;
  Vector k2bar = (dt / 3.0) * w;
  Vector k1bar = (dt / 6.0) * w;

  Vector a = tendency_vjp(s.x4, k4bar, spec);  // dk4 = J4 (dx + dt dk3)
  xbar += a;
  k3bar += dt * a;

  a = tendency_vjp(s.x3, k3bar, spec);  // dk3 = J3 (dx + dt/2 dk2)
  xbar += a;
  k2bar += 0.5 * dt * a;

  a = tendency_vjp(s.x2, k2bar, spec);  // dk2 = J2 (dx + dt/2 dk1)
  xbar += a;
  k1bar += 0.5 * dt * a;

  xbar += tendency_vjp(s.x1, k1bar, spec);
  return xbar;
}

}  // namespace

SpptStream::SpptStream(const ModelSpec& spec, Rng rng) : n_(spec.n), rng_(std::move(rng)) {
  const double ell = spec.sppt_corr_len > 0.0 ? spec.sppt_corr_len : 1e-6;
  kernel_.resize(n_);
  for (int d = 0; d < n_; ++d) {
    const int dist = cyclic_distance(0, d, n_);
    kernel_[d] = std::exp(-0.5 * (dist * dist) / (ell * ell));
  }
  // White noise in, unit variance out.
  kernel_ /= kernel_.norm();
}

Vector SpptStream::next_field() {
  const Vector white = rng_.normal_vector(n_);
  Vector field = Vector::Zero(n_);
  for (int i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n_; ++j) acc += kernel_[wrap_index(i - j, n_)] * white[j];
    field[i] = acc;
  }
  return field;
}

StateVector tendency(const StateVector& x, const ModelSpec& spec) {
  check_state(x, spec, "tendency");
  switch (spec.kind) {
    case TendencyKind::zero:
      return Vector::Zero(spec.n);
    case TendencyKind::linear: {
      Vector f = spec.linear_op * x;
      if (spec.has_bias()) f += spec.bias;
      return f;
    }
    case TendencyKind::lorenz96:
      return lorenz96_tendency(x, spec);
  }
  throw ContractError("tendency: unknown tendency kind");
}

StateVector step(const StateVector& x, const ModelSpec& spec, SpptStream* perturber) {
  check_state(x, spec, "step");
  const double dt = spec.dt;

  Vector scale;
  const bool noisy = perturber != nullptr && spec.sppt_amplitude > 0.0;
  if (noisy) scale = (1.0 + spec.sppt_amplitude * perturber->next_field().array()).matrix();

  auto f = [&](const StateVector& xs) -> Vector {
    Vector t = tendency(xs, spec);
    if (noisy) t = t.cwiseProduct(scale);
    return t;
  };

  const Vector k1 = f(x);
  const Vector k2 = f(x + 0.5 * dt * k1);
  const Vector k3 = f(x + 0.5 * dt * k2);
  const Vector k4 = f(x + dt * k3);
  Vector out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!out.allFinite()) throw NumericalError("step: integration blew up (non-finite state)");
  return out;
}

Trajectory integrate_forced(const StateVector& x0, const ModelSpec& spec,
                            const StateVector& eta, SpptStream* perturber) {
  spec.validate();
  check_state(x0, spec, "integrate_forced");
  check_state(eta, spec, "integrate_forced(eta)");

  const int nsub = spec.subwindows_per_window;
  const int steps = spec.steps_per_subwindow;

  Trajectory traj;
  traj.spec = spec;
  traj.states.reserve(nsub + 1);
  traj.step_states.reserve(nsub * steps);
  traj.states.push_back(x0);

  StateVector x = x0;
  for (int k = 1; k <= nsub; ++k) {
    for (int s = 0; s < steps; ++s) {
      traj.step_states.push_back(x);
      try {
        x = step(x, spec, perturber);
      } catch (const NumericalError&) {
        throw NumericalError("integrate_forced: blow-up in sub-window " + std::to_string(k) +
                             ", step " + std::to_string(s));
      }
    }
    x += eta;  // model-error forcing, applied once per sub-window
    traj.states.push_back(x);
  }
  return traj;
}

std::vector<StateVector> tangent_linear(const Trajectory& traj, const StateVector& dx0,
                                        const StateVector& deta) {
  const ModelSpec& spec = traj.spec;
  check_state(dx0, spec, "tangent_linear");
  check_state(deta, spec, "tangent_linear(deta)");
  const int nsub = traj.subwindows();
  const int steps = spec.steps_per_subwindow;
  require(static_cast<int>(traj.step_states.size()) == nsub * steps,
          "tangent_linear: trajectory is missing per-step states");

  std::vector<StateVector> out;
  out.reserve(nsub + 1);
  out.push_back(dx0);

  Vector dx = dx0;
  for (int k = 0; k < nsub; ++k) {
    for (int s = 0; s < steps; ++s) dx = rk4_step_tl(traj.step_states[k * steps + s], dx, spec);
    dx += deta;
    out.push_back(dx);
  }
  return out;
}

std::pair<StateVector, StateVector> adjoint(const Trajectory& traj,
                                            const std::vector<StateVector>& forcing) {
  const ModelSpec& spec = traj.spec;
  const int nsub = traj.subwindows();
  const int steps = spec.steps_per_subwindow;
  require(static_cast<int>(forcing.size()) == nsub,
          "adjoint: need one co-state per sub-window boundary 1..N");
  for (const auto& w : forcing) check_state(w, spec, "adjoint");

  Vector lambda = Vector::Zero(spec.n);
  Vector grad_eta = Vector::Zero(spec.n);
  for (int k = nsub; k >= 1; --k) {
    lambda += forcing[k - 1];
    grad_eta += lambda;
    for (int s = steps - 1; s >= 0; --s) {
      lambda = rk4_step_adj(traj.step_states[(k - 1) * steps + s], lambda, spec);
    }
  }
  return {lambda, grad_eta};
}

}  // namespace werr::model
