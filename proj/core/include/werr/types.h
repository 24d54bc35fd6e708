/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace werr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// State on the periodic 1-D grid (one value per grid point).
using StateVector = Vector;

inline int wrap_index(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

// Shortest distance between two indices on a ring of n points.
inline int cyclic_distance(int i, int j, int n) {
  int d = std::abs(i - j) % n;
  return d <= n - d ? d : n - d;
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace werr
