/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace werr {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken precondition: dimension mismatch, invalid argument, bad state.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: integration blow-up, factorization breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Fewer samples than a statistical estimator needs.
class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

// A square-root factor was requested for an indefinite matrix.
class NotPsdError : public Error {
 public:
  using Error::Error;
};

// A prior covariance is singular and needs an eigenvalue floor before use.
class RegularizationError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration file, key, or value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File format or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& msg) {
  if (!condition) throw ContractError(msg);
}

}  // namespace werr
