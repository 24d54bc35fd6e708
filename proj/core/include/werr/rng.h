/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "werr/types.h"

namespace werr {

// FNV-1a, used for stream derivation and for config/archive content hashes.
uint64_t fnv1a64(std::string_view bytes);
uint64_t fnv1a64(const void* data, std::size_t size, uint64_t seed = 0xcbf29ce484222325ULL);

// Deterministic random stream.  Normal draws use Box-Muller on explicitly
// constructed uniforms, so sequences are identical across standard libraries.
// Independent streams are split off with derive(tag, index); derivation
// depends only on the parent's seed, never on how many draws were taken.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  double uniform();  // (0, 1]
  double normal();   // N(0, 1)

  Vector normal_vector(int n);

  Rng derive(std::string_view tag, uint64_t index = 0) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace werr
