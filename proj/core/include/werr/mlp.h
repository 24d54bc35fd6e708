/*
 * (C) Copyright 2026 werr developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "werr/covariance.h"
#include "werr/rng.h"
#include "werr/types.h"

namespace werr::mlp {

// Dense rectifier network with a linear output layer and inverted dropout
// after each hidden layer.
struct MlpSpec {
  int input_dim = 9;
  std::vector<int> hidden_widths = {138, 138, 138};
  int output_dim = 1;
  double dropout_rate = 0.2;

  std::vector<int> layer_dims() const;  // [input, hidden..., output]
  void validate() const;
};

struct Layer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

struct MlpParams {
  std::vector<Layer> layers;

  static MlpParams zeros(const MlpSpec& spec);
  static MlpParams glorot_init(const MlpSpec& spec, Rng& rng);
  void validate_shapes(const MlpSpec& spec) const;
  int parameter_count() const;
};

enum class Mode { train, infer };

// Single-input forward pass.  Train mode applies inverted dropout (kept
// activations divided by 1-p) and needs an rng; infer mode is deterministic.
Vector forward(const MlpSpec& spec, const MlpParams& params, const Vector& x, Mode mode,
               Rng* rng = nullptr);

// Batched forward pass; one column per sample.
Matrix forward_batch(const MlpSpec& spec, const MlpParams& params, const Matrix& x, Mode mode,
                     Rng* rng = nullptr);

// Mean squared error over the batch and its exact reverse-mode gradient
// under the realized dropout masks (draw masks from rng when the spec has
// dropout and rng is non-null).
std::pair<double, MlpParams> loss_and_gradient(const MlpSpec& spec, const MlpParams& params,
                                               const Matrix& inputs, const Matrix& targets,
                                               Rng* rng = nullptr);

struct TrainingSet {
  Matrix inputs;   // input_dim x m
  Matrix targets;  // output_dim x m
  std::vector<int> train_indices;
  std::vector<int> val_indices;

  // Deterministic shuffled split; val_fraction of samples go to validation.
  static TrainingSet split(Matrix inputs, Matrix targets, double val_fraction, uint64_t seed);
};

struct TrainOptions {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 200;
  int patience = 20;  // early stop after this many epochs without val improvement
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  MlpParams params;  // parameters at the best validation mse
  std::vector<EpochStats> history;
  bool diverged = false;
  double best_val_mse = 0.0;
};

// Mini-batch Adam on the mse loss, deterministic for a fixed seed.
TrainResult train(const MlpSpec& spec, const TrainingSet& data, const TrainOptions& opts,
                  uint64_t seed);

struct TendencyScaling {
  Vector per_subwindow;  // forcing to add once per sub-window (delta / N)
  Vector per_time;       // rate form, delta / window_length, for diagnostics
};

// Converts a cumulated increment over one window into the equivalent
// per-sub-window forcing.
TendencyScaling increments_to_tendency(const Vector& delta, int subwindows,
                                       double window_length);

// Runs the network in infer mode over full-grid predictor frames (input_dim
// x n, one column per grid point) and returns one error-tendency sample per
// frame, in per-sub-window units.
cov::SampleSet generate_error_samples(const MlpSpec& spec, const MlpParams& params,
                                      const std::vector<Matrix>& frames, int subwindows);

// WERRNN v1 checkpoint: text header "WERRNN 1 <ndims> <d0> ... <dk> <dropout>"
// followed by each layer's weight matrix and bias as raw row-major 8-byte
// little-endian values, concatenated in layer order.
void write_werrnn(const std::string& path, const MlpSpec& spec, const MlpParams& params);
std::pair<MlpSpec, MlpParams> read_werrnn(const std::string& path);

}  // namespace werr::mlp
