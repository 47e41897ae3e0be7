#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lossforge {

/// Adam hyperparameters. lr matches the experimental protocol; the betas and
/// eps are the Adam authors' defaults.
struct AdamConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// A named, mutable block of parameters (one weight matrix or bias vector).
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  /// First and second moment buffers, one per parameter block; sized on the
  /// first step.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update. Validates every gradient before touching
/// any parameter: ShapeError if block counts or sizes disagree with earlier
/// steps, DivergenceError naming the block on a non-finite gradient.
void adam_step(AdamState& state, std::span<const ParamBlock> params,
               std::span<const std::span<const double>> grads);

}  // namespace lossforge
