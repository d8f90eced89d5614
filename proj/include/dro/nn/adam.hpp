#pragma once

#include <cstdint>
#include <vector>

#include "dro/nn/tape.hpp"

namespace dro::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled: p -= lr * weight_decay * p, applied before the moment update.
  double weight_decay = 0.0;
};

/// Moment estimates for a fixed list of parameters. Persists across calls so
/// training can resume from where it stopped.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

/// One AdamW update on every parameter that has a gradient. Gradients are left
/// untouched.
void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace dro::nn
