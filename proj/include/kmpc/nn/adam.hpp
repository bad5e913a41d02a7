#pragma once

#include <span>
#include <vector>

#include "kmpc/nn/layers.hpp"

namespace kmpc::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Bias-corrected ADAM moments, one pair per parameter tensor.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  long step = 0;
};

AdamState make_adam(std::span<Tensor* const> params, const AdamConfig& config);

// params[i] -= lr * m_hat / (sqrt(v_hat) + eps). Throws TrainingError naming
// the offending tensor index when a gradient is not finite.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state);

}  // namespace kmpc::nn
