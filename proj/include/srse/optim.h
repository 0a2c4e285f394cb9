#pragma once

#include <cstdint>
#include <vector>

#include "srse/tensor.h"

namespace srse {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
  // Global gradient-norm cap; 0 disables clipping.
  double max_grad_norm = 0.0;
  // Multiply the rate by decay_factor every decay_interval steps; 0 keeps it constant.
  std::int64_t decay_interval = 0;
  double decay_factor = 0.5;

  void Validate() const;
};

// Rate used by step t (1-based).
double LearningRateAt(const AdamConfig& config, std::int64_t t);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t t = 0;

  static AdamState Zeros(const std::vector<Shape>& shapes);
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update. An empty gradient tensor counts as zero.
// A non-finite gradient throws NumericError before anything is modified.
template <typename T>
void AdamStep(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
              AdamState<T>& state, const AdamConfig& config);

}  // namespace srse
