#pragma once

#include <cstdint>
#include <random>

#include "srse/tensor.h"

namespace srse {

using Rng = std::mt19937_64;

template <typename T>
Tensor<T> RandomUniform(const Shape& shape, T lo, T hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> RandomNormal(const Shape& shape, double mean, double stddev,
                       Rng& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace srse
