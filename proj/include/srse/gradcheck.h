#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "srse/autodiff.h"
#include "srse/random.h"
#include "srse/tensor.h"

namespace srse {

// Central-difference gradient of a scalar function of one tensor:
// (f(x + h e_i) - f(x - h e_i)) / 2h per element. Throws NumericError if f
// ever returns a non-finite value.
template <typename T>
Tensor<T> FiniteDiffGrad(const std::function<T(const Tensor<T>&)>& f,
                         const Tensor<T>& x, T h) {
  if (!(h > T(0))) throw UsageError("finite difference step must be positive");
  Tensor<T> probe = x;
  Tensor<T> grad(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + h;
    const T up = f(probe);
    probe[i] = orig - h;
    const T down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("function under finite differencing returned a "
                         "non-finite value at element " + std::to_string(i));
    }
    grad[i] = (up - down) / (T(2) * h);
  }
  return grad;
}

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, floor).
// Normalizing by the larger gradient magnitude keeps the measure stable when
// individual entries are near zero.
template <typename T>
double GradRelativeError(const Tensor<T>& analytic, const Tensor<T>& numeric,
                         double floor = 1e-12) {
  if (analytic.shape() != numeric.shape()) {
    throw MismatchError("gradient shapes differ: " + analytic.shape().str() +
                        " vs " + numeric.shape().str());
  }
  double diff = 0.0;
  double scale = floor;
  for (std::int64_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic[i];
    const double b = numeric[i];
    diff = std::max(diff, std::abs(a - b));
    scale = std::max({scale, std::abs(a), std::abs(b)});
  }
  return diff / scale;
}

// Builds a forward pass over Variable leaves standing for the inputs.
template <typename T>
using GraphBuilder =
    std::function<Var<T>(Graph<T>&, const std::vector<Var<T>>&)>;

struct GradCheckResult {
  std::vector<double> per_input;  // GradRelativeError for each input
  double max_error = 0.0;
};

// Compares backward against central differences for every input of `build`.
// A non-scalar output y is reduced to sum(y * R) with a seeded random R in
// [-1, 1], so every output element contributes with a distinct weight.
// `max_entries` > 0 restricts the finite-difference sweep of each input to
// that many randomly chosen elements.
template <typename T>
GradCheckResult CheckGradients(const std::vector<Tensor<T>>& inputs,
                               const GraphBuilder<T>& build, T h,
                               std::uint64_t seed,
                               std::int64_t max_entries = 0) {
  Rng rng(seed);
  Tensor<T> projection;
  const auto forward = [&](const std::vector<Tensor<T>>& xs, Graph<T>& g,
                           std::vector<Var<T>>& leaves) {
    leaves.clear();
    for (const auto& x : xs) leaves.push_back(g.Variable(x));
    Var<T> out = build(g, leaves);
    if (out.shape() == Shape{1, 1, 1, 1}) return out;
    if (projection.empty()) {
      projection = RandomUniform<T>(out.shape(), T(-1), T(1), rng);
    }
    return Sum(Mul(out, g.Constant(projection)));
  };

  std::vector<Var<T>> leaves;
  Graph<T> graph;
  Var<T> loss = forward(inputs, graph, leaves);
  graph.Backward(loss);

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<T> analytic = graph.grad(leaves[k]);
    if (analytic.empty()) analytic = Tensor<T>(inputs[k].shape(), T(0));

    std::vector<std::int64_t> entries;
    const std::int64_t count = inputs[k].numel();
    if (max_entries > 0 && max_entries < count) {
      std::uniform_int_distribution<std::int64_t> pick(0, count - 1);
      for (std::int64_t i = 0; i < max_entries; ++i) entries.push_back(pick(rng));
    } else {
      for (std::int64_t i = 0; i < count; ++i) entries.push_back(i);
    }

    std::vector<Tensor<T>> probe = inputs;
    const auto eval = [&]() {
      Graph<T> g;
      std::vector<Var<T>> ls;
      return forward(probe, g, ls).value().item();
    };
    double diff = 0.0;
    double scale = 1e-12;
    for (const std::int64_t i : entries) {
      const T orig = probe[k][i];
      probe[k][i] = orig + h;
      const T up = eval();
      probe[k][i] = orig - h;
      const T down = eval();
      probe[k][i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("non-finite loss while finite differencing");
      }
      const double numeric = (static_cast<double>(up) - down) / (2.0 * h);
      diff = std::max(diff, std::abs(numeric - analytic[i]));
      scale = std::max({scale, std::abs(numeric), std::abs(double(analytic[i]))});
    }
    // Entries not swept still set the scale so sparse sampling is comparable.
    for (T v : analytic.data()) scale = std::max(scale, std::abs(double(v)));
    result.per_input.push_back(diff / scale);
    result.max_error = std::max(result.max_error, diff / scale);
  }
  return result;
}

}  // namespace srse
