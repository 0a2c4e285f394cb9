#include "srse/optim.h"

#include <cmath>
#include <string>

#include "srse/error.h"

namespace srse {

void AdamConfig::Validate() const {
  if (!(learning_rate > 0)) throw UsageError("learning rate must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw UsageError("Adam betas must lie in [0, 1)");
  if (!(delta >= 0)) throw UsageError("Adam delta must be non-negative");
  if (!(max_grad_norm >= 0)) throw UsageError("max gradient norm must be non-negative");
  if (decay_interval < 0) throw UsageError("decay interval must be non-negative");
  if (!(decay_factor > 0)) throw UsageError("decay factor must be positive");
}

double LearningRateAt(const AdamConfig& config, std::int64_t t) {
  if (config.decay_interval == 0 || t < 1) return config.learning_rate;
  return config.learning_rate * std::pow(config.decay_factor, static_cast<double>((t - 1) / config.decay_interval));
}

template <typename T>
AdamState<T> AdamState<T>::Zeros(const std::vector<Shape>& shapes) {
  AdamState s;
  for (const auto& shape : shapes) {
    s.m.emplace_back(shape);
    s.v.emplace_back(shape);
  }
  return s;
}

template <typename T>
void AdamStep(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
              AdamState<T>& state, const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw MismatchError("Adam: " + std::to_string(params.size()) + " parameters, " + std::to_string(grads.size()) +
                        " gradients, " + std::to_string(state.m.size()) + " moment tensors");
  }
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = *grads[i];
    if (!g.empty() && g.shape() != params[i]->shape()) {
      throw MismatchError("Adam: gradient " + g.shape().str() + " for parameter " + params[i]->shape().str());
    }
    if (state.m[i].shape() != params[i]->shape() || state.v[i].shape() != params[i]->shape()) {
      throw MismatchError("Adam: moment shape differs from parameter " + params[i]->shape().str());
    }
    for (T x : g.data()) {
      if (!std::isfinite(x)) throw NumericError("Adam: non-finite gradient in parameter " + std::to_string(i));
      norm_sq += static_cast<double>(x) * x;
    }
  }
  double clip = 1.0;
  if (config.max_grad_norm > 0) {
    const double norm = std::sqrt(norm_sq);
    if (norm > config.max_grad_norm) clip = config.max_grad_norm / norm;
  }

  state.t += 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double lr = LearningRateAt(config, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = *grads[i];
    auto p = params[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.empty() ? 0.0 : clip * static_cast<double>(g[static_cast<std::int64_t>(k)]);
      const double mk = b1 * m[k] + (1 - b1) * gk;
      const double vk = b2 * v[k] + (1 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      p[k] = static_cast<T>(p[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + config.delta));
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void AdamStep<float>(const std::vector<Tensor<float>*>&, const std::vector<const Tensor<float>*>&,
                              AdamState<float>&, const AdamConfig&);
template void AdamStep<double>(const std::vector<Tensor<double>*>&, const std::vector<const Tensor<double>*>&,
                               AdamState<double>&, const AdamConfig&);

}  // namespace srse
