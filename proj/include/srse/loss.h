#pragma once

#include <cmath>

#include "srse/autodiff.h"

namespace srse {

inline constexpr double kDefaultCharbonnierEpsilon = 1e-3;

// rho(z) = sqrt(z^2 + eps^2), a smooth L1 surrogate.
template <typename T>
T CharbonnierPenalty(T z, T eps) {
  return std::sqrt(z * z + eps * eps);
}

// Mean of rho(pred - target) over every element of the batch. The reduction
// covers pixels as well as batch items so eps keeps one meaning across patch
// sizes.
template <typename T>
Var<T> CharbonnierLoss(Var<T> pred, Var<T> target,
                       T eps = static_cast<T>(kDefaultCharbonnierEpsilon));

}  // namespace srse
