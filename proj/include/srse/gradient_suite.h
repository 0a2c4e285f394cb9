#pragma once

// Finite-difference checks of every differentiable op, the SE layer, the
// residual block, the loss and a small end-to-end network, in double
// precision. Shared by `srse gradcheck` and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

#include "srse/model.h"
#include "srse/tensor.h"

namespace srse {

inline constexpr double kElementwiseGradTolerance = 1e-6;
inline constexpr double kGradTolerance = 1e-4;

struct SuiteEntry {
  std::string op;
  double max_error = 0.0;
  double threshold = kGradTolerance;

  bool passed() const { return max_error <= threshold; }
};

struct SuiteReport {
  std::uint64_t seed = 0;
  std::vector<SuiteEntry> entries;

  bool passed() const;
  std::vector<std::string> failures() const;
  // Fixed-width table, one line per entry; identical for identical seeds.
  std::string Text() const;
};

// Runs the whole suite. The inputs of every case are drawn from `seed`.
SuiteReport RunGradientSuite(std::uint64_t seed);

// Gradient check of the full network with respect to the LR input and every
// parameter. `max_entries` > 0 samples that many elements per tensor.
SuiteEntry CheckNetGradients(const SrSENetConfig& config, const Shape& lr_shape,
                             std::uint64_t seed, std::int64_t max_entries,
                             const std::string& name);

}  // namespace srse
