#pragma once

// Differentiable layer primitives recorded on a Graph.
//
// Convolution is cross-correlation (no kernel flip) with symmetric zero
// padding and square kernels. Transposed convolution is its exact adjoint:
// for weights of the same (k, s, p),
//   <conv2d(x; W), y> == <x, conv_transpose2d(y; W)>.

#include <cstdint>

#include "srse/autodiff.h"

namespace srse {

// Spatial extent of a convolution output. Throws when the kernel does not fit
// the padded input or the stride does not tile it exactly.
std::int64_t ConvOutputExtent(std::int64_t in, std::int64_t kernel,
                              std::int64_t stride, std::int64_t padding);

// (in - 1) * stride - 2 * padding + kernel. Throws unless kernel >= stride
// and the result is at least 1.
std::int64_t TransposedConvOutputExtent(std::int64_t in, std::int64_t kernel,
                                        std::int64_t stride,
                                        std::int64_t padding);

template <typename T>
struct Conv2dParams {
  Tensor<T> weight;  // (C_out, C_in, k, k)
  Tensor<T> bias;    // (1, C_out, 1, 1)
  int stride = 1;
  int padding = 0;

  std::int64_t out_channels() const { return weight.shape().n; }
  std::int64_t in_channels() const { return weight.shape().c; }
  std::int64_t kernel() const { return weight.shape().h; }
};

template <typename T>
struct ConvTranspose2dParams {
  Tensor<T> weight;  // (C_in, C_out, k, k)
  Tensor<T> bias;    // (1, C_out, 1, 1)
  int stride = 1;
  int padding = 0;

  std::int64_t in_channels() const { return weight.shape().n; }
  std::int64_t out_channels() const { return weight.shape().c; }
  std::int64_t kernel() const { return weight.shape().h; }
};

template <typename T>
struct DenseParams {
  Tensor<T> weight;  // (1, C_out, 1, C_in), read as a C_out x C_in matrix
  Tensor<T> bias;    // (1, C_out, 1, 1)

  std::int64_t out_channels() const { return weight.shape().c; }
  std::int64_t in_channels() const { return weight.shape().w; }
};

template <typename T>
Var<T> Conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int padding);

template <typename T>
Var<T> ConvTranspose2d(Var<T> x, Var<T> weight, Var<T> bias, int stride,
                       int padding);

// v >= 0 ? v : slope * v. The subgradient at 0 is taken as 1.
template <typename T>
Var<T> LeakyRelu(Var<T> x, T slope);

// (N, C, H, W) -> (N, C, 1, 1) channel means.
template <typename T>
Var<T> GlobalAvgPool(Var<T> x);

// y = W x + b on (N, C_in, 1, 1) inputs.
template <typename T>
Var<T> Dense(Var<T> x, Var<T> weight, Var<T> bias);

template <typename T>
Var<T> Sigmoid(Var<T> x);

}  // namespace srse
