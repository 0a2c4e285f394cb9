#pragma once

// SrSENet: a head convolution, a stack of SE-gated residual blocks fed by
// short connections from the head features, and one transposed-convolution
// head that emits a residual image added onto a bicubic upsample of the
// input.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srse/autodiff.h"
#include "srse/nn_ops.h"

namespace srse {

// Kernel size, stride and padding of the transposed-convolution head.
struct UpscaleTriple {
  int kernel;
  int stride;
  int padding;
};

// 2 -> (4,2,1), 4 -> (8,4,2), 8 -> (16,8,4). Other rates throw UsageError.
UpscaleTriple UpscaleTripleFor(int upscale_rate);

struct SrSENetConfig {
  int depth = 8;
  int width = 64;
  int upscale_rate = 4;
  int reduction_ratio = 16;
  bool se_enabled = true;
  int input_channels = 1;  // 1: luma only, 3: RGB
  double leaky_slope = 0.2;

  void Validate() const;
  int bottleneck() const { return width / reduction_ratio; }
  bool operator==(const SrSENetConfig&) const = default;
};

template <typename T>
struct SELayerParams {
  DenseParams<T> fc1;  // C -> C / reduction
  DenseParams<T> fc2;  // C / reduction -> C
};

template <typename T>
struct SrSEBlockParams {
  Conv2dParams<T> conv1;
  Conv2dParams<T> conv2;
  std::optional<SELayerParams<T>> se;  // absent in the ablated variant
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct NamedConstParam {
  std::string name;
  const Tensor<T>* tensor;
};

template <typename T>
struct SrSENet {
  SrSENetConfig config;
  Conv2dParams<T> head;
  std::vector<SrSEBlockParams<T>> blocks;
  ConvTranspose2dParams<T> upscale;

  // Every trainable tensor with its checkpoint name, in a fixed order:
  // head, blocks.<i>.{conv1,conv2,se.fc1,se.fc2}, upscale; weight before bias.
  std::vector<NamedParam<T>> Parameters();
  std::vector<NamedConstParam<T>> Parameters() const;
};

// Zero-mean Gaussian weights with variance 2 / fan_in (fan_in = C_in * k * k
// for both convolution kinds, C_in for dense layers) and zero biases, drawn
// in Parameters() order from one generator seeded with `seed`.
template <typename T>
SrSENet<T> BuildSrSENet(const SrSENetConfig& config, std::uint64_t seed);

// Sets every parameter, weights and biases alike, to zero.
template <typename T>
void ZeroParameters(SrSENet<T>& net);

// ---------------------------------------------------------------------------
// Parameters bound into a Graph.

template <typename T>
struct DenseVars {
  Var<T> weight;
  Var<T> bias;
};

template <typename T>
struct ConvVars {
  Var<T> weight;
  Var<T> bias;
  int stride = 1;
  int padding = 0;
};

template <typename T>
struct SELayerVars {
  DenseVars<T> fc1;
  DenseVars<T> fc2;
};

template <typename T>
struct SrSEBlockVars {
  ConvVars<T> conv1;
  ConvVars<T> conv2;
  std::optional<SELayerVars<T>> se;
};

template <typename T>
struct SrSENetVars {
  ConvVars<T> head;
  std::vector<SrSEBlockVars<T>> blocks;
  ConvVars<T> upscale;
  // Same order and names as SrSENet::Parameters().
  std::vector<std::pair<std::string, Var<T>>> named;
};

// Registers every parameter of `net` as a Parameter leaf of `graph`.
template <typename T>
SrSENetVars<T> BindParameters(Graph<T>& graph, const SrSENet<T>& net);

struct ForwardOptions {
  // Test hook: replaces every SE gate by exactly 1.
  bool force_unit_gates = false;
};

// z = avgpool(u); s = sigmoid(fc2(relu(fc1(z)))); returns u scaled per channel
// by s. If `gates` is given it receives s.
template <typename T>
Var<T> SELayerForward(Var<T> u, const SELayerVars<T>& p,
                      const ForwardOptions& options = {},
                      Var<T>* gates = nullptr);

// x + SE(conv2(leaky_relu(conv1(x)))), or without SE when p.se is absent.
template <typename T>
Var<T> SrSEBlockForward(Var<T> x, const SrSEBlockVars<T>& p, T slope,
                        const ForwardOptions& options = {});

template <typename T>
struct ForwardTrace {
  Var<T> f0;
  std::vector<Var<T>> block_outputs;
  Var<T> residual_image;
  Var<T> base_image;
  Var<T> sr_image;
};

// f0 = leaky_relu(head(lr)); x_1 = f0; y_k = block_k(x_k); x_{k+1} = y_k + f0;
// residual = upscale(y_D); sr = base + residual.
// `base` must be (N, C, r*H, r*W) for an (N, C, H, W) `lr`.
template <typename T>
ForwardTrace<T> Forward(const SrSENetVars<T>& vars, const SrSENetConfig& config,
                        Var<T> lr, Var<T> base,
                        const ForwardOptions& options = {});

// Binds `net` into `graph` and runs Forward on constant inputs.
template <typename T>
ForwardTrace<T> Forward(Graph<T>& graph, const SrSENet<T>& net,
                        const Tensor<T>& lr, const Tensor<T>& base,
                        const ForwardOptions& options = {},
                        SrSENetVars<T>* bound = nullptr);

// (2D + 1): side of the receptive field of D stacked 3x3 layers.
std::int64_t ReceptiveField(int depth);

struct BlockParamCount {
  std::int64_t conv = 0;
  std::int64_t se = 0;
};

struct ParamCount {
  std::int64_t head = 0;
  std::vector<BlockParamCount> blocks;
  std::int64_t upscale = 0;

  std::int64_t blocks_total() const;
  std::int64_t se_total() const;
  std::int64_t total() const;
};

template <typename T>
ParamCount CountParameters(const SrSENet<T>& net);

}  // namespace srse
