#include "srse/model.h"

#include <cmath>

#include "srse/random.h"

namespace srse {

UpscaleTriple UpscaleTripleFor(int upscale_rate) {
  switch (upscale_rate) {
    case 2:
      return {4, 2, 1};
    case 4:
      return {8, 4, 2};
    case 8:
      return {16, 8, 4};
    default:
      throw UsageError("unsupported upscale rate " + std::to_string(upscale_rate) +
                       " (expected 2, 4 or 8)");
  }
}

void SrSENetConfig::Validate() const {
  UpscaleTripleFor(upscale_rate);
  if (depth < 1) throw UsageError("depth must be at least 1");
  if (width < 1) throw UsageError("width must be at least 1");
  if (input_channels != 1 && input_channels != 3) {
    throw UsageError("input_channels must be 1 or 3");
  }
  if (reduction_ratio < 1 || width % reduction_ratio != 0) {
    throw UsageError("reduction ratio " + std::to_string(reduction_ratio) +
                     " does not divide width " + std::to_string(width));
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw UsageError("leaky slope must lie in [0, 1)");
  }
}

template <typename T>
std::vector<NamedParam<T>> SrSENet<T>::Parameters() {
  std::vector<NamedParam<T>> out;
  out.push_back({"head.weight", &head.weight});
  out.push_back({"head.bias", &head.bias});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    auto& b = blocks[i];
    out.push_back({p + "conv1.weight", &b.conv1.weight});
    out.push_back({p + "conv1.bias", &b.conv1.bias});
    out.push_back({p + "conv2.weight", &b.conv2.weight});
    out.push_back({p + "conv2.bias", &b.conv2.bias});
    if (b.se) {
      out.push_back({p + "se.fc1.weight", &b.se->fc1.weight});
      out.push_back({p + "se.fc1.bias", &b.se->fc1.bias});
      out.push_back({p + "se.fc2.weight", &b.se->fc2.weight});
      out.push_back({p + "se.fc2.bias", &b.se->fc2.bias});
    }
  }
  out.push_back({"upscale.weight", &upscale.weight});
  out.push_back({"upscale.bias", &upscale.bias});
  return out;
}

template <typename T>
std::vector<NamedConstParam<T>> SrSENet<T>::Parameters() const {
  auto mut = const_cast<SrSENet<T>*>(this)->Parameters();
  std::vector<NamedConstParam<T>> out;
  out.reserve(mut.size());
  for (auto& p : mut) out.push_back({std::move(p.name), p.tensor});
  return out;
}

namespace {

template <typename T>
Conv2dParams<T> MakeConv(std::int64_t cin, std::int64_t cout, int k, int pad) {
  return {Tensor<T>(Shape{cout, cin, k, k}), Tensor<T>(Shape{1, cout, 1, 1}), 1, pad};
}

template <typename T>
DenseParams<T> MakeDense(std::int64_t cin, std::int64_t cout) {
  return {Tensor<T>(Shape{1, cout, 1, cin}), Tensor<T>(Shape{1, cout, 1, 1})};
}

// Fan-in of a weight tensor given its layout.
std::int64_t FanIn(const std::string& name, const Shape& s) {
  if (name.find(".fc") != std::string::npos) return s.w;
  if (name.rfind("upscale.", 0) == 0) return s.n * s.h * s.w;
  return s.c * s.h * s.w;
}

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
SrSENet<T> BuildSrSENet(const SrSENetConfig& config, std::uint64_t seed) {
  config.Validate();
  SrSENet<T> net;
  net.config = config;
  const int c = config.width;
  net.head = MakeConv<T>(config.input_channels, c, 3, 1);
  for (int i = 0; i < config.depth; ++i) {
    SrSEBlockParams<T> b{MakeConv<T>(c, c, 3, 1), MakeConv<T>(c, c, 3, 1), std::nullopt};
    if (config.se_enabled) {
      b.se = SELayerParams<T>{MakeDense<T>(c, config.bottleneck()),
                              MakeDense<T>(config.bottleneck(), c)};
    }
    net.blocks.push_back(std::move(b));
  }
  const UpscaleTriple t = UpscaleTripleFor(config.upscale_rate);
  net.upscale = {Tensor<T>(Shape{c, config.input_channels, t.kernel, t.kernel}),
                 Tensor<T>(Shape{1, config.input_channels, 1, 1}), t.stride, t.padding};

  Rng rng(seed);
  for (auto& p : net.Parameters()) {
    if (!EndsWith(p.name, ".weight")) continue;
    const double stddev = std::sqrt(2.0 / static_cast<double>(FanIn(p.name, p.tensor->shape())));
    *p.tensor = RandomNormal<T>(p.tensor->shape(), 0.0, stddev, rng);
  }
  return net;
}

template <typename T>
void ZeroParameters(SrSENet<T>& net) {
  for (auto& p : net.Parameters()) p.tensor->fill(T(0));
}

template <typename T>
SrSENetVars<T> BindParameters(Graph<T>& graph, const SrSENet<T>& net) {
  SrSENetVars<T> vars;
  const auto bind = [&](const std::string& name, const Tensor<T>& t) {
    Var<T> v = graph.Parameter(t, name);
    vars.named.emplace_back(name, v);
    return v;
  };
  const auto bind_conv = [&](const std::string& name, const auto& p) {
    return ConvVars<T>{bind(name + ".weight", p.weight), bind(name + ".bias", p.bias),
                       p.stride, p.padding};
  };
  const auto bind_dense = [&](const std::string& name, const DenseParams<T>& p) {
    return DenseVars<T>{bind(name + ".weight", p.weight), bind(name + ".bias", p.bias)};
  };

  vars.head = bind_conv("head", net.head);
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    const auto& b = net.blocks[i];
    SrSEBlockVars<T> bv;
    bv.conv1 = bind_conv(prefix + "conv1", b.conv1);
    bv.conv2 = bind_conv(prefix + "conv2", b.conv2);
    if (b.se) {
      bv.se = SELayerVars<T>{bind_dense(prefix + "se.fc1", b.se->fc1),
                             bind_dense(prefix + "se.fc2", b.se->fc2)};
    }
    vars.blocks.push_back(std::move(bv));
  }
  vars.upscale = bind_conv("upscale", net.upscale);
  return vars;
}

template <typename T>
Var<T> SELayerForward(Var<T> u, const SELayerVars<T>& p,
                      const ForwardOptions& options, Var<T>* gates) {
  const Shape us = u.shape();
  if (p.fc1.weight.shape().w != us.c || p.fc2.weight.shape().c != us.c) {
    throw MismatchError("SE layer built for " + std::to_string(p.fc1.weight.shape().w) +
                        " channels got input " + us.str());
  }
  Var<T> s;
  if (options.force_unit_gates) {
    s = u.graph().Constant(Tensor<T>(Shape{us.n, us.c, 1, 1}, T(1)));
  } else {
    Var<T> z = GlobalAvgPool(u);
    Var<T> a = LeakyRelu(Dense(z, p.fc1.weight, p.fc1.bias), T(0));
    s = Sigmoid(Dense(a, p.fc2.weight, p.fc2.bias));
  }
  if (gates) *gates = s;
  return MulChannelwise(u, s);
}

template <typename T>
Var<T> SrSEBlockForward(Var<T> x, const SrSEBlockVars<T>& p, T slope,
                        const ForwardOptions& options) {
  if (x.shape().c != p.conv1.weight.shape().c) {
    throw MismatchError("block expects " + std::to_string(p.conv1.weight.shape().c) +
                        " channels, got " + x.shape().str());
  }
  Var<T> h = Conv2d(x, p.conv1.weight, p.conv1.bias, p.conv1.stride, p.conv1.padding);
  h = LeakyRelu(h, slope);
  h = Conv2d(h, p.conv2.weight, p.conv2.bias, p.conv2.stride, p.conv2.padding);
  if (p.se) h = SELayerForward(h, *p.se, options);
  return Add(x, h);
}

template <typename T>
ForwardTrace<T> Forward(const SrSENetVars<T>& vars, const SrSENetConfig& config,
                        Var<T> lr, Var<T> base, const ForwardOptions& options) {
  const Shape ls = lr.shape();
  const Shape bs = base.shape();
  const std::int64_t r = config.upscale_rate;
  if (ls.c != config.input_channels) {
    throw MismatchError("network expects " + std::to_string(config.input_channels) +
                        " input channels, got " + ls.str());
  }
  if (bs != Shape{ls.n, ls.c, r * ls.h, r * ls.w}) {
    throw MismatchError("base image " + bs.str() + " is not the x" + std::to_string(r) +
                        " extent of input " + ls.str());
  }
  const T slope = static_cast<T>(config.leaky_slope);
  ForwardTrace<T> trace;
  trace.base_image = base;
  trace.f0 = LeakyRelu(Conv2d(lr, vars.head.weight, vars.head.bias, vars.head.stride,
                              vars.head.padding),
                       slope);
  Var<T> x = trace.f0;
  for (std::size_t k = 0; k < vars.blocks.size(); ++k) {
    Var<T> y = SrSEBlockForward(x, vars.blocks[k], slope, options);
    trace.block_outputs.push_back(y);
    if (k + 1 < vars.blocks.size()) x = Add(y, trace.f0);
  }
  const Var<T> features = trace.block_outputs.back();
  trace.residual_image = ConvTranspose2d(features, vars.upscale.weight, vars.upscale.bias,
                                         vars.upscale.stride, vars.upscale.padding);
  trace.sr_image = Add(base, trace.residual_image);
  return trace;
}

template <typename T>
ForwardTrace<T> Forward(Graph<T>& graph, const SrSENet<T>& net, const Tensor<T>& lr,
                        const Tensor<T>& base, const ForwardOptions& options,
                        SrSENetVars<T>* bound) {
  SrSENetVars<T> vars = BindParameters(graph, net);
  auto trace = Forward(vars, net.config, graph.Constant(lr), graph.Constant(base), options);
  if (bound) *bound = std::move(vars);
  return trace;
}

std::int64_t ReceptiveField(int depth) {
  if (depth < 0) throw UsageError("depth must be non-negative");
  return 2 * static_cast<std::int64_t>(depth) + 1;
}

std::int64_t ParamCount::blocks_total() const {
  std::int64_t s = 0;
  for (const auto& b : blocks) s += b.conv + b.se;
  return s;
}

std::int64_t ParamCount::se_total() const {
  std::int64_t s = 0;
  for (const auto& b : blocks) s += b.se;
  return s;
}

std::int64_t ParamCount::total() const { return head + blocks_total() + upscale; }

template <typename T>
ParamCount CountParameters(const SrSENet<T>& net) {
  ParamCount pc;
  pc.head = net.head.weight.numel() + net.head.bias.numel();
  for (const auto& b : net.blocks) {
    BlockParamCount bc;
    bc.conv = b.conv1.weight.numel() + b.conv1.bias.numel() + b.conv2.weight.numel() +
              b.conv2.bias.numel();
    if (b.se) {
      bc.se = b.se->fc1.weight.numel() + b.se->fc1.bias.numel() + b.se->fc2.weight.numel() +
              b.se->fc2.bias.numel();
    }
    pc.blocks.push_back(bc);
  }
  pc.upscale = net.upscale.weight.numel() + net.upscale.bias.numel();
  return pc;
}

#define SRSE_INSTANTIATE(T)                                                              \
  template struct SrSENet<T>;                                                            \
  template SrSENet<T> BuildSrSENet<T>(const SrSENetConfig&, std::uint64_t);              \
  template void ZeroParameters<T>(SrSENet<T>&);                                          \
  template SrSENetVars<T> BindParameters<T>(Graph<T>&, const SrSENet<T>&);               \
  template Var<T> SELayerForward<T>(Var<T>, const SELayerVars<T>&, const ForwardOptions&, \
                                    Var<T>*);                                            \
  template Var<T> SrSEBlockForward<T>(Var<T>, const SrSEBlockVars<T>&, T,                \
                                      const ForwardOptions&);                            \
  template ForwardTrace<T> Forward<T>(const SrSENetVars<T>&, const SrSENetConfig&,       \
                                      Var<T>, Var<T>, const ForwardOptions&);            \
  template ForwardTrace<T> Forward<T>(Graph<T>&, const SrSENet<T>&, const Tensor<T>&,    \
                                      const Tensor<T>&, const ForwardOptions&,           \
                                      SrSENetVars<T>*);                                  \
  template ParamCount CountParameters<T>(const SrSENet<T>&);

SRSE_INSTANTIATE(float)
SRSE_INSTANTIATE(double)
#undef SRSE_INSTANTIATE

}  // namespace srse
