#include "srse/gradient_suite.h"

#include <cstdio>
#include <sstream>

#include "srse/gradcheck.h"
#include "srse/loss.h"
#include "srse/nn_ops.h"
#include "srse/random.h"

namespace srse {

namespace {

using Leaves = std::vector<Var<double>>;

constexpr double kStep = 1e-6;

// Uniform magnitudes in [lo, hi] with random sign; keeps samples off kinks.
TensorD AwayFromZero(const Shape& shape, double lo, double hi, Rng& rng) {
  TensorD t = RandomUniform<double>(shape, lo, hi, rng);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.data()) {
    if (flip(rng)) v = -v;
  }
  return t;
}

TensorD Uniform(const Shape& shape, Rng& rng, double bound = 1.0) {
  return RandomUniform<double>(shape, -bound, bound, rng);
}

SELayerVars<double> SeFrom(const Leaves& v, std::size_t at) {
  return {{v[at], v[at + 1]}, {v[at + 2], v[at + 3]}};
}

// Leaves laid out as [lr, parameters in SrSENet::Parameters() order].
SrSENetVars<double> NetFrom(const SrSENet<double>& net, const Leaves& v) {
  SrSENetVars<double> vars;
  std::size_t at = 1;
  const auto conv = [&](const Conv2dParams<double>& p) {
    ConvVars<double> c{v[at], v[at + 1], p.stride, p.padding};
    at += 2;
    return c;
  };
  vars.head = conv(net.head);
  for (const auto& b : net.blocks) {
    SrSEBlockVars<double> bv;
    bv.conv1 = conv(b.conv1);
    bv.conv2 = conv(b.conv2);
    if (b.se) {
      bv.se = SeFrom(v, at);
      at += 4;
    }
    vars.blocks.push_back(bv);
  }
  vars.upscale = {v[at], v[at + 1], net.upscale.stride, net.upscale.padding};
  return vars;
}

}  // namespace

bool SuiteReport::passed() const { return failures().empty(); }

std::vector<std::string> SuiteReport::failures() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.passed()) out.push_back(e.op);
  }
  return out;
}

std::string SuiteReport::Text() const {
  std::ostringstream os;
  os << "gradcheck seed=" << seed << " precision=double\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-26s %14s %10s  %s\n", "op", "max_rel_error", "threshold", "status");
  os << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-26s %14.3e %10.0e  %s\n", e.op.c_str(), e.max_error, e.threshold,
                  e.passed() ? "ok" : "FAIL");
    os << line;
  }
  const auto bad = failures();
  os << "result: " << (bad.empty() ? "pass" : "FAIL") << " (" << entries.size() - bad.size() << "/"
     << entries.size() << " within threshold)\n";
  return os.str();
}

SuiteEntry CheckNetGradients(const SrSENetConfig& config, const Shape& lr_shape, std::uint64_t seed,
                             std::int64_t max_entries, const std::string& name) {
  Rng rng(seed);
  const SrSENet<double> net = BuildSrSENet<double>(config, seed);
  const int r = config.upscale_rate;
  std::vector<TensorD> inputs{RandomUniform<double>(lr_shape, 0.0, 1.0, rng)};
  for (const auto& p : net.Parameters()) inputs.push_back(*p.tensor);
  const TensorD base = RandomUniform<double>(Shape{lr_shape.n, lr_shape.c, lr_shape.h * r, lr_shape.w * r}, 0, 1, rng);
  const TensorD target = RandomUniform<double>(base.shape(), 0.0, 1.0, rng);
  const auto r_check = CheckGradients<double>(
      inputs,
      [&](Graph<double>& g, const Leaves& v) {
        const auto trace = Forward(NetFrom(net, v), config, v[0], g.Constant(base));
        return CharbonnierLoss(trace.sr_image, g.Constant(target));
      },
      kStep, seed + 1, max_entries);
  return {name, r_check.max_error, kGradTolerance};
}

SuiteReport RunGradientSuite(std::uint64_t seed) {
  SuiteReport report;
  report.seed = seed;
  Rng rng(seed);
  const auto run = [&](const std::string& op, double threshold, const std::vector<TensorD>& inputs,
                       const GraphBuilder<double>& build) {
    const auto r = CheckGradients<double>(inputs, build, kStep, rng());
    report.entries.push_back({op, r.max_error, threshold});
  };
  constexpr double kEw = kElementwiseGradTolerance;
  constexpr double kOp = kGradTolerance;

  const Shape s{2, 3, 4, 4};
  run("add", kEw, {Uniform(s, rng), Uniform(s, rng)}, [](Graph<double>&, const Leaves& v) { return Add(v[0], v[1]); });
  run("add_broadcast", kEw, {Uniform(s, rng), Uniform(Shape{2, 3, 1, 1}, rng)},
      [](Graph<double>&, const Leaves& v) { return Add(v[0], v[1]); });
  run("scale", kEw, {Uniform(s, rng)}, [](Graph<double>&, const Leaves& v) { return Scale(v[0], -1.7); });
  run("mul", kEw, {Uniform(s, rng), Uniform(s, rng)}, [](Graph<double>&, const Leaves& v) { return Mul(v[0], v[1]); });
  run("sum", kEw, {Uniform(s, rng)}, [](Graph<double>&, const Leaves& v) { return Sum(v[0]); });

  run("conv2d", kOp, {Uniform(Shape{2, 3, 6, 6}, rng), Uniform(Shape{4, 3, 3, 3}, rng), Uniform(Shape{1, 4, 1, 1}, rng)},
      [](Graph<double>&, const Leaves& v) { return Conv2d(v[0], v[1], v[2], 1, 1); });
  run("conv2d/stride2", kOp,
      {Uniform(Shape{1, 2, 7, 7}, rng), Uniform(Shape{3, 2, 3, 3}, rng), Uniform(Shape{1, 3, 1, 1}, rng)},
      [](Graph<double>&, const Leaves& v) { return Conv2d(v[0], v[1], v[2], 2, 1); });
  for (const int rate : {2, 4, 8}) {
    const UpscaleTriple t = UpscaleTripleFor(rate);
    const std::string name = "conv_transpose2d/k" + std::to_string(t.kernel) + "s" + std::to_string(t.stride) + "p" +
                             std::to_string(t.padding);
    run(name, kOp,
        {Uniform(Shape{1, 2, 3, 3}, rng), Uniform(Shape{2, 2, t.kernel, t.kernel}, rng),
         Uniform(Shape{1, 2, 1, 1}, rng)},
        [t](Graph<double>&, const Leaves& v) { return ConvTranspose2d(v[0], v[1], v[2], t.stride, t.padding); });
  }

  run("leaky_relu", kEw, {AwayFromZero(s, 0.05, 1.0, rng)},
      [](Graph<double>&, const Leaves& v) { return LeakyRelu(v[0], 0.2); });
  run("global_avg_pool", kOp, {Uniform(s, rng)}, [](Graph<double>&, const Leaves& v) { return GlobalAvgPool(v[0]); });
  run("dense", kOp, {Uniform(Shape{3, 8, 1, 1}, rng), Uniform(Shape{1, 4, 1, 8}, rng), Uniform(Shape{1, 4, 1, 1}, rng)},
      [](Graph<double>&, const Leaves& v) { return Dense(v[0], v[1], v[2]); });
  run("sigmoid", kEw, {Uniform(s, rng, 4.0)}, [](Graph<double>&, const Leaves& v) { return Sigmoid(v[0]); });
  run("mul_channelwise", kEw, {Uniform(s, rng), Uniform(Shape{2, 3, 1, 1}, rng)},
      [](Graph<double>&, const Leaves& v) { return MulChannelwise(v[0], v[1]); });
  {
    const TensorD pred = Uniform(s, rng);
    TensorD target = pred;
    const TensorD gap = AwayFromZero(s, 0.05, 0.5, rng);
    for (std::int64_t i = 0; i < target.numel(); ++i) target[i] += gap[i];
    run("charbonnier", kEw, {pred, target},
        [](Graph<double>&, const Leaves& v) { return CharbonnierLoss(v[0], v[1]); });
  }

  // Channels 8, reduction 4: a bottleneck of 2.
  const auto se_inputs = [&](const Shape& u) {
    return std::vector<TensorD>{Uniform(u, rng), Uniform(Shape{1, 2, 1, 8}, rng), Uniform(Shape{1, 2, 1, 1}, rng, 0.5),
                                Uniform(Shape{1, 8, 1, 2}, rng), Uniform(Shape{1, 8, 1, 1}, rng, 0.5)};
  };
  run("se_layer", kOp, se_inputs(Shape{2, 8, 4, 4}),
      [](Graph<double>&, const Leaves& v) { return SELayerForward(v[0], SeFrom(v, 1)); });
  for (const bool with_se : {true, false}) {
    auto in = se_inputs(Shape{1, 8, 5, 5});
    if (!with_se) in.resize(1);
    in.push_back(Uniform(Shape{8, 8, 3, 3}, rng, 0.5));
    in.push_back(Uniform(Shape{1, 8, 1, 1}, rng, 0.1));
    in.push_back(Uniform(Shape{8, 8, 3, 3}, rng, 0.5));
    in.push_back(Uniform(Shape{1, 8, 1, 1}, rng, 0.1));
    run(with_se ? "srse_block" : "srse_block/no_se", kOp, in, [with_se](Graph<double>&, const Leaves& v) {
      const std::size_t c = with_se ? 5 : 1;
      SrSEBlockVars<double> p{{v[c], v[c + 1], 1, 1}, {v[c + 2], v[c + 3], 1, 1}, std::nullopt};
      if (with_se) p.se = SeFrom(v, 1);
      return SrSEBlockForward(v[0], p, 0.2);
    });
  }

  SrSENetConfig tiny;
  tiny.depth = 2;
  tiny.width = 8;
  tiny.reduction_ratio = 4;
  tiny.upscale_rate = 2;
  report.entries.push_back(CheckNetGradients(tiny, Shape{1, 1, 5, 5}, rng(), 0, "srse_net/tiny"));
  return report;
}

}  // namespace srse
