#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "srse/gradcheck.h"
#include "srse/loss.h"
#include "srse/model.h"
#include "srse/random.h"

using namespace srse;

namespace {

SrSENetConfig Tiny(int rate = 2, bool se = true) {
  SrSENetConfig c;
  c.depth = 2;
  c.width = 8;
  c.reduction_ratio = 4;
  c.upscale_rate = rate;
  c.se_enabled = se;
  return c;
}

// Inputs for the SE layer: u, fc1.w, fc1.b, fc2.w, fc2.b.
std::vector<TensorD> RandomSeInputs(Rng& rng, const Shape& u, int reduction) {
  const std::int64_t c = u.c;
  const std::int64_t b = c / reduction;
  return {RandomUniform<double>(u, -1, 1, rng),
          RandomUniform<double>(Shape{1, b, 1, c}, -1, 1, rng),
          RandomUniform<double>(Shape{1, b, 1, 1}, -0.5, 0.5, rng),
          RandomUniform<double>(Shape{1, c, 1, b}, -1, 1, rng),
          RandomUniform<double>(Shape{1, c, 1, 1}, -0.5, 0.5, rng)};
}

SELayerVars<double> SeVars(const std::vector<Var<double>>& v, std::size_t at) {
  return {{v[at], v[at + 1]}, {v[at + 2], v[at + 3]}};
}

// A 3x3 kernel that copies each channel: center 1 on the diagonal.
TensorD IdentityKernel(std::int64_t c) {
  TensorD w(Shape{c, c, 3, 3}, 0.0);
  for (std::int64_t i = 0; i < c; ++i) w.at(i, i, 1, 1) = 1.0;
  return w;
}

}  // namespace

TEST_CASE("SE layer") {
  Rng rng(100);
  SUBCASE("zero weights gate at one half") {
    Graph<double> g;
    auto u = RandomUniform<double>(Shape{2, 8, 3, 3}, -1, 1, rng);
    SELayerVars<double> p{{g.Constant(TensorD(Shape{1, 2, 1, 8}, 0.0)), g.Constant(TensorD(Shape{1, 2, 1, 1}, 0.0))},
                          {g.Constant(TensorD(Shape{1, 8, 1, 2}, 0.0)), g.Constant(TensorD(Shape{1, 8, 1, 1}, 0.0))}};
    auto y = SELayerForward(g.Constant(u), p);
    for (std::int64_t i = 0; i < u.numel(); ++i) CHECK(y.value()[i] == 0.5 * u[i]);
  }
  SUBCASE("zero input with zero biases gives zero") {
    Graph<double> g;
    auto in = RandomSeInputs(rng, Shape{1, 8, 3, 3}, 4);
    in[0].fill(0.0);
    in[2].fill(0.0);
    in[4].fill(0.0);
    std::vector<Var<double>> v;
    for (auto& t : in) v.push_back(g.Constant(t));
    auto y = SELayerForward(v[0], SeVars(v, 1));
    for (double x : y.value().data()) CHECK(x == 0.0);
  }
  SUBCASE("channel mismatch") {
    Graph<double> g;
    auto in = RandomSeInputs(rng, Shape{1, 8, 3, 3}, 4);
    std::vector<Var<double>> v;
    for (auto& t : in) v.push_back(g.Constant(t));
    CHECK_THROWS_AS(SELayerForward(g.Constant(TensorD(Shape{1, 4, 3, 3}, 1.0)), SeVars(v, 1)),
                    MismatchError);
  }
  SUBCASE("gradcheck") {
    auto r = CheckGradients<double>(
        RandomSeInputs(rng, Shape{1, 8, 4, 4}, 4),
        [](Graph<double>&, const std::vector<Var<double>>& v) { return SELayerForward(v[0], SeVars(v, 1)); },
        1e-5, 31);
    CHECK(r.max_error <= 1e-5);
  }
}

TEST_CASE("SrSE block") {
  Rng rng(200);
  const auto conv = [](Graph<double>& g, const TensorD& w, std::int64_t c) {
    return ConvVars<double>{g.Constant(w), g.Constant(TensorD(Shape{1, c, 1, 1}, 0.0)), 1, 1};
  };
  SUBCASE("zero convolutions leave the input unchanged") {
    for (bool se : {true, false}) {
      Graph<double> g;
      auto x = RandomUniform<double>(Shape{1, 8, 5, 5}, -1, 1, rng);
      auto in = RandomSeInputs(rng, Shape{1, 8, 1, 1}, 4);
      SrSEBlockVars<double> p{conv(g, TensorD(Shape{8, 8, 3, 3}, 0.0), 8),
                              conv(g, TensorD(Shape{8, 8, 3, 3}, 0.0), 8), std::nullopt};
      if (se) {
        std::vector<Var<double>> v;
        for (auto& t : in) v.push_back(g.Constant(t));
        p.se = SeVars(v, 1);
      }
      CHECK(SrSEBlockForward(g.Constant(x), p, 0.2).value() == x);
    }
  }
  SUBCASE("ablated identity convolutions double a positive input") {
    Graph<double> g;
    auto x = RandomUniform<double>(Shape{1, 4, 6, 6}, 0.1, 1, rng);
    SrSEBlockVars<double> p{conv(g, IdentityKernel(4), 4), conv(g, IdentityKernel(4), 4), std::nullopt};
    auto y = SrSEBlockForward(g.Constant(x), p, 0.2).value();
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == 2.0 * x[i]);
  }
  SUBCASE("gradcheck with SE") {
    auto se = RandomSeInputs(rng, Shape{1, 8, 5, 5}, 4);
    std::vector<TensorD> in = {se[0], RandomUniform<double>(Shape{8, 8, 3, 3}, -0.5, 0.5, rng),
                               RandomUniform<double>(Shape{1, 8, 1, 1}, -0.1, 0.1, rng),
                               RandomUniform<double>(Shape{8, 8, 3, 3}, -0.5, 0.5, rng),
                               RandomUniform<double>(Shape{1, 8, 1, 1}, -0.1, 0.1, rng),
                               se[1], se[2], se[3], se[4]};
    auto r = CheckGradients<double>(
        in,
        [](Graph<double>&, const std::vector<Var<double>>& v) {
          SrSEBlockVars<double> p{{v[1], v[2], 1, 1}, {v[3], v[4], 1, 1}, SeVars(v, 5)};
          return SrSEBlockForward(v[0], p, 0.2);
        },
        1e-5, 41);
    CHECK(r.max_error <= 1e-5);
  }
}

TEST_CASE("build") {
  SrSENetConfig standard;
  CHECK(standard.depth == 8);
  CHECK(standard.width == 64);
  CHECK(standard.reduction_ratio == 16);
  CHECK(standard.bottleneck() == 4);

  SUBCASE("upscale triple for x4") {
    auto net = BuildSrSENet<float>(standard, 1);
    CHECK(net.upscale.kernel() == 8);
    CHECK(net.upscale.stride == 4);
    CHECK(net.upscale.padding == 2);
    CHECK(net.blocks.size() == 8);
  }
  SUBCASE("triples for every rate") {
    CHECK(UpscaleTripleFor(2).kernel == 4);
    CHECK(UpscaleTripleFor(8).kernel == 16);
    CHECK(UpscaleTripleFor(8).stride == 8);
    CHECK(UpscaleTripleFor(8).padding == 4);
    CHECK_THROWS_AS(UpscaleTripleFor(3), UsageError);
  }
  SUBCASE("deterministic in the seed") {
    auto a = BuildSrSENet<float>(Tiny(), 7);
    auto b = BuildSrSENet<float>(Tiny(), 7);
    auto c = BuildSrSENet<float>(Tiny(), 8);
    auto pa = a.Parameters();
    auto pb = b.Parameters();
    auto pc = c.Parameters();
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(*pa[i].tensor == *pb[i].tensor);
      differs = differs || !(*pa[i].tensor == *pc[i].tensor);
    }
    CHECK(differs);
  }
  SUBCASE("SE parameter count") {
    auto pc = CountParameters(BuildSrSENet<float>(standard, 1));
    for (const auto& b : pc.blocks) CHECK(b.se == 580);
    CHECK(pc.se_total() == 4640);
  }
  SUBCASE("initialization statistics") {
    auto net = BuildSrSENet<double>(standard, 3);
    const auto& w = net.blocks[0].conv1.weight;
    double sq = 0;
    for (double v : w.data()) sq += v * v;
    CHECK(sq / w.numel() == doctest::Approx(2.0 / (64 * 9)).epsilon(0.05));
    for (double v : net.blocks[0].conv1.bias.data()) CHECK(v == 0.0);
  }
  SUBCASE("invalid configs") {
    SrSENetConfig c = Tiny();
    c.reduction_ratio = 3;
    CHECK_THROWS_AS(BuildSrSENet<float>(c, 1), UsageError);
    c = Tiny();
    c.depth = 0;
    CHECK_THROWS_AS(BuildSrSENet<float>(c, 1), UsageError);
    c = Tiny();
    c.input_channels = 2;
    CHECK_THROWS_AS(BuildSrSENet<float>(c, 1), UsageError);
  }
}

TEST_CASE("forward") {
  Rng rng(300);
  SUBCASE("x4 on 24x24") {
    SrSENetConfig c = Tiny(4);
    auto net = BuildSrSENet<float>(c, 1);
    Graph<float> g;
    auto t = Forward(g, net, RandomUniform<float>(Shape{1, 1, 24, 24}, 0, 1, rng),
                     RandomUniform<float>(Shape{1, 1, 96, 96}, 0, 1, rng));
    CHECK(t.sr_image.shape() == Shape{1, 1, 96, 96});
    CHECK(t.block_outputs.size() == 2);
    CHECK(t.f0.shape() == Shape{1, 8, 24, 24});
  }
  SUBCASE("x8 on 16x16") {
    auto net = BuildSrSENet<float>(Tiny(8), 1);
    Graph<float> g;
    auto t = Forward(g, net, TensorF(Shape{1, 1, 16, 16}, 0.5f), TensorF(Shape{1, 1, 128, 128}, 0.5f));
    CHECK(t.sr_image.shape() == Shape{1, 1, 128, 128});
  }
  SUBCASE("sr is base plus residual") {
    auto net = BuildSrSENet<double>(Tiny(2), 4);
    Graph<double> g;
    auto base = RandomUniform<double>(Shape{2, 1, 16, 20}, 0, 1, rng);
    auto t = Forward(g, net, RandomUniform<double>(Shape{2, 1, 8, 10}, 0, 1, rng), base);
    for (std::int64_t i = 0; i < base.numel(); ++i) {
      CHECK(t.sr_image.value()[i] == base[i] + t.residual_image.value()[i]);
    }
  }
  SUBCASE("base size and channel mismatches") {
    auto net = BuildSrSENet<float>(Tiny(2), 1);
    Graph<float> g;
    CHECK_THROWS_AS(Forward(g, net, TensorF(Shape{1, 1, 8, 8}), TensorF(Shape{1, 1, 15, 16})), MismatchError);
    CHECK_THROWS_AS(Forward(g, net, TensorF(Shape{1, 3, 8, 8}), TensorF(Shape{1, 3, 16, 16})), MismatchError);
  }
}

TEST_CASE("receptive field") {
  CHECK(ReceptiveField(8) == 17);
  CHECK(ReceptiveField(0) == 1);
  CHECK(ReceptiveField(20) == 41);
  CHECK_THROWS_AS(ReceptiveField(-1), UsageError);
}

TEST_CASE("parameter count") {
  SrSENetConfig standard;
  auto full = CountParameters(BuildSrSENet<float>(standard, 1));
  SrSENetConfig ablated = standard;
  ablated.se_enabled = false;
  auto lean = CountParameters(BuildSrSENet<float>(ablated, 1));
  const std::int64_t c = 64, b = 4, d = 8;
  CHECK(full.total() - lean.total() == d * (c * b + b + b * c + c));
  CHECK(full.total() - lean.total() == 4640);
  CHECK(full.head == 640);
  CHECK(full.upscale == 64 * 8 * 8 + 1);

  SrSENetConfig deep = standard;
  deep.depth = 16;
  CHECK(CountParameters(BuildSrSENet<float>(deep, 1)).blocks_total() == 2 * full.blocks_total());

  // Breakdown agrees with the named parameter list.
  auto net = BuildSrSENet<float>(standard, 1);
  std::int64_t sum = 0;
  for (const auto& p : net.Parameters()) sum += p.tensor->numel();
  CHECK(sum == full.total());
  CHECK(net.Parameters().size() == 2 + 8 * 8 + 2);
}

TEST_CASE("property: SE gates lie in (0,1) and strictly attenuate") {
  Rng rng(400);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = RandomSeInputs(rng, Shape{2, 8, 4, 4}, 4);
    for (auto& v : in[1].data()) v *= 4;  // push some gates toward saturation
    Graph<double> g;
    std::vector<Var<double>> v;
    for (auto& t : in) v.push_back(g.Constant(t));
    Var<double> gates;
    auto y = SELayerForward(v[0], SeVars(v, 1), {}, &gates);
    for (double s : gates.value().data()) {
      CHECK(s > 0.0);
      CHECK(s < 1.0);
    }
    double in_max = 0, out_max = 0;
    for (double x : in[0].data()) in_max = std::max(in_max, std::abs(x));
    for (double x : y.value().data()) out_max = std::max(out_max, std::abs(x));
    CHECK(out_max < in_max);
  }
}

TEST_CASE("property: all-zero weights reproduce the base image bit-exactly") {
  Rng rng(500);
  for (int rate : {2, 4, 8}) {
    auto net = BuildSrSENet<float>(Tiny(rate), 9);
    ZeroParameters(net);
    auto base = RandomUniform<float>(Shape{1, 1, 8 * rate, 8 * rate}, 0, 1, rng);
    Graph<float> g;
    auto t = Forward(g, net, RandomUniform<float>(Shape{1, 1, 8, 8}, 0, 1, rng), base);
    CHECK(t.sr_image.value() == base);
  }
}

TEST_CASE("property: spatial extent law") {
  for (int rate : {2, 4, 8}) {
    SrSENetConfig c = Tiny(rate);
    c.depth = 1;
    c.width = 4;
    c.reduction_ratio = 4;
    auto net = BuildSrSENet<float>(c, 2);
    for (int extent = 8; extent <= 48; ++extent) {
      Graph<float> g;
      auto t = Forward(g, net, TensorF(Shape{1, 1, extent, extent + 1}, 0.5f),
                       TensorF(Shape{1, 1, rate * extent, rate * (extent + 1)}, 0.5f));
      CHECK(t.sr_image.shape() == Shape{1, 1, rate * extent, rate * (extent + 1)});
    }
  }
}

TEST_CASE("property: forcing SE gates to one equals the ablated block") {
  Rng rng(600);
  auto with_se = BuildSrSENet<double>(Tiny(2, true), 11);
  auto without = BuildSrSENet<double>(Tiny(2, false), 11);
  // Copy the shared convolution weights across.
  for (std::size_t i = 0; i < with_se.blocks.size(); ++i) {
    without.blocks[i].conv1 = with_se.blocks[i].conv1;
    without.blocks[i].conv2 = with_se.blocks[i].conv2;
  }
  without.head = with_se.head;
  without.upscale = with_se.upscale;
  auto lr = RandomUniform<double>(Shape{2, 1, 9, 7}, 0, 1, rng);
  auto base = RandomUniform<double>(Shape{2, 1, 18, 14}, 0, 1, rng);
  Graph<double> g1, g2;
  auto forced = Forward(g1, with_se, lr, base, ForwardOptions{.force_unit_gates = true});
  auto ablated = Forward(g2, without, lr, base);
  CHECK(forced.sr_image.value() == ablated.sr_image.value());
}

TEST_CASE("property: end-to-end gradient of a small network") {
  Rng rng(700);
  auto net = BuildSrSENet<double>(Tiny(2), 12);
  for (auto& p : net.Parameters()) {
    if (p.name.find("bias") != std::string::npos) {
      *p.tensor = RandomUniform<double>(p.tensor->shape(), -0.1, 0.1, rng);
    }
  }
  const auto lr = RandomUniform<double>(Shape{1, 1, 8, 8}, 0, 1, rng);
  const auto base = RandomUniform<double>(Shape{1, 1, 16, 16}, 0, 1, rng);
  const auto target = RandomUniform<double>(Shape{1, 1, 16, 16}, 0, 1, rng);
  std::vector<TensorD> params;
  for (const auto& p : std::as_const(net).Parameters()) params.push_back(*p.tensor);

  const SrSENetConfig config = net.config;
  const GraphBuilder<double> build = [&](Graph<double>& g, const std::vector<Var<double>>& v) {
    // Rebuild the bound-parameter structure on top of the variables.
    SrSENetVars<double> vars;
    std::size_t at = 0;
    const auto conv = [&](int stride, int pad) {
      ConvVars<double> cv{v[at], v[at + 1], stride, pad};
      at += 2;
      return cv;
    };
    vars.head = conv(1, 1);
    for (int k = 0; k < config.depth; ++k) {
      SrSEBlockVars<double> b{conv(1, 1), conv(1, 1), std::nullopt};
      b.se = SeVars(v, at);
      at += 4;
      vars.blocks.push_back(b);
    }
    vars.upscale = conv(2, 1);
    auto t = Forward(vars, config, g.Constant(lr), g.Constant(base));
    return CharbonnierLoss(t.sr_image, g.Constant(target));
  };
  auto r = CheckGradients<double>(params, build, 1e-5, 71);
  CHECK(r.max_error <= 1e-4);
  MESSAGE("max relative error " << r.max_error);
}
