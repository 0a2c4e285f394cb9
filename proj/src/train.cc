#include "srse/train.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "binary_io.h"
#include "srse/checkpoint.h"
#include "srse/error.h"
#include "srse/metrics.h"
#include "srse/random.h"

namespace srse {

void TrainConfig::Validate() const {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (iterations < 0) throw UsageError("iteration count must be non-negative");
  if (eval_interval < 0 || checkpoint_interval < 0) throw UsageError("intervals must be non-negative");
  if (max_eval_pairs < 1) throw UsageError("max_eval_pairs must be at least 1");
  if (!(charbonnier_epsilon > 0)) throw UsageError("charbonnier epsilon must be positive");
  adam.Validate();
  ModelConfig(1).Validate();
}

SrSENetConfig TrainConfig::ModelConfig(int input_channels) const {
  SrSENetConfig c;
  c.depth = depth;
  c.width = width;
  c.upscale_rate = upscale_rate;
  c.reduction_ratio = reduction_ratio;
  c.se_enabled = se_enabled;
  c.input_channels = input_channels;
  c.leaky_slope = leaky_slope;
  return c;
}

TensorF BicubicUpsample(const TensorF& lr, int scale) {
  const auto& s = lr.shape();
  TensorF out(Shape{s.n, s.c, s.h * scale, s.w * scale});
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      Plane p(static_cast<int>(s.w), static_cast<int>(s.h));
      const float* src = lr.plane(n, c);
      for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = src[i];
      const Plane up = BicubicResize(p, p.width * scale, p.height * scale);
      float* dst = out.plane(n, c);
      for (std::size_t i = 0; i < up.data.size(); ++i) dst[i] = static_cast<float>(up.data[i]);
    }
  }
  return out;
}

PreparedPairs PreparePairs(const DatasetPack& pack, std::size_t limit) {
  PreparedPairs out;
  out.scale = pack.scale;
  out.channels = pack.channels;
  const std::size_t n = limit == 0 ? pack.count : std::min<std::size_t>(limit, pack.count);
  for (std::size_t i = 0; i < n; ++i) {
    const Image lr = pack.lr(i);
    const Image hr = pack.hr(i);
    out.lr.push_back(ImageToTensor<float>(lr));
    out.base.push_back(BicubicUpsample(out.lr.back(), pack.scale));
    out.hr.push_back(ImageToTensor<float>(hr));
    out.bicubic_images.push_back(BicubicResize(lr, hr.width, hr.height));
    out.hr_images.push_back(hr);
  }
  return out;
}

namespace {

TensorF Stack(const std::vector<TensorF>& items, const std::vector<std::size_t>& pick) {
  const Shape one = items[pick[0]].shape();
  TensorF out(Shape{static_cast<std::int64_t>(pick.size()), one.c, one.h, one.w});
  const auto stride = static_cast<std::size_t>(one.numel());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    std::memcpy(out.data().data() + i * stride, items[pick[i]].data().data(), stride * sizeof(float));
  }
  return out;
}

Image TensorToImage(const TensorF& t) {
  const auto& s = t.shape();
  Image img(static_cast<int>(s.w), static_cast<int>(s.h), static_cast<int>(s.c),
            s.c == 3 ? ColorSpace::kSrgb : ColorSpace::kY);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) img.at(x, y, c) = RoundToByte(255.0 * t.at(0, c, y, x));
    }
  }
  return img;
}

double MeanOf(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void CheckPack(const DatasetPack& pack, const TrainConfig& config, const char* role) {
  if (pack.scale != config.upscale_rate) {
    throw MismatchError(std::string(role) + " pack has scale " + std::to_string(pack.scale) +
                        " but training scale is " + std::to_string(config.upscale_rate));
  }
  if (pack.count == 0) throw MismatchError(std::string(role) + " pack holds no pairs");
}

}  // namespace

PairScores ScorePairs(const SrSENet<float>& net, const PreparedPairs& pairs) {
  const EvalProtocol pooled{EvalChannel::kRgbMean, 0, 255.0};
  std::vector<double> model, bicubic;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Graph<float> g;
    const auto trace = Forward(g, net, pairs.lr[i], pairs.base[i]);
    model.push_back(Psnr(TensorToImage(trace.sr_image.value()), pairs.hr_images[i], pooled));
    bicubic.push_back(Psnr(pairs.bicubic_images[i], pairs.hr_images[i], pooled));
  }
  return {MeanOf(model), MeanOf(bicubic)};
}

TrainState InitialTrainState(const TrainConfig& config, int input_channels) {
  TrainState s;
  s.net = BuildSrSENet<float>(config.ModelConfig(input_channels), config.seed);
  std::vector<Shape> shapes;
  for (const auto& p : s.net.Parameters()) shapes.push_back(p.tensor->shape());
  s.adam = AdamState<float>::Zeros(shapes);
  return s;
}

std::vector<double> SmoothLosses(const std::vector<double>& losses, std::size_t window) {
  if (window == 0) throw UsageError("smoothing window must be positive");
  std::vector<double> out(losses.size());
  double running = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    running += losses[i];
    if (i >= window) running -= losses[i - window];
    out[i] = running / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::string CurveCsv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os << "iteration,loss,psnr_db\n";
  for (const auto& p : curve) {
    os << p.iteration << "," << FormatMetric(p.loss, 8) << "," << FormatMetric(p.psnr_db, 4) << "\n";
  }
  return os.str();
}

TrainResult TrainLoop(TrainState& state, const DatasetPack& train, const DatasetPack& eval,
                      const TrainConfig& config, std::ostream* log) {
  config.Validate();
  CheckPack(train, config, "training");
  CheckPack(eval, config, "evaluation");
  if (eval.channels != train.channels) throw MismatchError("training and evaluation packs differ in channels");
  const SrSENetConfig expected = config.ModelConfig(train.channels);
  if (!(state.net.config == expected)) {
    throw MismatchError("network config (" + DescribeConfig(state.net.config) + ") does not match the run (" +
                        DescribeConfig(expected) + ")");
  }

  const PreparedPairs pairs = PreparePairs(train);
  const PreparedPairs scored = PreparePairs(eval, static_cast<std::size_t>(config.max_eval_pairs));
  const auto checkpoint_every = config.checkpoint_interval > 0 ? config.checkpoint_interval : config.eval_interval;

  // Separate stream from the initializer so changing one never shifts the other.
  std::seed_seq seq{config.seed, std::uint64_t{0x5eed}};
  Rng shuffler(seq);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  auto save = [&]() {
    if (!config.checkpoint_path.empty()) {
      SaveCheckpoint(config.checkpoint_path, state.net, &state.adam, state.iteration);
    }
  };
  TrainResult result;
  auto write_curve = [&]() {
    if (config.curve_path.empty()) return;
    const std::string text = CurveCsv(result.curve);
    detail::WriteFileBytes(config.curve_path, std::vector<std::uint8_t>(text.begin(), text.end()));
  };

  std::size_t interval_start = 0;
  for (std::int64_t step = 0; step < config.iterations; ++step) {
    std::vector<std::size_t> pick;
    while (pick.size() < static_cast<std::size_t>(config.batch_size)) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffler);
        cursor = 0;
      }
      pick.push_back(order[cursor++]);
    }
    const std::uint64_t it = state.iteration + 1;

    Graph<float> g;
    SrSENetVars<float> vars;
    const auto trace = Forward(g, state.net, Stack(pairs.lr, pick), Stack(pairs.base, pick), {}, &vars);
    const auto loss = CharbonnierLoss(trace.sr_image, g.Constant(Stack(pairs.hr, pick)),
                                      static_cast<float>(config.charbonnier_epsilon));
    const double loss_value = loss.value().item();
    if (!std::isfinite(loss_value)) throw NumericError("non-finite loss at iteration " + std::to_string(it));
    g.Backward(loss);

    std::vector<Tensor<float>*> params;
    std::vector<const Tensor<float>*> grads;
    for (auto& p : state.net.Parameters()) params.push_back(p.tensor);
    for (const auto& [name, v] : vars.named) grads.push_back(&g.grad(v));
    try {
      AdamStep(params, grads, state.adam, config.adam);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(it));
    }
    state.iteration = it;
    result.losses.push_back(loss_value);

    if (config.eval_interval > 0 && it % static_cast<std::uint64_t>(config.eval_interval) == 0) {
      const std::vector<double> recent(result.losses.begin() + static_cast<std::ptrdiff_t>(interval_start),
                                       result.losses.end());
      interval_start = result.losses.size();
      const auto scores = ScorePairs(state.net, scored);
      result.curve.push_back({static_cast<std::int64_t>(it), MeanOf(recent), scores.model_psnr_db});
      write_curve();
      if (log) {
        *log << "iteration " << it << " loss " << FormatMetric(result.curve.back().loss, 6) << " psnr "
             << FormatMetric(scores.model_psnr_db, 3) << " dB (bicubic " << FormatMetric(scores.bicubic_psnr_db, 3)
             << " dB)\n";
      }
    }
    if (checkpoint_every > 0 && it % static_cast<std::uint64_t>(checkpoint_every) == 0) save();
  }
  write_curve();
  save();
  return result;
}

}  // namespace srse
