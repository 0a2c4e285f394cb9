#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "srse/imaging.h"
#include "srse/loss.h"
#include "srse/model.h"
#include "srse/optim.h"

namespace srse {

struct TrainConfig {
  int batch_size = 64;
  std::int64_t iterations = 1000;
  std::int64_t eval_interval = 100;
  std::int64_t checkpoint_interval = 0;  // 0: same as eval_interval
  std::uint64_t seed = 1;
  int upscale_rate = 4;
  bool se_enabled = true;
  int depth = 8;
  int width = 64;
  int reduction_ratio = 16;
  double leaky_slope = 0.2;
  double charbonnier_epsilon = kDefaultCharbonnierEpsilon;
  // Pairs scored at every evaluation; the first max_eval_pairs of the set.
  int max_eval_pairs = 64;
  AdamConfig adam;
  std::string dataset_path;
  std::string eval_dataset_path;  // empty: score on the training pairs
  std::string checkpoint_path;
  std::string curve_path;

  void Validate() const;
  SrSENetConfig ModelConfig(int input_channels) const;
};

// Pairs converted to [0, 1] tensors, with float bicubic upsamples of the LR
// side as base images.
struct PreparedPairs {
  int scale = 1;
  int channels = 1;
  std::vector<TensorF> lr;
  std::vector<TensorF> base;
  std::vector<TensorF> hr;
  std::vector<Image> hr_images;
  std::vector<Image> bicubic_images;  // byte-exact bicubic upsample of lr

  std::size_t size() const { return lr.size(); }
};

PreparedPairs PreparePairs(const DatasetPack& pack, std::size_t limit = 0);

// Float bicubic upsample of an (N, C, h, w) tensor on [0, 1].
TensorF BicubicUpsample(const TensorF& lr, int scale);

struct CurvePoint {
  std::int64_t iteration = 0;
  double loss = 0.0;  // mean training loss since the previous point
  double psnr_db = 0.0;
};

struct PairScores {
  double model_psnr_db = 0.0;    // mean over pairs, model output rounded to 8 bits
  double bicubic_psnr_db = 0.0;  // mean over pairs, byte-exact bicubic upsample
};

// Runs the network on every pair; no shave.
PairScores ScorePairs(const SrSENet<float>& net, const PreparedPairs& pairs);

struct TrainState {
  SrSENet<float> net;
  AdamState<float> adam;
  std::uint64_t iteration = 0;
};

TrainState InitialTrainState(const TrainConfig& config, int input_channels);

struct TrainResult {
  std::vector<double> losses;  // one per iteration, loss before the update
  std::vector<CurvePoint> curve;
};

// Seeded shuffling, one Adam step per minibatch, periodic evaluation and
// checkpoints. Writes the curve CSV and checkpoint when their paths are set.
// Throws MismatchError if the pack disagrees with the config and
// NumericError (naming the iteration) on a non-finite loss or gradient.
TrainResult TrainLoop(TrainState& state, const DatasetPack& train, const DatasetPack& eval,
                      const TrainConfig& config, std::ostream* log = nullptr);

// Trailing moving average; entry i averages losses[max(0, i-window+1) .. i].
std::vector<double> SmoothLosses(const std::vector<double>& losses, std::size_t window);

std::string CurveCsv(const std::vector<CurvePoint>& curve);

}  // namespace srse
