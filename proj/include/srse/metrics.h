#pragma once

#include <functional>
#include <string>
#include <vector>

#include "srse/imaging.h"

namespace srse {

enum class EvalChannel { kY, kRgbMean };

std::string EvalChannelName(EvalChannel channel);
EvalChannel ParseEvalChannel(const std::string& name);  // "y" or "rgb"

struct EvalProtocol {
  EvalChannel channel = EvalChannel::kY;
  int shave = 0;  // pixels dropped from every border
  double peak = 255.0;

  // Throws unless 0 <= shave < min(width, height) / 2.
  void Validate(int width, int height) const;
  // One line, e.g. "channel=y shave=4 peak=255 ssim_channel=y".
  std::string Describe() const;
};

// Normalized 2-D Gaussian, row-major size x size.
std::vector<double> GaussianWindow(int size = 11, double sigma = 1.5);

// 10 log10(peak^2 / MSE) over the shaved region; +inf for identical inputs.
double Psnr(const Plane& a, const Plane& b, int shave = 0, double peak = 255.0);
// Y mode compares unrounded luma; RGB-mean pools the MSE of all channels.
double Psnr(const Image& a, const Image& b, const EvalProtocol& protocol);

// Mean SSIM over every fully contained 11x11 Gaussian window (sigma 1.5)
// of the shaved region.
double Ssim(const Plane& a, const Plane& b, int shave = 0, double peak = 255.0);
// Always evaluated on luma, whatever the PSNR channel mode.
double Ssim(const Image& a, const Image& b, const EvalProtocol& protocol);

struct BenchmarkRow {
  std::string image;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct BenchmarkReport {
  std::string mode;  // "bicubic", "sr-dir" or "model"
  int scale = 1;
  EvalProtocol protocol;
  std::vector<BenchmarkRow> rows;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
};

// Sorted stems of the *.png files in `dir`.
std::vector<std::string> PngStems(const std::string& dir);

// Produces the SR estimate for one modcropped HR image.
using SrProducer = std::function<Image(const Image& hr, const std::string& stem)>;

// For every PNG in hr_dir: modcrop by `scale`, produce the estimate, compare.
// Images are processed in parallel; rows stay in stem order.
BenchmarkReport EvaluateBenchmark(const std::string& hr_dir, int scale,
                                  const EvalProtocol& protocol,
                                  const std::string& mode, const SrProducer& produce);

// Baseline: bicubic downscale by `scale`, then bicubic upscale back.
BenchmarkReport EvaluateBicubic(const std::string& hr_dir, int scale, const EvalProtocol& protocol);
Image BicubicBaseline(const Image& hr_modcropped, int scale);

// Precomputed SR images with the same stems as the HR images.
BenchmarkReport EvaluateSrDirectory(const std::string& sr_dir, const std::string& hr_dir,
                                    int scale, const EvalProtocol& protocol);

// "inf" for infinite values, fixed decimals otherwise.
std::string FormatMetric(double value, int decimals);
std::string ReportCsv(const BenchmarkReport& report);
std::string ReportTable(const BenchmarkReport& report);

}  // namespace srse
