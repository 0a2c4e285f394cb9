#include "srse/metrics.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "srse/error.h"
#include "srse/parallel.h"

namespace srse {

std::string EvalChannelName(EvalChannel channel) {
  return channel == EvalChannel::kY ? "y" : "rgb";
}

EvalChannel ParseEvalChannel(const std::string& name) {
  if (name == "y") return EvalChannel::kY;
  if (name == "rgb") return EvalChannel::kRgbMean;
  throw UsageError("unknown evaluation channel '" + name + "' (expected y or rgb)");
}

void EvalProtocol::Validate(int width, int height) const {
  if (shave < 0) throw UsageError("shave must be non-negative");
  if (2 * shave >= std::min(width, height)) {
    throw MismatchError("shave " + std::to_string(shave) + " leaves nothing of a " + std::to_string(width) +
                        "x" + std::to_string(height) + " image");
  }
  if (!(peak > 0)) throw UsageError("peak must be positive");
}

std::string EvalProtocol::Describe() const {
  std::ostringstream os;
  os << "channel=" << EvalChannelName(channel) << " shave=" << shave << " peak=" << peak
     << " ssim_channel=y";
  return os.str();
}

namespace {

std::vector<double> Gaussian1d(int size, double sigma) {
  if (size < 1 || !(sigma > 0)) throw UsageError("bad Gaussian window parameters");
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

}  // namespace

std::vector<double> GaussianWindow(int size, double sigma) {
  const auto g = Gaussian1d(size, sigma);
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) w[static_cast<std::size_t>(y) * size + x] = g[y] * g[x];
  }
  return w;
}

namespace {

void CheckSameExtents(const Plane& a, const Plane& b) {
  if (a.width != b.width || a.height != b.height) {
    throw MismatchError("image extents differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                        " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

void CheckSameExtents(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw MismatchError("images differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                        std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height) + "x" + std::to_string(b.channels));
  }
}

Plane Shaved(const Plane& p, int shave) {
  if (shave == 0) return p;
  Plane out(p.width - 2 * shave, p.height - 2 * shave);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) out.at(x, y) = p.at(x + shave, y + shave);
  }
  return out;
}

double SumSquaredError(const Plane& a, const Plane& b, int shave) {
  double sse = 0;
  for (int y = shave; y < a.height - shave; ++y) {
    for (int x = shave; x < a.width - shave; ++x) {
      const double d = a.at(x, y) - b.at(x, y);
      sse += d * d;
    }
  }
  return sse;
}

double PsnrFromMse(double mse, double peak) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

// "Valid" separable filtering with the 1-D factor of the Gaussian window.
Plane FilterValid(const Plane& p, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  Plane rows(p.width - k + 1, p.height);
  for (int y = 0; y < rows.height; ++y) {
    for (int x = 0; x < rows.width; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += g[i] * p.at(x + i, y);
      rows.at(x, y) = acc;
    }
  }
  Plane out(rows.width, p.height - k + 1);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += g[i] * rows.at(x, y + i);
      out.at(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

double Psnr(const Plane& a, const Plane& b, int shave, double peak) {
  CheckSameExtents(a, b);
  EvalProtocol{EvalChannel::kY, shave, peak}.Validate(a.width, a.height);
  const double n = static_cast<double>(a.width - 2 * shave) * (a.height - 2 * shave);
  return PsnrFromMse(SumSquaredError(a, b, shave) / n, peak);
}

double Psnr(const Image& a, const Image& b, const EvalProtocol& protocol) {
  CheckSameExtents(a, b);
  protocol.Validate(a.width, a.height);
  if (protocol.channel == EvalChannel::kY) {
    return Psnr(LumaPlane(a), LumaPlane(b), protocol.shave, protocol.peak);
  }
  double sse = 0;
  for (int c = 0; c < a.channels; ++c) sse += SumSquaredError(ChannelPlane(a, c), ChannelPlane(b, c), protocol.shave);
  const double n = static_cast<double>(a.width - 2 * protocol.shave) * (a.height - 2 * protocol.shave) * a.channels;
  return PsnrFromMse(sse / n, protocol.peak);
}

double Ssim(const Plane& a_full, const Plane& b_full, int shave, double peak) {
  CheckSameExtents(a_full, b_full);
  EvalProtocol{EvalChannel::kY, shave, peak}.Validate(a_full.width, a_full.height);
  constexpr int kWindow = 11;
  const Plane a = Shaved(a_full, shave);
  const Plane b = Shaved(b_full, shave);
  if (a.width < kWindow || a.height < kWindow) {
    throw MismatchError("SSIM needs at least 11x11 pixels after shaving, got " + std::to_string(a.width) + "x" +
                        std::to_string(a.height));
  }
  // The 2-D window is the outer product of this 1-D factor.
  const auto g = Gaussian1d(kWindow, 1.5);

  Plane aa = a, bb = b, ab = a;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    aa.data[i] = a.data[i] * a.data[i];
    bb.data[i] = b.data[i] * b.data[i];
    ab.data[i] = a.data[i] * b.data[i];
  }
  const Plane mu_a = FilterValid(a, g);
  const Plane mu_b = FilterValid(b, g);
  const Plane e_aa = FilterValid(aa, g);
  const Plane e_bb = FilterValid(bb, g);
  const Plane e_ab = FilterValid(ab, g);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
    const double ma = mu_a.data[i];
    const double mb = mu_b.data[i];
    const double va = e_aa.data[i] - ma * ma;
    const double vb = e_bb.data[i] - mb * mb;
    const double cov = e_ab.data[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.data.size());
}

double Ssim(const Image& a, const Image& b, const EvalProtocol& protocol) {
  CheckSameExtents(a, b);
  return Ssim(LumaPlane(a), LumaPlane(b), protocol.shave, protocol.peak);
}

// ---------------------------------------------------------------------------
// Benchmarks

std::vector<std::string> PngStems(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

BenchmarkReport EvaluateBenchmark(const std::string& hr_dir, int scale, const EvalProtocol& protocol,
                                  const std::string& mode, const SrProducer& produce) {
  if (scale < 1) throw UsageError("scale must be positive");
  BenchmarkReport report;
  report.mode = mode;
  report.scale = scale;
  report.protocol = protocol;
  const auto stems = PngStems(hr_dir);
  report.rows.resize(stems.size());
  ParallelFor(static_cast<std::int64_t>(stems.size()), [&](std::int64_t i) {
    const auto& stem = stems[static_cast<std::size_t>(i)];
    const Image hr = Modcrop(LoadPng(hr_dir + "/" + stem + ".png"), scale);
    const Image sr = produce(hr, stem);
    if (sr.width != hr.width || sr.height != hr.height || sr.channels != hr.channels) {
      throw MismatchError(stem + ": estimate is " + std::to_string(sr.width) + "x" + std::to_string(sr.height) +
                          "x" + std::to_string(sr.channels) + ", modcropped ground truth is " +
                          std::to_string(hr.width) + "x" + std::to_string(hr.height) + "x" +
                          std::to_string(hr.channels));
    }
    report.rows[static_cast<std::size_t>(i)] = {stem, Psnr(sr, hr, protocol), Ssim(sr, hr, protocol)};
  });
  for (const auto& r : report.rows) {
    report.mean_psnr_db += r.psnr_db;
    report.mean_ssim += r.ssim;
  }
  if (!report.rows.empty()) {
    report.mean_psnr_db /= static_cast<double>(report.rows.size());
    report.mean_ssim /= static_cast<double>(report.rows.size());
  }
  return report;
}

Image BicubicBaseline(const Image& hr, int scale) {
  const Image lr = BicubicResize(hr, hr.width / scale, hr.height / scale);
  return BicubicResize(lr, hr.width, hr.height);
}

BenchmarkReport EvaluateBicubic(const std::string& hr_dir, int scale, const EvalProtocol& protocol) {
  return EvaluateBenchmark(hr_dir, scale, protocol, "bicubic",
                           [scale](const Image& hr, const std::string&) { return BicubicBaseline(hr, scale); });
}

BenchmarkReport EvaluateSrDirectory(const std::string& sr_dir, const std::string& hr_dir, int scale,
                                    const EvalProtocol& protocol) {
  // Fail on a missing counterpart before doing any work.
  for (const auto& stem : PngStems(hr_dir)) {
    if (!std::filesystem::exists(sr_dir + "/" + stem + ".png")) {
      throw MismatchError("no SR counterpart for '" + stem + "' in " + sr_dir);
    }
  }
  // Modcropping is a no-op for estimates already at the cropped size.
  return EvaluateBenchmark(hr_dir, scale, protocol, "sr-dir", [&](const Image&, const std::string& stem) {
    return Modcrop(LoadPng(sr_dir + "/" + stem + ".png"), scale);
  });
}

std::string FormatMetric(double value, int decimals) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << value;
  return os.str();
}

std::string ReportCsv(const BenchmarkReport& report) {
  std::ostringstream os;
  os << "# mode=" << report.mode << " scale=" << report.scale << "\n";
  os << "# protocol " << report.protocol.Describe() << "\n";
  os << "image,psnr_db,ssim\n";
  for (const auto& r : report.rows) {
    os << r.image << "," << FormatMetric(r.psnr_db, 4) << "," << FormatMetric(r.ssim, 6) << "\n";
  }
  os << "mean," << FormatMetric(report.mean_psnr_db, 4) << "," << FormatMetric(report.mean_ssim, 6) << "\n";
  return os.str();
}

std::string ReportTable(const BenchmarkReport& report) {
  std::size_t width = 5;
  for (const auto& r : report.rows) width = std::max(width, r.image.size());
  std::ostringstream os;
  os << "mode " << report.mode << ", x" << report.scale << ", " << report.protocol.Describe() << "\n";
  const auto line = [&](const std::string& name, double p, double s) {
    os << name << std::string(width + 2 - name.size(), ' ') << FormatMetric(p, 2) << " dB  "
       << FormatMetric(s, 4) << "\n";
  };
  for (const auto& r : report.rows) line(r.image, r.psnr_db, r.ssim);
  line("mean", report.mean_psnr_db, report.mean_ssim);
  return os.str();
}

}  // namespace srse
