#include "srse/cli.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "binary_io.h"
#include "srse/checkpoint.h"
#include "srse/error.h"
#include "srse/gradient_suite.h"
#include "srse/imaging.h"
#include "srse/inference.h"
#include "srse/metrics.h"
#include "srse/parallel.h"
#include "srse/train.h"

namespace srse {

namespace {

namespace fs = std::filesystem;

std::string ToText(const std::string& v) { return v; }
std::string ToText(bool v) { return v ? "true" : "false"; }
std::string ToText(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
template <typename I>
  requires std::is_integral_v<I>
std::string ToText(I v) {
  return std::to_string(v);
}

// Options of one subcommand, in registration order, for the config echo.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& about)
      : app_(parent.add_subcommand(name, about)) {
    threads_opt_ = Option("threads", threads, "worker threads (results do not depend on it)");
    threads_opt_->check(CLI::PositiveNumber);
    app_->add_option("--config", config_path, "file of key=value lines, overridden by flags");
  }

  template <typename V>
  CLI::Option* Option(const std::string& name, V& var, const std::string& about) {
    echo_.emplace_back(name, [&var] { return ToText(var); });
    return app_->add_option("--" + name, var, about)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)
        ->capture_default_str();
  }

  CLI::Option* Flag(const std::string& name, bool& var, const std::string& about) {
    echo_.emplace_back(name, [&var] { return ToText(var); });
    return app_->add_flag("--" + name, var, about)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  void Echo(std::ostream& out) const {
    out << "# resolved config: srse " << app_->get_name() << "\n";
    for (const auto& [name, value] : echo_) out << name << "=" << value() << "\n";
  }

  CLI::App* app() const { return app_; }
  bool chosen() const { return app_->parsed(); }

  int threads = 1;
  std::string config_path;

 private:
  CLI::App* app_;
  CLI::Option* threads_opt_ = nullptr;
  std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

const std::vector<int> kScales{2, 4, 8};

void CheckScale(int scale) {
  if (std::find(kScales.begin(), kScales.end(), scale) == kScales.end()) {
    throw UsageError("unsupported scale " + std::to_string(scale) + "; use 2, 4 or 8");
  }
}

void EnsureDirectory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

void WriteText(const std::string& path, const std::string& text) {
  detail::WriteFileBytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string Extents(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

// The subcommand's long option names, after the subcommand token.
std::vector<std::string> MergeConfigFile(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty() || args[0].empty() || args[0][0] == '-') return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;

  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  const auto bytes = detail::ReadFileBytes(path);
  std::vector<std::string> merged{args[0]};
  for (const auto& [key, value] : ParseConfigText(std::string(bytes.begin(), bytes.end()), path)) {
    if (key == "config") throw UsageError(path + ": a config file cannot name another config file");
    if (key == "help" || sub->get_option_no_throw("--" + key) == nullptr) {
      throw UsageError(path + ": unknown key '" + key + "' for srse " + args[0]);
    }
    // An empty value keeps the default; every default that can be empty is.
    if (!value.empty()) merged.push_back("--" + key + "=" + value);
  }
  // Explicit flags come later and win under TakeLast.
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

// Turns off the backward-corruption hook on scope exit.
struct CorruptionGuard {
  explicit CorruptionGuard(const std::string& op) {
    if (!op.empty()) SetBackwardCorruption(op);
  }
  ~CorruptionGuard() { SetBackwardCorruption(""); }
};

const std::vector<std::string> kCorruptibleOps{
    "add",   "add_broadcast", "scale",      "mul",   "mul_channelwise", "sum",        "conv2d",
    "conv_transpose2d", "leaky_relu", "global_avg_pool", "dense", "sigmoid", "charbonnier"};

}  // namespace

std::vector<std::pair<std::string, std::string>> ParseConfigText(const std::string& text,
                                                                 const std::string& origin) {
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(number) + ": expected key=value, got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError(origin + ":" + std::to_string(number) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Super-resolution toolkit: dataset preparation, training, inference and evaluation.", "srse"};
  app.require_subcommand(1);
  app.footer(
      "Exit status: 0 success, 2 usage error, 3 data mismatch or unreadable input, 4 numeric failure.\n"
      "Every subcommand accepts --config FILE (key=value lines; flags given on the command line win)\n"
      "and --threads N.");

  // degrade
  Command degrade(app, "degrade", "modcrop and bicubic-downscale every PNG in a directory");
  std::string degrade_hr, degrade_out;
  int degrade_scale = 4;
  bool degrade_force = false;
  degrade.Option("hr", degrade_hr, "directory of HR PNGs")->required();
  degrade.Option("out", degrade_out, "output directory for LR PNGs")->required();
  degrade.Option("scale", degrade_scale, "downscale factor: 2, 4 or 8");
  degrade.Flag("force", degrade_force, "overwrite existing files in the output directory");

  // pack
  Command pack(app, "pack", "cut aligned HR/LR patch pairs into a dataset pack");
  std::string pack_hr, pack_out, pack_channels = "y";
  int pack_scale = 4, pack_patch = 96, pack_stride = 0;
  pack.Option("hr", pack_hr, "directory of HR PNGs")->required();
  pack.Option("scale", pack_scale, "upscale rate: 2, 4 or 8");
  pack.Option("patch", pack_patch, "HR patch side");
  pack.Option("stride", pack_stride, "HR patch stride (0: the patch side)");
  pack.Option("out", pack_out, "pack file to write")->required();
  pack.Option("channels", pack_channels, "y (luma) or rgb")->check(CLI::IsMember({"y", "rgb"}));

  // train
  Command train(app, "train", "train a network on a dataset pack");
  TrainConfig tc;
  bool no_se = false;
  train.Option("data", tc.dataset_path, "training pack")->required();
  train.Option("eval-data", tc.eval_dataset_path, "pack scored at each evaluation (default: the training pack)");
  train.Option("scale", tc.upscale_rate, "upscale rate; must match the pack");
  train.Option("iters", tc.iterations, "optimizer steps");
  train.Option("batch", tc.batch_size, "pairs per minibatch");
  train.Option("lr", tc.adam.learning_rate, "Adam learning rate");
  train.Flag("no-se", no_se, "drop the squeeze-and-excitation layers");
  train.Option("seed", tc.seed, "seed for initialization and shuffling");
  train.Option("ckpt", tc.checkpoint_path, "checkpoint file written at intervals and at the end");
  train.Option("curve", tc.curve_path, "CSV of iteration, mean loss and PSNR");
  train.Option("depth", tc.depth, "number of residual blocks");
  train.Option("width", tc.width, "feature channels");
  train.Option("reduction", tc.reduction_ratio, "SE bottleneck reduction ratio");
  train.Option("slope", tc.leaky_slope, "LeakyReLU negative slope");
  train.Option("epsilon", tc.charbonnier_epsilon, "Charbonnier epsilon");
  train.Option("eval-interval", tc.eval_interval, "iterations between evaluations (0: never)");
  train.Option("ckpt-interval", tc.checkpoint_interval, "iterations between checkpoints (0: eval interval)");
  train.Option("max-eval-pairs", tc.max_eval_pairs, "pairs scored at each evaluation");
  train.Option("decay-interval", tc.adam.decay_interval, "iterations between learning-rate decays (0: none)");
  train.Option("decay-factor", tc.adam.decay_factor, "learning-rate multiplier per decay");
  train.Option("clip", tc.adam.max_grad_norm, "global gradient-norm clip (0: none)");

  // sr
  Command sr(app, "sr", "super-resolve one PNG with a checkpoint");
  std::string sr_ckpt, sr_in, sr_out;
  int sr_scale = 0;
  sr.Option("ckpt", sr_ckpt, "checkpoint file")->required();
  sr.Option("in", sr_in, "input PNG")->required();
  sr.Option("out", sr_out, "output PNG")->required();
  sr.Option("scale", sr_scale, "expected upscale rate (0: take it from the checkpoint)");

  // eval
  Command eval(app, "eval", "PSNR/SSIM of SR estimates, a checkpoint or bicubic against HR images");
  std::string eval_sr, eval_hr, eval_ckpt, eval_channel = "y", eval_csv;
  bool eval_bicubic = false;
  int eval_scale = 4, eval_shave = -1;
  eval.Option("sr", eval_sr, "directory of SR PNGs named like the HR ones");
  eval.Flag("bicubic", eval_bicubic, "evaluate the bicubic baseline");
  eval.Option("ckpt", eval_ckpt, "evaluate a checkpoint on bicubic-degraded HR images");
  eval.Option("hr", eval_hr, "directory of HR PNGs")->required();
  eval.Option("scale", eval_scale, "upscale rate: 2, 4 or 8");
  eval.Option("shave", eval_shave, "border pixels excluded (-1: the scale)");
  eval.Option("channel", eval_channel, "y or rgb")->check(CLI::IsMember({"y", "rgb"}));
  eval.Option("csv", eval_csv, "CSV report to write");

  // gradcheck
  Command gradcheck(app, "gradcheck", "finite-difference check of every differentiable op");
  std::uint64_t gc_seed = 1;
  std::string gc_precision = "double", gc_corrupt;
  gradcheck.Option("seed", gc_seed, "seed of the random inputs");
  gradcheck.Option("precision", gc_precision, "arithmetic precision (double)");
  gradcheck.Option("corrupt", gc_corrupt, "")->group("");

  try {
    std::vector<std::string> argv = MergeConfigFile(args, app);
    std::reverse(argv.begin(), argv.end());
    try {
      app.parse(std::move(argv));
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }

    if (degrade.chosen()) {
      CheckScale(degrade_scale);
      SetNumThreads(degrade.threads);
      degrade.Echo(out);
      const auto stems = PngStems(degrade_hr);
      if (stems.empty()) {
        err << "warning: no PNG files in " << degrade_hr << "; nothing written\n";
        return 0;
      }
      EnsureDirectory(degrade_out);
      for (const auto& stem : stems) {
        const std::string target = degrade_out + "/" + stem + ".png";
        if (!degrade_force && fs::exists(target)) {
          throw IoError(target + " already exists; pass --force to overwrite");
        }
      }
      for (const auto& stem : stems) {
        const Image hr = Modcrop(LoadPng(degrade_hr + "/" + stem + ".png"), degrade_scale);
        const Image lr = BicubicResize(hr, hr.width / degrade_scale, hr.height / degrade_scale);
        SavePng(lr, degrade_out + "/" + stem + ".png");
        out << stem << ": " << Extents(hr.width, hr.height) << " -> " << Extents(lr.width, lr.height) << "\n";
      }
      out << "wrote " << stems.size() << " LR images to " << degrade_out << "\n";
      return 0;
    }

    if (pack.chosen()) {
      CheckScale(pack_scale);
      if (pack_patch < 1 || pack_patch % pack_scale != 0) {
        throw UsageError("patch " + std::to_string(pack_patch) + " is not a positive multiple of scale " +
                         std::to_string(pack_scale));
      }
      if (pack_stride < 0) throw UsageError("stride must be non-negative");
      SetNumThreads(pack.threads);
      pack.Echo(out);
      const int channels = pack_channels == "rgb" ? 3 : 1;
      std::vector<PatchPair> pairs;
      for (const auto& stem : PngStems(pack_hr)) {
        Image img = LoadPng(pack_hr + "/" + stem + ".png");
        if (channels == 1) {
          img = PlaneToImage(LumaPlane(img));
        } else if (img.channels != 3) {
          throw MismatchError(stem + ": rgb pack needs 3-channel images, got " + std::to_string(img.channels));
        }
        const Image cropped = Modcrop(img, pack_scale);
        if (cropped.width < pack_patch || cropped.height < pack_patch) {
          err << "warning: " << stem << " (" << Extents(img.width, img.height) << ") is smaller than the patch; skipped\n";
          continue;
        }
        auto cut = ExtractPairs(img, pack_scale, pack_patch, pack_stride);
        std::move(cut.begin(), cut.end(), std::back_inserter(pairs));
      }
      if (pairs.empty()) err << "warning: no pairs extracted\n";
      const DatasetPack packed = MakeDatasetPack(pairs, pack_scale, channels);
      WriteDatasetPack(packed, pack_out);
      out << "packed " << packed.count << " pairs (HR " << Extents(packed.hr_width, packed.hr_height) << ", LR "
          << Extents(packed.lr_width, packed.lr_height) << ", " << pack_channels << ") to " << pack_out << "\n";
      return 0;
    }

    if (train.chosen()) {
      tc.se_enabled = !no_se;
      tc.Validate();
      SetNumThreads(train.threads);
      train.Echo(out);
      const DatasetPack data = ReadDatasetPack(tc.dataset_path);
      const DatasetPack scored = tc.eval_dataset_path.empty() ? data : ReadDatasetPack(tc.eval_dataset_path);
      if (tc.checkpoint_path.empty()) err << "warning: no --ckpt given; trained weights will not be saved\n";
      TrainState state = InitialTrainState(tc, data.channels);
      out << "model: " << DescribeConfig(state.net.config) << " parameters=" << CountParameters(state.net).total()
          << "\n";
      out << "training on " << data.count << " pairs (HR " << Extents(data.hr_width, data.hr_height) << ")\n";
      const TrainResult result = TrainLoop(state, data, scored, tc, &out);
      out << "finished " << result.losses.size() << " iterations";
      if (!result.losses.empty()) out << ", last loss " << FormatMetric(result.losses.back(), 6);
      out << "\n";
      if (!tc.checkpoint_path.empty()) out << "checkpoint: " << tc.checkpoint_path << "\n";
      return 0;
    }

    if (sr.chosen()) {
      SetNumThreads(sr.threads);
      sr.Echo(out);
      const auto ck = LoadCheckpoint<float>(sr_ckpt);
      out << "checkpoint: " << DescribeConfig(ck.net.config) << " iteration=" << ck.iteration << "\n";
      if (sr_scale != 0 && sr_scale != ck.net.config.upscale_rate) {
        throw MismatchError("--scale " + std::to_string(sr_scale) + " conflicts with the checkpoint's upscale rate " +
                            std::to_string(ck.net.config.upscale_rate));
      }
      const Image lr = LoadPng(sr_in);
      const Image result = SuperResolve(ck.net, lr);
      out << "chroma: " << ChromaPolicy(ck.net.config, lr) << "\n";
      SavePng(result, sr_out);
      out << sr_in << " " << Extents(lr.width, lr.height) << " -> " << sr_out << " "
          << Extents(result.width, result.height) << "\n";
      return 0;
    }

    if (eval.chosen()) {
      CheckScale(eval_scale);
      if (eval_shave < 0) eval_shave = eval_scale;
      const int sources = int(!eval_sr.empty()) + int(eval_bicubic) + int(!eval_ckpt.empty());
      if (sources != 1) throw UsageError("give exactly one of --sr DIR, --bicubic or --ckpt FILE");
      SetNumThreads(eval.threads);
      eval.Echo(out);
      const EvalProtocol protocol{ParseEvalChannel(eval_channel), eval_shave, 255.0};
      BenchmarkReport report;
      if (eval_bicubic) {
        report = EvaluateBicubic(eval_hr, eval_scale, protocol);
      } else if (!eval_sr.empty()) {
        report = EvaluateSrDirectory(eval_sr, eval_hr, eval_scale, protocol);
      } else {
        const auto ck = LoadCheckpoint<float>(eval_ckpt);
        if (ck.net.config.upscale_rate != eval_scale) {
          throw MismatchError("checkpoint upscale rate " + std::to_string(ck.net.config.upscale_rate) +
                              " differs from --scale " + std::to_string(eval_scale));
        }
        report = EvaluateBenchmark(eval_hr, eval_scale, protocol, "model", [&](const Image& hr, const std::string&) {
          return SuperResolve(ck.net, BicubicResize(hr, hr.width / eval_scale, hr.height / eval_scale));
        });
      }
      if (report.rows.empty()) err << "warning: no PNG files in " << eval_hr << "\n";
      out << ReportTable(report);
      if (!eval_csv.empty()) WriteText(eval_csv, ReportCsv(report));
      return 0;
    }

    if (gradcheck.chosen()) {
      if (gc_precision != "double") {
        throw UsageError("gradient checks run in double precision only (got '" + gc_precision + "')");
      }
      if (!gc_corrupt.empty() &&
          std::find(kCorruptibleOps.begin(), kCorruptibleOps.end(), gc_corrupt) == kCorruptibleOps.end()) {
        throw UsageError("unknown op '" + gc_corrupt + "' for --corrupt");
      }
      SetNumThreads(gradcheck.threads);
      gradcheck.Echo(out);
      CorruptionGuard guard(gc_corrupt);
      const SuiteReport report = RunGradientSuite(gc_seed);
      out << report.Text();
      if (!report.passed()) {
        std::string names;
        for (const auto& f : report.failures()) names += (names.empty() ? "" : ", ") + f;
        throw NumericError("gradient check failed for: " + names);
      }
      return 0;
    }
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace srse
