#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "srse/error.h"
#include "srse/metrics.h"
#include "test_util.h"

using namespace srse;

namespace {

Plane RandomPlane(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 255);
  Plane p(w, h);
  for (auto& v : p.data) v = u(rng);
  return p;
}

Plane Ramp(int w, int h) {
  Plane p(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) p.at(x, y) = 255.0 * x / (w - 1);
  }
  return p;
}

std::map<std::string, double> ReadGolden(const std::string& path) {
  std::ifstream in(path);
  std::map<std::string, double> out;
  std::string key;
  double v;
  while (in >> key >> v) out[key] = v;
  return out;
}

}  // namespace

TEST_CASE("psnr") {
  Plane a(20, 20, 100.0);
  SUBCASE("identical images") { CHECK(std::isinf(Psnr(a, a))); }
  SUBCASE("MSE of one") {
    Plane b(20, 20, 101.0);
    CHECK(std::abs(Psnr(a, b) - 48.131) <= 1e-3);
    CHECK(Psnr(a, b) == doctest::Approx(48.1308036086791).epsilon(1e-12));
  }
  SUBCASE("uniform error of 16 levels") {
    Plane b(20, 20, 116.0);
    CHECK(Psnr(a, b) == doctest::Approx(24.048403955560605).epsilon(1e-12));
  }
  SUBCASE("shave restricts the region") {
    Plane b = a;
    b.at(0, 0) = 0;  // only in the border
    CHECK(std::isinf(Psnr(a, b, 1)));
    CHECK(std::isfinite(Psnr(a, b, 0)));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(Psnr(a, Plane(20, 21)), MismatchError);
    CHECK_THROWS_AS(Psnr(a, a, 10), MismatchError);
    CHECK_THROWS_AS(Psnr(a, a, -1), UsageError);
  }
  SUBCASE("rgb mean pools channels") {
    Image x(8, 8, 3, ColorSpace::kSrgb, 50);
    Image y = x;
    for (std::size_t i = 0; i < y.data.size(); i += 3) y.data[i] = 53;  // MSE 9 on one channel of three
    EvalProtocol p{EvalChannel::kRgbMean, 0, 255};
    CHECK(Psnr(x, y, p) == doctest::Approx(10 * std::log10(255.0 * 255.0 / 3.0)));
  }
}

TEST_CASE("ssim") {
  SUBCASE("identical images give exactly one") {
    auto a = RandomPlane(40, 30, 1);
    CHECK(Ssim(a, a) == 1.0);
    CHECK(Ssim(a, a, 4) == 1.0);
  }
  SUBCASE("constants reduce to the luminance term") {
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double expected = (2 * 100.0 * 110 + c1) / (100.0 * 100 + 110.0 * 110 + c1);
    CHECK(expected == doctest::Approx(0.9954764440915066).epsilon(1e-14));
    CHECK(Ssim(Plane(32, 32, 100.0), Plane(32, 32, 110.0)) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("inverted ramp is anticorrelated") {
    auto a = Ramp(64, 32);
    Plane b = a;
    for (auto& v : b.data) v = 255 - v;
    const double s = Ssim(a, b);
    CHECK(s < 0);
    // Frozen from scikit-image structural_similarity with the same settings.
    CHECK(s == doctest::Approx(-0.07419398287833323).epsilon(1e-9));
  }
  SUBCASE("too small") { CHECK_THROWS_AS(Ssim(Plane(10, 30), Plane(10, 30)), MismatchError); }
}

TEST_CASE("metrics against the offline oracle") {
  const auto golden = ReadGolden("data/metric_golden.txt");
  REQUIRE(golden.count("ssim"));
  const auto a = LoadPng("data/resize_src.png");
  const auto b = LoadPng("data/metric_roundtrip.png");
  EvalProtocol p;
  CHECK(Ssim(a, b, p) == doctest::Approx(golden.at("ssim")).epsilon(1e-10));
  CHECK(Psnr(a, b, p) == doctest::Approx(golden.at("psnr")).epsilon(1e-10));
  // The committed round trip is exactly what the resampler produces.
  CHECK(BicubicResize(BicubicResize(a, 40, 48), 160, 192) == b);
}

TEST_CASE("gaussian window") {
  auto w = GaussianWindow();
  REQUIRE(w.size() == 121);
  double sum = 0;
  for (double v : w) sum += v;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  CHECK(w[60] > w[59]);
  CHECK(w[0] == doctest::Approx(w[120]).epsilon(1e-15));
}

TEST_CASE("protocol") {
  EvalProtocol p{EvalChannel::kY, 4, 255};
  CHECK(p.Describe() == "channel=y shave=4 peak=255 ssim_channel=y");
  CHECK(ParseEvalChannel("rgb") == EvalChannel::kRgbMean);
  CHECK_THROWS_AS(ParseEvalChannel("cb"), UsageError);
  CHECK_THROWS_AS(p.Validate(8, 100), MismatchError);
  CHECK_NOTHROW(p.Validate(9, 100));
}

TEST_CASE("benchmark evaluation") {
  testing::TempDir hr, sr;
  for (int i = 0; i < 3; ++i) {
    std::mt19937_64 rng(40 + i);
    Image img(50 + i, 47, 3, ColorSpace::kSrgb);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() % 256);
    SavePng(img, hr.file("img" + std::to_string(i) + ".png"));
  }
  EvalProtocol p{EvalChannel::kY, 4, 255};

  SUBCASE("ground truth against itself") {
    auto report = EvaluateSrDirectory(hr.path().string(), hr.path().string(), 4, p);
    REQUIRE(report.rows.size() == 3);
    for (const auto& r : report.rows) {
      CHECK(std::isinf(r.psnr_db));
      CHECK(r.ssim == 1.0);
    }
    const auto csv = ReportCsv(report);
    CHECK(csv.find("# protocol channel=y shave=4") != std::string::npos);
    CHECK(csv.find("image,psnr_db,ssim\n") != std::string::npos);
    CHECK(csv.find("img0,inf,1.000000\n") != std::string::npos);
    CHECK(csv.find("mean,inf,1.000000\n") != std::string::npos);
  }
  SUBCASE("missing counterpart names the stem") {
    SavePng(LoadPng(hr.file("img0.png")), sr.file("img0.png"));
    try {
      EvaluateSrDirectory(sr.path().string(), hr.path().string(), 4, p);
      FAIL("expected an error");
    } catch (const MismatchError& e) {
      CHECK(std::string(e.what()).find("img1") != std::string::npos);
    }
  }
  SUBCASE("extent mismatch after modcrop") {
    for (int i = 0; i < 3; ++i) {
      SavePng(Image(40, 40, 3, ColorSpace::kSrgb), sr.file("img" + std::to_string(i) + ".png"));
    }
    CHECK_THROWS_AS(EvaluateSrDirectory(sr.path().string(), hr.path().string(), 4, p), MismatchError);
  }
  SUBCASE("bicubic baseline is deterministic and ordered") {
    auto a = EvaluateBicubic(hr.path().string(), 2, p);
    auto b = EvaluateBicubic(hr.path().string(), 2, p);
    CHECK(ReportCsv(a) == ReportCsv(b));
    REQUIRE(a.rows.size() == 3);
    CHECK(a.rows[0].image == "img0");
    CHECK(a.rows[2].image == "img2");
    double mean = 0;
    for (const auto& r : a.rows) mean += r.psnr_db;
    CHECK(a.mean_psnr_db == doctest::Approx(mean / 3));
  }
}

TEST_CASE("property: PSNR ignores a common offset") {
  for (int t = 0; t < 10; ++t) {
    auto a = RandomPlane(24, 24, 100 + t);
    auto b = RandomPlane(24, 24, 200 + t);
    const double base = Psnr(a, b);
    for (auto& v : a.data) v += 17.25;
    for (auto& v : b.data) v += 17.25;
    CHECK(Psnr(a, b) == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("property: SSIM symmetry and self-similarity") {
  for (int t = 0; t < 10; ++t) {
    auto a = RandomPlane(30 + t, 25, 300 + t);
    auto b = RandomPlane(30 + t, 25, 400 + t);
    CHECK(std::abs(Ssim(a, b) - Ssim(b, a)) <= 1e-12);
    CHECK(Ssim(a, a) == 1.0);
    CHECK(Ssim(a, b) <= 1.0);
    CHECK(Ssim(a, b) >= -1.0);
  }
}

TEST_CASE("property: shave changes PSNR by a bounded amount") {
  // Corrupting only the outer ring moves the unshaved PSNR and leaves the
  // shaved one untouched.
  auto a = RandomPlane(40, 40, 7);
  auto b = a;
  for (int i = 0; i < 40; ++i) b.at(i, 0) += 30;
  for (int i = 0; i < 40; i += 2) b.at(i, 5) += 1;
  const double shaved = Psnr(a, b, 2);
  const double full = Psnr(a, b, 0);
  CHECK(full < shaved);
  const double expected_full = 10 * std::log10(255.0 * 255 * 1600 / (40 * 900.0 + 20));
  CHECK(full == doctest::Approx(expected_full).epsilon(1e-10));
}
