#include "srse/imaging.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Dense>

#include "binary_io.h"
#include "srse/error.h"

namespace srse {

std::string ColorSpaceName(ColorSpace space) {
  switch (space) {
    case ColorSpace::kSrgb: return "srgb";
    case ColorSpace::kY: return "y";
    case ColorSpace::kYCbCr: return "ycbcr";
  }
  return "unknown";
}

Image::Image(int width, int height, int channels, ColorSpace space, std::uint8_t fill)
    : width(width), height(height), channels(channels), colorspace(space) {
  if (width < 0 || height < 0) throw UsageError("negative image extent");
  if (channels != 1 && channels != 3) {
    throw UsageError("images have 1 or 3 channels, got " + std::to_string(channels));
  }
  data.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

std::uint8_t RoundToByte(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v + 0.5));
}

// ---------------------------------------------------------------------------
// PNG

Image LoadPng(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string msg = png.message;
    png_image_free(&png);
    // libpng reports a missing file the same way as a corrupt one.
    if (!std::ifstream(path)) throw IoError("cannot open " + path);
    throw FormatError(path + ": " + msg);
  }
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw FormatError(path + ": 16-bit PNG is not supported");
  }
  const bool color = png.format & PNG_FORMAT_FLAG_COLOR;
  const bool alpha = png.format & PNG_FORMAT_FLAG_ALPHA;
  // Read with alpha kept so it can be dropped rather than composited.
  png.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                     : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const int stored = PNG_IMAGE_SAMPLE_CHANNELS(png.format);
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(path + ": " + msg);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), color ? 3 : 1,
            color ? ColorSpace::kSrgb : ColorSpace::kY);
  const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < img.channels; ++c) {
      img.data[i * img.channels + c] = buffer[i * stored + c];
    }
  }
  return img;
}

void SavePng(const Image& image, const std::string& path) {
  if (image.width < 1 || image.height < 1) throw UsageError("cannot save an empty image");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.data.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError(path + ": " + msg);
  }
}

// ---------------------------------------------------------------------------
// Color

namespace {

const Eigen::Matrix3d& ForwardMatrix() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 65.481, 128.553, 24.966,
                                    -37.797, -74.203, 112.0,
                                    112.0, -93.786, -18.214).finished() / 255.0;
  return m;
}

const Eigen::Matrix3d& InverseMatrix() {
  static const Eigen::Matrix3d m = ForwardMatrix().inverse();
  return m;
}

const Eigen::Vector3d kOffset(16.0, 128.0, 128.0);

}  // namespace

std::array<double, 3> RgbToYCbCr(double r, double g, double b) {
  const Eigen::Vector3d v = ForwardMatrix() * Eigen::Vector3d(r, g, b) + kOffset;
  return {v[0], v[1], v[2]};
}

std::array<double, 3> YCbCrToRgb(double y, double cb, double cr) {
  const Eigen::Vector3d v = InverseMatrix() * (Eigen::Vector3d(y, cb, cr) - kOffset);
  return {v[0], v[1], v[2]};
}

namespace {

template <typename F>
Image ConvertPixels(const Image& in, ColorSpace out_space, F&& f) {
  Image out(in.width, in.height, 3, out_space);
  for (std::size_t i = 0; i < in.data.size(); i += 3) {
    const auto v = f(in.data[i], in.data[i + 1], in.data[i + 2]);
    for (int c = 0; c < 3; ++c) out.data[i + c] = RoundToByte(v[c]);
  }
  return out;
}

}  // namespace

Image RgbToYCbCr(const Image& rgb) {
  if (rgb.channels != 3) {
    throw MismatchError("rgb_to_ycbcr needs 3 channels, got " + std::to_string(rgb.channels));
  }
  return ConvertPixels(rgb, ColorSpace::kYCbCr, [](double r, double g, double b) {
    return RgbToYCbCr(r, g, b);
  });
}

Image YCbCrToRgb(const Image& ycbcr) {
  if (ycbcr.channels != 3) {
    throw MismatchError("ycbcr_to_rgb needs 3 channels, got " + std::to_string(ycbcr.channels));
  }
  return ConvertPixels(ycbcr, ColorSpace::kSrgb, [](double y, double cb, double cr) {
    return YCbCrToRgb(y, cb, cr);
  });
}

Plane ChannelPlane(const Image& image, int channel) {
  if (channel < 0 || channel >= image.channels) throw UsageError("channel out of range");
  Plane p(image.width, image.height);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    p.data[i] = image.data[i * image.channels + channel];
  }
  return p;
}

Image PlaneToImage(const Plane& plane, ColorSpace space) {
  Image img(plane.width, plane.height, 1, space);
  for (std::size_t i = 0; i < plane.data.size(); ++i) img.data[i] = RoundToByte(plane.data[i]);
  return img;
}

Image MergeChannels(const std::vector<Plane>& planes, ColorSpace space) {
  if (planes.size() != 1 && planes.size() != 3) throw UsageError("merge needs 1 or 3 planes");
  const int w = planes[0].width;
  const int h = planes[0].height;
  for (const auto& p : planes) {
    if (p.width != w || p.height != h) throw MismatchError("plane extents differ");
  }
  const int c = static_cast<int>(planes.size());
  Image img(w, h, c, space);
  for (std::size_t i = 0; i < planes[0].data.size(); ++i) {
    for (int k = 0; k < c; ++k) img.data[i * c + k] = RoundToByte(planes[k].data[i]);
  }
  return img;
}

Plane LumaPlane(const Image& image) {
  if (image.channels == 1 || image.colorspace == ColorSpace::kYCbCr) return ChannelPlane(image, 0);
  Plane p(image.width, image.height);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const auto* px = &image.data[i * 3];
    p.data[i] = RgbToYCbCr(px[0], px[1], px[2])[0];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Bicubic

double CubicKernel(double x) {
  const double a = std::abs(x);
  const double a2 = a * a;
  const double a3 = a2 * a;
  if (a <= 1.0) return 1.5 * a3 - 2.5 * a2 + 1.0;
  if (a <= 2.0) return -0.5 * a3 + 2.5 * a2 - 4.0 * a + 2.0;
  return 0.0;
}

std::vector<ResampleTaps> ResampleWeights(int in_length, int out_length, double scale) {
  if (in_length < 1 || out_length < 1) throw UsageError("resize extents must be positive");
  const bool stretch = scale < 1.0;
  const double width = stretch ? 4.0 / scale : 4.0;
  const int taps = static_cast<int>(std::ceil(width)) + 2;
  const std::int64_t period = 2 * static_cast<std::int64_t>(in_length);
  std::vector<ResampleTaps> out(static_cast<std::size_t>(out_length));
  std::vector<double> w(static_cast<std::size_t>(taps));
  for (int x = 1; x <= out_length; ++x) {
    const double u = x / scale + 0.5 * (1.0 - 1.0 / scale);
    const double left = std::floor(u - width / 2.0);
    double sum = 0.0;
    for (int j = 0; j < taps; ++j) {
      const double d = u - (left + j);
      w[j] = stretch ? scale * CubicKernel(scale * d) : CubicKernel(d);
      sum += w[j];
    }
    auto& t = out[static_cast<std::size_t>(x - 1)];
    for (int j = 0; j < taps; ++j) {
      if (w[j] == 0.0) continue;
      // Mirror the 1-based index into [0, in_length) with period 2n.
      std::int64_t m = (static_cast<std::int64_t>(left) + j - 1) % period;
      if (m < 0) m += period;
      t.index.push_back(static_cast<int>(m < in_length ? m : period - 1 - m));
      t.weight.push_back(w[j] / sum);
    }
  }
  return out;
}

namespace {

// Buffer of interleaved doubles, (h, w, c).
struct Grid {
  int w;
  int h;
  int c;
  std::vector<double> v;
};

Grid ResizeAxis(const Grid& in, int out_len, bool along_x) {
  const int in_len = along_x ? in.w : in.h;
  const auto taps = ResampleWeights(in_len, out_len, static_cast<double>(out_len) / in_len);
  Grid out{along_x ? out_len : in.w, along_x ? in.h : out_len, in.c, {}};
  out.v.assign(static_cast<std::size_t>(out.w) * out.h * out.c, 0.0);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      const auto& t = taps[static_cast<std::size_t>(along_x ? x : y)];
      for (int ch = 0; ch < in.c; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.index.size(); ++k) {
          const int sx = along_x ? t.index[k] : x;
          const int sy = along_x ? y : t.index[k];
          acc += t.weight[k] * in.v[(static_cast<std::size_t>(sy) * in.w + sx) * in.c + ch];
        }
        out.v[(static_cast<std::size_t>(y) * out.w + x) * out.c + ch] = acc;
      }
    }
  }
  return out;
}

Grid Resize(Grid g, int out_w, int out_h, bool round_each_pass) {
  if (out_w < 1 || out_h < 1) throw UsageError("resize output extents must be at least 1");
  if (g.w < 1 || g.h < 1) throw UsageError("cannot resize an empty image");
  const double sx = static_cast<double>(out_w) / g.w;
  const double sy = static_cast<double>(out_h) / g.h;
  // Smaller scale first; ties resize rows (the vertical axis) first.
  const bool x_first = sx < sy;
  for (int pass = 0; pass < 2; ++pass) {
    const bool along_x = (pass == 0) == x_first;
    g = ResizeAxis(g, along_x ? out_w : out_h, along_x);
    if (round_each_pass) {
      for (double& v : g.v) v = RoundToByte(v);
    }
  }
  return g;
}

}  // namespace

Image BicubicResize(const Image& image, int out_width, int out_height) {
  Grid g{image.width, image.height, image.channels,
         std::vector<double>(image.data.begin(), image.data.end())};
  g = Resize(std::move(g), out_width, out_height, true);
  Image out(out_width, out_height, image.channels, image.colorspace);
  for (std::size_t i = 0; i < g.v.size(); ++i) out.data[i] = static_cast<std::uint8_t>(g.v[i]);
  return out;
}

Plane BicubicResize(const Plane& plane, int out_width, int out_height) {
  Grid g{plane.width, plane.height, 1, plane.data};
  g = Resize(std::move(g), out_width, out_height, false);
  Plane out;
  out.width = out_width;
  out.height = out_height;
  out.data = std::move(g.v);
  return out;
}

// ---------------------------------------------------------------------------
// Cropping and pairs

namespace {

Image Crop(const Image& image, int x0, int y0, int w, int h) {
  Image out(w, h, image.channels, image.colorspace);
  const std::size_t row = static_cast<std::size_t>(w) * image.channels;
  for (int y = 0; y < h; ++y) {
    std::memcpy(&out.data[static_cast<std::size_t>(y) * row], &image.data[image.index(x0, y0 + y)], row);
  }
  return out;
}

}  // namespace

Image Modcrop(const Image& image, int r) {
  if (r < 1) throw UsageError("modcrop factor must be at least 1");
  if (image.width < r || image.height < r) {
    throw MismatchError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                        " is smaller than modcrop factor " + std::to_string(r));
  }
  return Crop(image, 0, 0, image.width - image.width % r, image.height - image.height % r);
}

std::vector<PatchPair> ExtractPairs(const Image& hr, int r, int patch, int stride) {
  if (r < 1 || patch < 1) throw UsageError("scale and patch must be positive");
  if (patch % r != 0) {
    throw UsageError("patch " + std::to_string(patch) + " is not divisible by scale " + std::to_string(r));
  }
  if (stride == 0) stride = patch;
  if (stride < 0) throw UsageError("stride must be positive");
  const Image img = Modcrop(hr, r);
  if (img.width < patch || img.height < patch) {
    throw MismatchError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " is smaller than patch " + std::to_string(patch));
  }
  std::vector<PatchPair> pairs;
  for (int y = 0; y + patch <= img.height; y += stride) {
    for (int x = 0; x + patch <= img.width; x += stride) {
      PatchPair p;
      p.hr = Crop(img, x, y, patch, patch);
      p.lr = BicubicResize(p.hr, patch / r, patch / r);
      p.scale = r;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Dataset pack

namespace {

constexpr char kPackMagic[4] = {'S', 'R', 'D', 'P'};

Image RecordImage(const DatasetPack& d, std::uint64_t i, bool hr_side) {
  if (i >= d.count) {
    throw UsageError("pair index " + std::to_string(i) + " out of range (count " + std::to_string(d.count) + ")");
  }
  const std::size_t record = d.hr_bytes() + d.lr_bytes();
  const std::size_t start = static_cast<std::size_t>(i) * record + (hr_side ? 0 : d.hr_bytes());
  Image img(hr_side ? d.hr_width : d.lr_width, hr_side ? d.hr_height : d.lr_height, d.channels,
            d.channels == 3 ? ColorSpace::kSrgb : ColorSpace::kY);
  std::memcpy(img.data.data(), d.records.data() + start, img.data.size());
  return img;
}

}  // namespace

Image DatasetPack::hr(std::uint64_t i) const { return RecordImage(*this, i, true); }
Image DatasetPack::lr(std::uint64_t i) const { return RecordImage(*this, i, false); }

DatasetPack MakeDatasetPack(const std::vector<PatchPair>& pairs, int scale, int channels) {
  if (scale < 1) throw UsageError("scale must be positive");
  if (channels != 1 && channels != 3) throw UsageError("channels must be 1 or 3");
  DatasetPack d;
  d.scale = scale;
  d.channels = channels;
  d.count = pairs.size();
  if (pairs.empty()) return d;
  d.hr_width = pairs[0].hr.width;
  d.hr_height = pairs[0].hr.height;
  d.lr_width = pairs[0].lr.width;
  d.lr_height = pairs[0].lr.height;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.scale != scale || p.hr.width != d.hr_width || p.hr.height != d.hr_height ||
        p.lr.width != d.lr_width || p.lr.height != d.lr_height || p.hr.channels != channels ||
        p.lr.channels != channels) {
      throw MismatchError("pair " + std::to_string(i) + " differs from the first pair in extents, channels or scale");
    }
    d.records.insert(d.records.end(), p.hr.data.begin(), p.hr.data.end());
    d.records.insert(d.records.end(), p.lr.data.begin(), p.lr.data.end());
  }
  return d;
}

void WriteDatasetPack(const DatasetPack& pack, const std::string& path) {
  if (pack.records.size() != pack.count * (pack.hr_bytes() + pack.lr_bytes())) {
    throw UsageError("dataset pack records do not match its header");
  }
  detail::ByteWriter w;
  w.put_bytes(kPackMagic, 4);
  w.put<std::uint32_t>(DatasetPack::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.scale));
  w.put<std::uint64_t>(pack.count);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.hr_width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.hr_height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.lr_width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.lr_height));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(pack.channels));
  w.put_bytes(pack.records.data(), pack.records.size());
  detail::WriteFileBytes(path, w.bytes());
}

DatasetPack ReadDatasetPack(const std::string& path) {
  detail::ByteReader r(detail::ReadFileBytes(path), path);
  if (std::memcmp(r.take(4), kPackMagic, 4) != 0) throw FormatError(path + ": not a dataset pack (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != DatasetPack::kVersion) {
    throw FormatError(path + ": dataset pack version " + std::to_string(version) + ", expected " +
                      std::to_string(DatasetPack::kVersion));
  }
  DatasetPack d;
  d.scale = static_cast<int>(r.get<std::uint32_t>());
  d.count = r.get<std::uint64_t>();
  d.hr_width = static_cast<int>(r.get<std::uint32_t>());
  d.hr_height = static_cast<int>(r.get<std::uint32_t>());
  d.lr_width = static_cast<int>(r.get<std::uint32_t>());
  d.lr_height = static_cast<int>(r.get<std::uint32_t>());
  d.channels = static_cast<int>(r.get<std::uint32_t>());
  if (d.scale < 1 || (d.channels != 1 && d.channels != 3) ||
      (d.count > 0 && (d.lr_width * d.scale != d.hr_width || d.lr_height * d.scale != d.hr_height))) {
    throw FormatError(path + ": inconsistent dataset pack header");
  }
  const std::size_t record = d.hr_bytes() + d.lr_bytes();
  if (d.count > 0 && (record == 0 || r.remaining() / record < d.count)) {
    throw FormatError(path + ": truncated dataset pack");
  }
  const std::size_t total = static_cast<std::size_t>(d.count) * record;
  if (r.remaining() != total) throw FormatError(path + ": trailing bytes in dataset pack");
  const auto* p = r.take(total);
  d.records.assign(p, p + total);
  return d;
}

template <typename T>
Tensor<T> ImageToTensor(const Image& image) {
  Tensor<T> t(Shape{1, image.channels, image.height, image.width});
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        t.at(0, c, y, x) = static_cast<T>(image.at(x, y, c) / 255.0);
      }
    }
  }
  return t;
}

template Tensor<float> ImageToTensor<float>(const Image&);
template Tensor<double> ImageToTensor<double>(const Image&);

}  // namespace srse
