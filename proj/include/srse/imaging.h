#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "srse/tensor.h"

namespace srse {

enum class ColorSpace { kSrgb, kY, kYCbCr };

std::string ColorSpaceName(ColorSpace space);

// 8-bit image, row-major, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  ColorSpace colorspace = ColorSpace::kY;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int width, int height, int channels, ColorSpace space, std::uint8_t fill = 0);

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  bool operator==(const Image&) const = default;
};

// One channel of floating-point samples on the [0, 255] scale.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int width, int height, double fill = 0.0)
      : width(width), height(height), data(static_cast<std::size_t>(width) * height, fill) {}
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Matlab's round(): half away from zero, then saturate to [0, 255].
std::uint8_t RoundToByte(double v);

// Reads 8-bit gray or RGB (palette expanded, alpha dropped). 16-bit files
// throw FormatError.
Image LoadPng(const std::string& path);
void SavePng(const Image& image, const std::string& path);

// BT.601 studio swing on [0, 255] samples.
std::array<double, 3> RgbToYCbCr(double r, double g, double b);
std::array<double, 3> YCbCrToRgb(double y, double cb, double cr);
Image RgbToYCbCr(const Image& rgb);
Image YCbCrToRgb(const Image& ycbcr);

Plane ChannelPlane(const Image& image, int channel);
Image PlaneToImage(const Plane& plane, ColorSpace space = ColorSpace::kY);
Image MergeChannels(const std::vector<Plane>& planes, ColorSpace space);
// Unrounded luma of an sRGB image, or the single channel of a Y image.
Plane LumaPlane(const Image& image);

// Keys cubic kernel, a = -0.5.
double CubicKernel(double x);

// One output sample's taps along one axis.
struct ResampleTaps {
  std::vector<int> index;
  std::vector<double> weight;
};

// Matlab imresize contributions: source u = x/scale + 0.5(1 - 1/scale) in
// 1-based coordinates, kernel stretched by 1/scale on downscale, weights
// normalized per output, symmetric border mirroring, all-zero columns dropped.
std::vector<ResampleTaps> ResampleWeights(int in_length, int out_length, double scale);

// Separable bicubic resize. The byte version rounds after each axis pass, as
// Matlab does for uint8 data; the axis with the smaller scale goes first.
Image BicubicResize(const Image& image, int out_width, int out_height);
Plane BicubicResize(const Plane& plane, int out_width, int out_height);

// Crops bottom/right so both extents divide by r.
Image Modcrop(const Image& image, int r);

struct PatchPair {
  Image hr;
  Image lr;
  int scale = 1;
};

// Regular row-major grid of HR crops; each LR is the bicubic downscale of its
// crop. stride 0 means stride = patch.
std::vector<PatchPair> ExtractPairs(const Image& hr, int r, int patch = 96, int stride = 0);

// Packed patch pairs with random access by index.
struct DatasetPack {
  static constexpr std::uint32_t kVersion = 1;

  int scale = 1;
  int hr_width = 0;
  int hr_height = 0;
  int lr_width = 0;
  int lr_height = 0;
  int channels = 1;
  std::uint64_t count = 0;
  std::vector<std::uint8_t> records;  // per pair: HR bytes then LR bytes

  std::size_t hr_bytes() const { return static_cast<std::size_t>(hr_width) * hr_height * channels; }
  std::size_t lr_bytes() const { return static_cast<std::size_t>(lr_width) * lr_height * channels; }
  Image hr(std::uint64_t i) const;
  Image lr(std::uint64_t i) const;
  bool operator==(const DatasetPack&) const = default;
};

DatasetPack MakeDatasetPack(const std::vector<PatchPair>& pairs, int scale, int channels);
void WriteDatasetPack(const DatasetPack& pack, const std::string& path);
DatasetPack ReadDatasetPack(const std::string& path);

// (1, C, H, W) tensor of samples divided by 255.
template <typename T>
Tensor<T> ImageToTensor(const Image& image);

}  // namespace srse
