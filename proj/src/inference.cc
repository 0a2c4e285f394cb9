#include "srse/inference.h"

#include "srse/error.h"
#include "srse/train.h"

namespace srse {

namespace {

// (1, C, h, w) on [0, 1] in, (1, C, rh, rw) on [0, 1] out.
TensorF RunNet(const SrSENet<float>& net, const TensorF& lr) {
  Graph<float> g;
  const auto trace = Forward(g, net, lr, BicubicUpsample(lr, net.config.upscale_rate));
  return trace.sr_image.value();
}

TensorF PlanesToTensor(const std::vector<Plane>& planes) {
  const Plane& first = planes.front();
  TensorF t(Shape{1, static_cast<std::int64_t>(planes.size()), first.height, first.width});
  for (std::size_t c = 0; c < planes.size(); ++c) {
    float* dst = t.plane(0, static_cast<std::int64_t>(c));
    for (std::size_t i = 0; i < first.data.size(); ++i) dst[i] = static_cast<float>(planes[c].data[i] / 255.0);
  }
  return t;
}

Plane TensorPlane(const TensorF& t, std::int64_t c) {
  const auto& s = t.shape();
  Plane p(static_cast<int>(s.w), static_cast<int>(s.h));
  const float* src = t.plane(0, c);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = 255.0 * static_cast<double>(src[i]);
  return p;
}

}  // namespace

std::string ChromaPolicy(const SrSENetConfig& config, const Image& lr) {
  if (config.input_channels == 3) return "rgb: all three channels from the network";
  if (lr.channels == 3) return "y: luma from the network, Cb/Cr bicubic-upsampled";
  return "y: single-channel input";
}

Image SuperResolve(const SrSENet<float>& net, const Image& lr) {
  const int ch = net.config.input_channels;
  if (lr.width < 1 || lr.height < 1) throw MismatchError("input image is empty");
  if (ch == 3 && lr.channels != 3) {
    throw MismatchError("checkpoint expects 3-channel RGB input, image has " + std::to_string(lr.channels) +
                        " channel");
  }
  if (lr.channels != 1 && lr.channels != 3) {
    throw MismatchError("unsupported channel count " + std::to_string(lr.channels));
  }
  const int r = net.config.upscale_rate;
  const int w = lr.width * r;
  const int h = lr.height * r;

  if (lr.channels == 1 || ch == 3) {
    std::vector<Plane> planes;
    for (int c = 0; c < lr.channels; ++c) planes.push_back(ChannelPlane(lr, c));
    const TensorF sr = RunNet(net, PlanesToTensor(planes));
    std::vector<Plane> out;
    for (int c = 0; c < lr.channels; ++c) out.push_back(TensorPlane(sr, c));
    return MergeChannels(out, lr.colorspace);
  }

  // Luma network on an RGB image.
  Plane y(lr.width, lr.height), cb(lr.width, lr.height), cr(lr.width, lr.height);
  for (int yy = 0; yy < lr.height; ++yy) {
    for (int x = 0; x < lr.width; ++x) {
      const auto v = RgbToYCbCr(lr.at(x, yy, 0), lr.at(x, yy, 1), lr.at(x, yy, 2));
      y.at(x, yy) = v[0];
      cb.at(x, yy) = v[1];
      cr.at(x, yy) = v[2];
    }
  }
  const Plane sr_y = TensorPlane(RunNet(net, PlanesToTensor({y})), 0);
  const Plane up_cb = BicubicResize(cb, w, h);
  const Plane up_cr = BicubicResize(cr, w, h);
  Image out(w, h, 3, ColorSpace::kSrgb);
  for (int yy = 0; yy < h; ++yy) {
    for (int x = 0; x < w; ++x) {
      const auto rgb = YCbCrToRgb(sr_y.at(x, yy), up_cb.at(x, yy), up_cr.at(x, yy));
      for (int c = 0; c < 3; ++c) out.at(x, yy, c) = RoundToByte(rgb[c]);
    }
  }
  return out;
}

}  // namespace srse
