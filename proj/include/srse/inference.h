#pragma once

#include <string>

#include "srse/imaging.h"
#include "srse/model.h"

namespace srse {

// How the colour channels of an image are treated by SuperResolve; printed
// with every inference run.
std::string ChromaPolicy(const SrSENetConfig& config, const Image& lr);

// Runs the network on an 8-bit image and returns the r-times larger result.
//
// A luma network given an RGB image converts to YCbCr in floating point,
// super-resolves Y, upsamples Cb and Cr bicubically and rounds once after
// converting back. A luma network given a gray image works on it directly.
// An RGB network requires a 3-channel image (MismatchError otherwise).
Image SuperResolve(const SrSENet<float>& net, const Image& lr);

}  // namespace srse
