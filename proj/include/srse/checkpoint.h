#pragma once

// Binary checkpoint: "SRSE", u32 version, model config, iteration counter,
// optimizer step, then named tensors (u32 name length, name, u8 precision
// tag, 4 x u64 extents, raw little-endian scalars). Adam moments, when
// present, are stored as "adam.m/<name>" and "adam.v/<name>".

#include <cstdint>
#include <optional>
#include <string>

#include "srse/model.h"
#include "srse/optim.h"

namespace srse {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  SrSENet<T> net;
  std::optional<AdamState<T>> adam;
  std::uint64_t iteration = 0;
};

template <typename T>
std::vector<std::uint8_t> SerializeCheckpoint(const SrSENet<T>& net, const AdamState<T>* adam,
                                              std::uint64_t iteration);
template <typename T>
void SaveCheckpoint(const std::string& path, const SrSENet<T>& net, const AdamState<T>* adam = nullptr,
                    std::uint64_t iteration = 0);

// Throws FormatError on a bad magic number, a version mismatch (naming both
// versions), truncation, unknown or missing tensor names and shape
// disagreements. Tensors stored at the other precision are converted.
template <typename T>
Checkpoint<T> LoadCheckpoint(const std::string& path);
template <typename T>
Checkpoint<T> ParseCheckpoint(const std::vector<std::uint8_t>& bytes, const std::string& what);

// Number of named tensor entries in a checkpoint file.
std::size_t CheckpointEntryCount(const std::string& path);

std::string DescribeConfig(const SrSENetConfig& config);

}  // namespace srse
