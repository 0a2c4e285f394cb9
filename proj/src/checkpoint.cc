#include "srse/checkpoint.h"

#include <cstring>
#include <map>
#include <sstream>

#include "binary_io.h"
#include "srse/error.h"

namespace srse {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'S', 'E'};
const std::string kAdamM = "adam.m/";
const std::string kAdamV = "adam.v/";

template <typename T>
void PutTensor(detail::ByteWriter& w, const std::string& name, const Tensor<T>& t) {
  w.put_string(name);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(PrecisionOf<T>()));
  for (auto e : t.shape().extents()) w.put<std::uint64_t>(static_cast<std::uint64_t>(e));
  w.put_bytes(t.data().data(), t.data().size() * sizeof(T));
}

template <typename Stored, typename T>
Tensor<T> ReadScalars(detail::ByteReader& r, const Shape& shape) {
  const auto count = static_cast<std::size_t>(shape.numel());
  const auto* p = r.take(count * sizeof(Stored));
  std::vector<Stored> raw(count);
  std::memcpy(raw.data(), p, count * sizeof(Stored));
  return Tensor<Stored>(shape, std::move(raw)).template cast<T>();
}

struct Header {
  SrSENetConfig config;
  std::uint64_t iteration = 0;
  bool has_adam = false;
  std::int64_t adam_t = 0;
  std::uint32_t entries = 0;
};

Header ReadHeader(detail::ByteReader& r, const std::string& what) {
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError(what + ": not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": checkpoint version " + std::to_string(version) + " but this build reads version " +
                      std::to_string(kCheckpointVersion));
  }
  Header h;
  h.config.depth = static_cast<int>(r.get<std::uint32_t>());
  h.config.width = static_cast<int>(r.get<std::uint32_t>());
  h.config.upscale_rate = static_cast<int>(r.get<std::uint32_t>());
  h.config.reduction_ratio = static_cast<int>(r.get<std::uint32_t>());
  h.config.se_enabled = r.get<std::uint8_t>() != 0;
  h.config.input_channels = static_cast<int>(r.get<std::uint32_t>());
  h.config.leaky_slope = r.get<double>();
  h.iteration = r.get<std::uint64_t>();
  h.has_adam = r.get<std::uint8_t>() != 0;
  h.adam_t = static_cast<std::int64_t>(r.get<std::uint64_t>());
  h.entries = r.get<std::uint32_t>();
  try {
    h.config.Validate();
  } catch (const UsageError& e) {
    throw FormatError(what + ": invalid config block: " + e.what());
  }
  return h;
}

}  // namespace

std::string DescribeConfig(const SrSENetConfig& c) {
  std::ostringstream os;
  os << "depth=" << c.depth << " width=" << c.width << " upscale_rate=" << c.upscale_rate
     << " reduction_ratio=" << c.reduction_ratio << " se=" << (c.se_enabled ? "on" : "off")
     << " input_channels=" << c.input_channels << " leaky_slope=" << c.leaky_slope;
  return os.str();
}

template <typename T>
std::vector<std::uint8_t> SerializeCheckpoint(const SrSENet<T>& net, const AdamState<T>* adam,
                                              std::uint64_t iteration) {
  const auto params = net.Parameters();
  if (adam && (adam->m.size() != params.size() || adam->v.size() != params.size())) {
    throw MismatchError("optimizer state does not match the network parameters");
  }
  const auto& c = net.config;
  detail::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.depth));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.upscale_rate));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.reduction_ratio));
  w.put<std::uint8_t>(c.se_enabled ? 1 : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.input_channels));
  w.put<double>(c.leaky_slope);
  w.put<std::uint64_t>(iteration);
  w.put<std::uint8_t>(adam ? 1 : 0);
  w.put<std::uint64_t>(adam ? static_cast<std::uint64_t>(adam->t) : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size() * (adam ? 3 : 1)));
  for (const auto& p : params) PutTensor(w, p.name, *p.tensor);
  if (adam) {
    for (std::size_t i = 0; i < params.size(); ++i) PutTensor(w, kAdamM + params[i].name, adam->m[i]);
    for (std::size_t i = 0; i < params.size(); ++i) PutTensor(w, kAdamV + params[i].name, adam->v[i]);
  }
  return w.bytes();
}

template <typename T>
void SaveCheckpoint(const std::string& path, const SrSENet<T>& net, const AdamState<T>* adam,
                    std::uint64_t iteration) {
  detail::WriteFileBytes(path, SerializeCheckpoint(net, adam, iteration));
}

template <typename T>
Checkpoint<T> ParseCheckpoint(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  detail::ByteReader r(bytes, what);
  const Header h = ReadHeader(r, what);

  // Fill a fresh network so that a failure leaves nothing half-loaded.
  Checkpoint<T> ck;
  ck.net = BuildSrSENet<T>(h.config, 0);
  ck.iteration = h.iteration;
  auto params = ck.net.Parameters();
  std::vector<Shape> shapes;
  std::map<std::string, Tensor<T>*> slots;
  for (const auto& p : params) {
    slots[p.name] = p.tensor;
    shapes.push_back(p.tensor->shape());
  }
  if (h.has_adam) {
    ck.adam = AdamState<T>::Zeros(shapes);
    ck.adam->t = h.adam_t;
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots[kAdamM + params[i].name] = &ck.adam->m[i];
      slots[kAdamV + params[i].name] = &ck.adam->v[i];
    }
  }
  if (h.entries != slots.size()) {
    throw FormatError(what + ": " + std::to_string(h.entries) + " tensor entries, expected " +
                      std::to_string(slots.size()) + " for " + DescribeConfig(h.config));
  }
  std::map<std::string, bool> seen;
  for (std::uint32_t e = 0; e < h.entries; ++e) {
    const std::string name = r.get_string();
    const auto it = slots.find(name);
    if (it == slots.end()) throw FormatError(what + ": unknown tensor name '" + name + "'");
    if (seen[name]) throw FormatError(what + ": duplicate tensor '" + name + "'");
    seen[name] = true;
    const auto tag = r.get<std::uint8_t>();
    std::array<std::int64_t, 4> ext{};
    for (auto& x : ext) {
      const auto v = r.get<std::uint64_t>();
      if (v > (1u << 30)) throw FormatError(what + ": implausible extent in '" + name + "'");
      x = static_cast<std::int64_t>(v);
    }
    const Shape shape{ext[0], ext[1], ext[2], ext[3]};
    if (shape != it->second->shape()) {
      throw FormatError(what + ": tensor '" + name + "' has shape " + shape.str() + ", expected " +
                        it->second->shape().str());
    }
    if (tag == static_cast<std::uint8_t>(Precision::kSingle)) {
      *it->second = ReadScalars<float, T>(r, shape);
    } else if (tag == static_cast<std::uint8_t>(Precision::kDouble)) {
      *it->second = ReadScalars<double, T>(r, shape);
    } else {
      throw FormatError(what + ": unknown precision tag " + std::to_string(tag) + " for '" + name + "'");
    }
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after the last tensor");
  return ck;
}

template <typename T>
Checkpoint<T> LoadCheckpoint(const std::string& path) {
  return ParseCheckpoint<T>(detail::ReadFileBytes(path), path);
}

std::size_t CheckpointEntryCount(const std::string& path) {
  detail::ByteReader r(detail::ReadFileBytes(path), path);
  return ReadHeader(r, path).entries;
}

#define SRSE_INSTANTIATE_CHECKPOINT(T)                                                                       \
  template std::vector<std::uint8_t> SerializeCheckpoint<T>(const SrSENet<T>&, const AdamState<T>*,          \
                                                            std::uint64_t);                                  \
  template void SaveCheckpoint<T>(const std::string&, const SrSENet<T>&, const AdamState<T>*, std::uint64_t); \
  template Checkpoint<T> ParseCheckpoint<T>(const std::vector<std::uint8_t>&, const std::string&);          \
  template Checkpoint<T> LoadCheckpoint<T>(const std::string&);

SRSE_INSTANTIATE_CHECKPOINT(float)
SRSE_INSTANTIATE_CHECKPOINT(double)

}  // namespace srse
