#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "srse/error.h"

namespace srse {

enum class Precision : std::uint8_t { kSingle = 0, kDouble = 1 };

template <typename T>
constexpr Precision PrecisionOf() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "tensors hold float or double");
  return std::is_same_v<T, float> ? Precision::kSingle : Precision::kDouble;
}

// Extents of a rank-4 NCHW tensor.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  constexpr std::int64_t numel() const { return n * c * h * w; }
  constexpr std::int64_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::array<std::int64_t, 4> extents() const { return {n, c, h, w}; }

  std::string str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
  }
};

inline void ValidateShape(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw UsageError("negative tensor extent in " + s.str());
  }
  // Zero extents are reserved for the empty tensor, which is all zeros.
  const bool any_zero = s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0;
  const bool all_zero = s.n == 0 && s.c == 0 && s.h == 0 && s.w == 0;
  if (any_zero && !all_zero) {
    throw UsageError("zero extent in non-empty tensor shape " + s.str());
  }
}

// Dense NCHW array, row-major with W innermost. Plain value type: copies are
// deep and no graph identity is attached (see Graph / Var for tracking).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(const Shape& shape, T fill = T(0)) : shape_(shape) {
    ValidateShape(shape);
    data_.assign(static_cast<std::size_t>(shape.numel()), fill);
  }

  Tensor(const Shape& shape, std::vector<T> buffer)
      : shape_(shape), data_(std::move(buffer)) {
    ValidateShape(shape);
    if (static_cast<std::int64_t>(data_.size()) != shape.numel()) {
      throw UsageError("buffer of length " + std::to_string(data_.size()) +
                       " does not fill shape " + shape.str());
    }
  }

  static Tensor Scalar(T v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return data_.empty(); }
  static constexpr Precision precision() { return PrecisionOf<T>(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t y,
                      std::int64_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(offset(n, c, y, x))];
  }
  const T& at(std::int64_t n, std::int64_t c, std::int64_t y,
              std::int64_t x) const {
    return data_[static_cast<std::size_t>(offset(n, c, y, x))];
  }

  // Pointer to the (n, c) plane.
  T* plane(std::int64_t n, std::int64_t c) {
    return data_.data() + offset(n, c, 0, 0);
  }
  const T* plane(std::int64_t n, std::int64_t c) const {
    return data_.data() + offset(n, c, 0, 0);
  }

  T item() const {
    if (numel() != 1) {
      throw UsageError("item() on tensor of shape " + shape_.str());
    }
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace srse
