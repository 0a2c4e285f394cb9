#pragma once

// Direct-loop reference kernels used as oracles in tests. They share no code
// with the im2col/GEMM implementation.

#include "srse/tensor.h"

namespace srse::reference {

template <typename T>
Tensor<T> Conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::int64_t k = ws.h;
  const std::int64_t oh = (xs.h + 2 * pad - k) / stride + 1;
  const std::int64_t ow = (xs.w + 2 * pad - k) / stride + 1;
  Tensor<T> y(Shape{xs.n, ws.n, oh, ow});
  for (std::int64_t n = 0; n < xs.n; ++n)
    for (std::int64_t o = 0; o < ws.n; ++o)
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          T acc = b.empty() ? T(0) : b[o];
          for (std::int64_t c = 0; c < xs.c; ++c)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const std::int64_t iy = oy * stride - pad + ky;
                const std::int64_t ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += w.at(o, c, ky, kx) * x.at(n, c, iy, ix);
              }
          y.at(n, o, oy, ox) = acc;
        }
  return y;
}

// Scatter form: every input pixel stamps the kernel onto a stride-spaced grid.
template <typename T>
Tensor<T> ConvTranspose2d(const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& b, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const std::int64_t k = ws.h;
  const std::int64_t oh = (xs.h - 1) * stride - 2 * pad + k;
  const std::int64_t ow = (xs.w - 1) * stride - 2 * pad + k;
  Tensor<T> y(Shape{xs.n, ws.c, oh, ow});
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t o = 0; o < ws.c; ++o)
      for (std::int64_t i = 0; i < oh * ow; ++i) y.plane(n, o)[i] = b.empty() ? T(0) : b[o];
    for (std::int64_t c = 0; c < xs.c; ++c)
      for (std::int64_t iy = 0; iy < xs.h; ++iy)
        for (std::int64_t ix = 0; ix < xs.w; ++ix)
          for (std::int64_t o = 0; o < ws.c; ++o)
            for (std::int64_t ky = 0; ky < k; ++ky)
              for (std::int64_t kx = 0; kx < k; ++kx) {
                const std::int64_t oy = iy * stride - pad + ky;
                const std::int64_t ox = ix * stride - pad + kx;
                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                y.at(n, o, oy, ox) += x.at(n, c, iy, ix) * w.at(c, o, ky, kx);
              }
  }
  return y;
}

template <typename T>
double Dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

}  // namespace srse::reference
