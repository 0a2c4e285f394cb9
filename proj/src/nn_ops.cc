#include "srse/nn_ops.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "srse/parallel.h"

namespace srse {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatRM<T>>;

// Geometry of one stride/padding window sweep: a (channels, in_h, in_w)
// image against k x k windows producing (out_h, out_w) positions.
struct Window {
  std::int64_t channels;
  std::int64_t in_h, in_w;
  std::int64_t out_h, out_w;
  std::int64_t k, stride, pad;

  std::int64_t rows() const { return channels * k * k; }
  std::int64_t cols() const { return out_h * out_w; }
};

// Unfolds windows into a (C*k*k, out_h*out_w) row-major matrix.
template <typename T>
void Im2Col(const T* image, const Window& g, T* col) {
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const T* plane = image + c * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + iy * g.in_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col: scatters-and-adds columns back into the image.
template <typename T>
void Col2ImAdd(const T* col, const Window& g, T* image) {
  for (std::int64_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * g.cols();
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = row + oy * g.out_w;
          T* dst = plane + iy * g.in_w;
          for (std::int64_t ox = 0; ox < g.out_w; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Adds per-item partial results into acc in batch order.
template <typename T>
void ReduceInto(Tensor<T>& acc, const std::vector<std::vector<T>>& partials) {
  auto d = acc.data();
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += p[i];
  }
}

template <typename T>
void AddBiasGrad(Tensor<T>& acc, const Tensor<T>& gout) {
  const Shape& s = gout.shape();
  for (std::int64_t n = 0; n < s.n; ++n) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const T* p = gout.plane(n, c);
      T sum = 0;
      for (std::int64_t i = 0; i < s.plane(); ++i) sum += p[i];
      acc[c] += sum;
    }
  }
}

void RequireBias(const Shape& bias, std::int64_t channels, const char* op) {
  if (bias != Shape{1, channels, 1, 1}) {
    throw MismatchError(std::string(op) + ": bias " + bias.str() +
                        " does not match " + std::to_string(channels) +
                        " output channels");
  }
}

template <typename T>
void RequireSameGraph(const Var<T>& a, const Var<T>& b, const Var<T>& c,
                      const char* op) {
  if (&a.graph() != &b.graph() || &a.graph() != &c.graph()) {
    throw UsageError(std::string(op) + ": operands from different graphs");
  }
}

}  // namespace

std::int64_t ConvOutputExtent(std::int64_t in, std::int64_t kernel,
                              std::int64_t stride, std::int64_t padding) {
  if (kernel < 1 || stride < 1 || padding < 0) {
    throw UsageError("invalid convolution geometry");
  }
  const std::int64_t span = in + 2 * padding - kernel;
  if (span < 0) {
    throw MismatchError("kernel " + std::to_string(kernel) +
                        " larger than padded input " +
                        std::to_string(in + 2 * padding));
  }
  if (span % stride != 0) {
    throw MismatchError("stride " + std::to_string(stride) +
                        " does not tile padded input of extent " +
                        std::to_string(in + 2 * padding));
  }
  return span / stride + 1;
}

std::int64_t TransposedConvOutputExtent(std::int64_t in, std::int64_t kernel,
                                        std::int64_t stride,
                                        std::int64_t padding) {
  if (stride < 1 || padding < 0 || kernel < stride) {
    throw UsageError("transposed convolution needs kernel >= stride >= 1");
  }
  const std::int64_t out = (in - 1) * stride - 2 * padding + kernel;
  if (in < 1 || out < 1) {
    throw MismatchError("transposed convolution output extent " +
                        std::to_string(out) + " from input " +
                        std::to_string(in));
  }
  return out;
}

template <typename T>
Var<T> Conv2d(Var<T> x, Var<T> weight, Var<T> bias, int stride, int padding) {
  RequireSameGraph(x, weight, bias, "conv2d");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.h != ws.w) throw UsageError("conv2d: kernels must be square");
  if (ws.c != xs.c) {
    throw MismatchError("conv2d: input has " + std::to_string(xs.c) +
                        " channels, weight expects " + std::to_string(ws.c));
  }
  RequireBias(bias.shape(), ws.n, "conv2d");
  const Window win{xs.c,
                   xs.h,
                   xs.w,
                   ConvOutputExtent(xs.h, ws.h, stride, padding),
                   ConvOutputExtent(xs.w, ws.w, stride, padding),
                   ws.h,
                   stride,
                   padding};
  const Shape os{xs.n, ws.n, win.out_h, win.out_w};
  Tensor<T> out(os);
  {
    const Tensor<T>& xv = x.value();
    const ConstMapRM<T> wmat(weight.value().data().data(), ws.n, win.rows());
    const Tensor<T>& bv = bias.value();
    ParallelFor(xs.n, [&](std::int64_t n) {
      std::vector<T> col(static_cast<std::size_t>(win.rows() * win.cols()));
      Im2Col(xv.plane(n, 0), win, col.data());
      MapRM<T> y(out.plane(n, 0), ws.n, win.cols());
      y.noalias() = wmat * ConstMapRM<T>(col.data(), win.rows(), win.cols());
      for (std::int64_t c = 0; c < ws.n; ++c) y.row(c).array() += bv[c];
    });
  }

  return x.graph().Record(
      "conv2d", std::move(out), {x.id(), weight.id(), bias.id()},
      [ix = x.id(), iw = weight.id(), ib = bias.id(), win](Graph<T>& g,
                                                           std::int32_t self) {
        const Tensor<T>& gout = g.grad(self);
        const Tensor<T>& xv = g.value(ix);
        const Tensor<T>& wv = g.value(iw);
        const std::int64_t batch = xv.shape().n;
        const std::int64_t cout = wv.shape().n;
        const ConstMapRM<T> wmat(wv.data().data(), cout, win.rows());
        Tensor<T>* dx = g.grad_accumulator(ix);
        Tensor<T>* dw = g.grad_accumulator(iw);
        std::vector<std::vector<T>> dw_parts(dw ? static_cast<std::size_t>(batch) : 0);

        ParallelFor(batch, [&](std::int64_t n) {
          const ConstMapRM<T> gmat(gout.plane(n, 0), cout, win.cols());
          std::vector<T> col(static_cast<std::size_t>(win.rows() * win.cols()));
          if (dw) {
            Im2Col(xv.plane(n, 0), win, col.data());
            auto& part = dw_parts[static_cast<std::size_t>(n)];
            part.resize(static_cast<std::size_t>(cout * win.rows()));
            MapRM<T>(part.data(), cout, win.rows()).noalias() =
                gmat * ConstMapRM<T>(col.data(), win.rows(), win.cols()).transpose();
          }
          if (dx) {
            MapRM<T>(col.data(), win.rows(), win.cols()).noalias() =
                wmat.transpose() * gmat;
            Col2ImAdd(col.data(), win, dx->plane(n, 0));
          }
        });
        if (dw) ReduceInto(*dw, dw_parts);
        if (Tensor<T>* db = g.grad_accumulator(ib)) AddBiasGrad(*db, gout);
      });
}

template <typename T>
Var<T> ConvTranspose2d(Var<T> x, Var<T> weight, Var<T> bias, int stride,
                       int padding) {
  RequireSameGraph(x, weight, bias, "conv_transpose2d");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.h != ws.w) throw UsageError("conv_transpose2d: kernels must be square");
  if (ws.n != xs.c) {
    throw MismatchError("conv_transpose2d: input has " + std::to_string(xs.c) +
                        " channels, weight expects " + std::to_string(ws.n));
  }
  RequireBias(bias.shape(), ws.c, "conv_transpose2d");
  const std::int64_t out_h = TransposedConvOutputExtent(xs.h, ws.h, stride, padding);
  const std::int64_t out_w = TransposedConvOutputExtent(xs.w, ws.w, stride, padding);
  // The equivalent forward convolution maps the (C_out, out_h, out_w) output
  // back onto the (C_in, H, W) input; this op is its transpose.
  const Window win{ws.c, out_h, out_w, xs.h, xs.w, ws.h, stride, padding};
  const Shape os{xs.n, ws.c, out_h, out_w};
  Tensor<T> out(os);
  {
    const Tensor<T>& xv = x.value();
    const ConstMapRM<T> wmat(weight.value().data().data(), ws.n, win.rows());
    const Tensor<T>& bv = bias.value();
    ParallelFor(xs.n, [&](std::int64_t n) {
      std::vector<T> col(static_cast<std::size_t>(win.rows() * win.cols()));
      MapRM<T>(col.data(), win.rows(), win.cols()).noalias() =
          wmat.transpose() * ConstMapRM<T>(xv.plane(n, 0), xs.c, win.cols());
      Col2ImAdd(col.data(), win, out.plane(n, 0));
      for (std::int64_t c = 0; c < ws.c; ++c) {
        T* p = out.plane(n, c);
        for (std::int64_t i = 0; i < out_h * out_w; ++i) p[i] += bv[c];
      }
    });
  }

  return x.graph().Record(
      "conv_transpose2d", std::move(out), {x.id(), weight.id(), bias.id()},
      [ix = x.id(), iw = weight.id(), ib = bias.id(), win](Graph<T>& g,
                                                           std::int32_t self) {
        const Tensor<T>& gout = g.grad(self);
        const Tensor<T>& xv = g.value(ix);
        const Tensor<T>& wv = g.value(iw);
        const std::int64_t batch = xv.shape().n;
        const std::int64_t cin = wv.shape().n;
        const ConstMapRM<T> wmat(wv.data().data(), cin, win.rows());
        Tensor<T>* dx = g.grad_accumulator(ix);
        Tensor<T>* dw = g.grad_accumulator(iw);
        std::vector<std::vector<T>> dw_parts(dw ? static_cast<std::size_t>(batch) : 0);

        ParallelFor(batch, [&](std::int64_t n) {
          std::vector<T> col(static_cast<std::size_t>(win.rows() * win.cols()));
          Im2Col(gout.plane(n, 0), win, col.data());
          const ConstMapRM<T> gcol(col.data(), win.rows(), win.cols());
          if (dx) {
            MapRM<T>(dx->plane(n, 0), cin, win.cols()).noalias() += wmat * gcol;
          }
          if (dw) {
            auto& part = dw_parts[static_cast<std::size_t>(n)];
            part.resize(static_cast<std::size_t>(cin * win.rows()));
            MapRM<T>(part.data(), cin, win.rows()).noalias() =
                ConstMapRM<T>(xv.plane(n, 0), cin, win.cols()) * gcol.transpose();
          }
        });
        if (dw) ReduceInto(*dw, dw_parts);
        if (Tensor<T>* db = g.grad_accumulator(ib)) AddBiasGrad(*db, gout);
      });
}

template <typename T>
Var<T> LeakyRelu(Var<T> x, T slope) {
  if (!(slope >= T(0) && slope < T(1))) {
    throw UsageError("leaky_relu slope must lie in [0, 1)");
  }
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v = v >= T(0) ? v : slope * v;
  return x.graph().Record(
      "leaky_relu", std::move(out), {x.id()},
      [ix = x.id(), slope](Graph<T>& g, std::int32_t self) {
        Tensor<T>* dx = g.grad_accumulator(ix);
        if (!dx) return;
        const auto gout = g.grad(self).data();
        const auto xv = g.value(ix).data();
        auto d = dx->data();
        for (std::size_t i = 0; i < d.size(); ++i) {
          d[i] += xv[i] >= T(0) ? gout[i] : slope * gout[i];
        }
      });
}

template <typename T>
Var<T> GlobalAvgPool(Var<T> x) {
  const Shape xs = x.shape();
  if (xs.plane() < 1) throw UsageError("global_avg_pool on empty planes");
  Tensor<T> out(Shape{xs.n, xs.c, 1, 1});
  const T inv = T(1) / static_cast<T>(xs.plane());
  for (std::int64_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const T* p = x.value().data().data() + nc * xs.plane();
    T sum = 0;
    for (std::int64_t i = 0; i < xs.plane(); ++i) sum += p[i];
    out[nc] = sum * inv;
  }
  return x.graph().Record(
      "global_avg_pool", std::move(out), {x.id()},
      [ix = x.id(), plane = xs.plane(), inv](Graph<T>& g, std::int32_t self) {
        Tensor<T>* dx = g.grad_accumulator(ix);
        if (!dx) return;
        const Tensor<T>& gout = g.grad(self);
        for (std::int64_t nc = 0; nc < gout.numel(); ++nc) {
          const T share = gout[nc] * inv;
          T* d = dx->data().data() + nc * plane;
          for (std::int64_t i = 0; i < plane; ++i) d[i] += share;
        }
      });
}

template <typename T>
Var<T> Dense(Var<T> x, Var<T> weight, Var<T> bias) {
  RequireSameGraph(x, weight, bias, "dense");
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (xs.h != 1 || xs.w != 1) {
    throw MismatchError("dense: expects (N, C, 1, 1) input, got " + xs.str());
  }
  if (ws.n != 1 || ws.h != 1 || ws.w != xs.c) {
    throw MismatchError("dense: weight " + ws.str() + " does not accept " +
                        std::to_string(xs.c) + " inputs");
  }
  const std::int64_t cout = ws.c;
  const std::int64_t cin = ws.w;
  RequireBias(bias.shape(), cout, "dense");
  Tensor<T> out(Shape{xs.n, cout, 1, 1});
  const Tensor<T>& wv = weight.value();
  for (std::int64_t n = 0; n < xs.n; ++n) {
    for (std::int64_t o = 0; o < cout; ++o) {
      T acc = bias.value()[o];
      for (std::int64_t i = 0; i < cin; ++i) acc += wv[o * cin + i] * x.value()[n * cin + i];
      out[n * cout + o] = acc;
    }
  }
  return x.graph().Record(
      "dense", std::move(out), {x.id(), weight.id(), bias.id()},
      [ix = x.id(), iw = weight.id(), ib = bias.id(), cin, cout](
          Graph<T>& g, std::int32_t self) {
        const Tensor<T>& gout = g.grad(self);
        const Tensor<T>& xv = g.value(ix);
        const Tensor<T>& wv = g.value(iw);
        const std::int64_t batch = xv.shape().n;
        if (Tensor<T>* dx = g.grad_accumulator(ix)) {
          for (std::int64_t n = 0; n < batch; ++n) {
            for (std::int64_t i = 0; i < cin; ++i) {
              T acc = 0;
              for (std::int64_t o = 0; o < cout; ++o) acc += wv[o * cin + i] * gout[n * cout + o];
              (*dx)[n * cin + i] += acc;
            }
          }
        }
        if (Tensor<T>* dw = g.grad_accumulator(iw)) {
          for (std::int64_t n = 0; n < batch; ++n) {
            for (std::int64_t o = 0; o < cout; ++o) {
              const T go = gout[n * cout + o];
              for (std::int64_t i = 0; i < cin; ++i) (*dw)[o * cin + i] += go * xv[n * cin + i];
            }
          }
        }
        if (Tensor<T>* db = g.grad_accumulator(ib)) {
          for (std::int64_t n = 0; n < batch; ++n) {
            for (std::int64_t o = 0; o < cout; ++o) (*db)[o] += gout[n * cout + o];
          }
        }
      });
}

template <typename T>
Var<T> Sigmoid(Var<T> x) {
  // Outputs stay strictly inside (0, 1) even where the exact value rounds to
  // an endpoint.
  constexpr T kLow = std::numeric_limits<T>::min();
  constexpr T kHigh = T(1) - std::numeric_limits<T>::epsilon() / T(2);
  Tensor<T> out = x.value();
  for (auto& v : out.data()) {
    // Split by sign so exp never overflows.
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
    v = std::clamp(v, kLow, kHigh);
  }
  const Var<T> result = x.graph().Record(
      "sigmoid", std::move(out), {x.id()},
      [ix = x.id()](Graph<T>& g, std::int32_t self) {
        Tensor<T>* dx = g.grad_accumulator(ix);
        if (!dx) return;
        const auto gout = g.grad(self).data();
        const auto y = g.value(self).data();
        auto d = dx->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i] * y[i] * (T(1) - y[i]);
      });
  return result;
}

#define SRSE_INSTANTIATE(T)                                              \
  template Var<T> Conv2d<T>(Var<T>, Var<T>, Var<T>, int, int);           \
  template Var<T> ConvTranspose2d<T>(Var<T>, Var<T>, Var<T>, int, int);  \
  template Var<T> LeakyRelu<T>(Var<T>, T);                               \
  template Var<T> GlobalAvgPool<T>(Var<T>);                              \
  template Var<T> Dense<T>(Var<T>, Var<T>, Var<T>);                      \
  template Var<T> Sigmoid<T>(Var<T>);

SRSE_INSTANTIATE(float)
SRSE_INSTANTIATE(double)
#undef SRSE_INSTANTIATE

}  // namespace srse
