#include "srse/autodiff.h"

#include <utility>

namespace srse {
namespace {

struct Corruption {
  std::string op;
  double factor = 1.0;
};

Corruption& BackwardCorruption() {
  static Corruption c;
  return c;
}

}  // namespace

void SetBackwardCorruption(std::string op, double factor) {
  BackwardCorruption() = Corruption{std::move(op), factor};
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw UsageError("node id " + std::to_string(id) + " is not in this graph");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

template <typename T>
typename Graph<T>::Node& Graph<T>::node(std::int32_t id) {
  return const_cast<Node&>(std::as_const(*this).node(id));
}

template <typename T>
Var<T> Graph<T>::AddLeaf(NodeKind kind, Tensor<T> value, std::string label) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError("non-finite value in leaf '" + label + "'");
  }
  Node n;
  n.kind = kind;
  n.label = std::move(label);
  n.value = std::move(value);
  n.requires_grad = kind != NodeKind::kConstant;
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
  if (kind == NodeKind::kParameter) parameters_.push_back(id);
  return Var<T>(this, id);
}

template <typename T>
Var<T> Graph<T>::Constant(Tensor<T> value) {
  return AddLeaf(NodeKind::kConstant, std::move(value), "constant");
}

template <typename T>
Var<T> Graph<T>::Variable(Tensor<T> value) {
  return AddLeaf(NodeKind::kVariable, std::move(value), "variable");
}

template <typename T>
Var<T> Graph<T>::Parameter(Tensor<T> value, std::string name) {
  return AddLeaf(NodeKind::kParameter, std::move(value),
                 name.empty() ? std::string("parameter") : std::move(name));
}

template <typename T>
Var<T> Graph<T>::Record(std::string_view op, Tensor<T> value,
                        std::vector<std::int32_t> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (auto in : inputs) needs_grad = needs_grad || node(in).requires_grad;
  if (check_finite_ && !value.all_finite()) {
    throw NumericError("non-finite output from op '" + std::string(op) + "'");
  }
  Node n;
  n.kind = NodeKind::kOp;
  n.label = std::string(op);
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.requires_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

template <typename T>
Tensor<T>* Graph<T>::grad_accumulator(std::int32_t id) {
  Node& n = node(id);
  if (!n.requires_grad) return nullptr;
  if (n.grad.shape() != n.value.shape() || n.grad.empty()) {
    n.grad = Tensor<T>(n.value.shape(), T(0));
  }
  return &n.grad;
}

template <typename T>
void Graph<T>::Backward(Var<T> loss) {
  if (&loss.graph() != this) throw UsageError("loss is not in this graph");
  const Shape scalar{1, 1, 1, 1};
  if (loss.shape() != scalar) {
    throw UsageError("backward needs a scalar loss, got " + loss.shape().str());
  }
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (!node(loss.id()).requires_grad) return;
  *grad_accumulator(loss.id()) = Tensor<T>::Scalar(T(1));

  for (std::int32_t id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.kind != NodeKind::kOp || n.grad.empty()) continue;
    if (const Corruption& c = BackwardCorruption();
        !c.op.empty() && c.op == n.label) {
      for (auto& v : n.grad.data()) v = static_cast<T>(v * c.factor);
    }
    n.backward(*this, id);
    if (check_finite_) {
      for (auto in : n.inputs) {
        const Node& src = node(in);
        if (!src.grad.empty() && !src.grad.all_finite()) {
          throw NumericError("non-finite gradient out of op '" + n.label + "'");
        }
      }
    }
    n.grad = Tensor<T>();
  }
}

template <typename T>
void Graph<T>::Clear() {
  nodes_.clear();
  parameters_.clear();
}

namespace {

template <typename T>
void RequireSameShape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.graph() != &b.graph()) {
    throw UsageError(std::string(op) + ": operands from different graphs");
  }
  if (a.shape() != b.shape()) {
    throw MismatchError(std::string(op) + ": shape " + a.shape().str() +
                        " vs " + b.shape().str());
  }
}

bool IsChannelVectorOf(const Shape& b, const Shape& a) {
  return b.n == a.n && b.c == a.c && b.h == 1 && b.w == 1;
}

}  // namespace

template <typename T>
Var<T> Add(Var<T> a, Var<T> b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (&a.graph() != &b.graph()) throw UsageError("add: operands from different graphs");
  Graph<T>& g = a.graph();

  if (sa == sb) {
    Tensor<T> out = a.value();
    const auto bv = b.value().data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    return g.Record("add", std::move(out), {a.id(), b.id()},
                    [ia = a.id(), ib = b.id()](Graph<T>& gr, std::int32_t self) {
                      const auto gout = gr.grad(self).data();
                      for (auto in : {ia, ib}) {
                        if (Tensor<T>* acc = gr.grad_accumulator(in)) {
                          auto d = acc->data();
                          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i];
                        }
                      }
                    });
  }
  if (!IsChannelVectorOf(sb, sa)) {
    throw MismatchError("add: cannot broadcast " + sb.str() + " onto " + sa.str());
  }
  Tensor<T> out = a.value();
  const std::int64_t plane = sa.plane();
  for (std::int64_t nc = 0; nc < sa.n * sa.c; ++nc) {
    const T bias = b.value()[nc];
    T* p = out.data().data() + nc * plane;
    for (std::int64_t i = 0; i < plane; ++i) p[i] += bias;
  }
  return g.Record(
      "add_broadcast", std::move(out), {a.id(), b.id()},
      [ia = a.id(), ib = b.id(), plane](Graph<T>& gr, std::int32_t self) {
        const Tensor<T>& gout = gr.grad(self);
        if (Tensor<T>* acc = gr.grad_accumulator(ia)) {
          auto d = acc->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[static_cast<std::int64_t>(i)];
        }
        if (Tensor<T>* acc = gr.grad_accumulator(ib)) {
          for (std::int64_t nc = 0; nc < acc->numel(); ++nc) {
            const T* p = gout.data().data() + nc * plane;
            T s = 0;
            for (std::int64_t i = 0; i < plane; ++i) s += p[i];
            (*acc)[nc] += s;
          }
        }
      });
}

template <typename T>
Var<T> Scale(Var<T> x, T alpha) {
  Tensor<T> out = x.value();
  for (auto& v : out.data()) v *= alpha;
  return x.graph().Record(
      "scale", std::move(out), {x.id()},
      [ix = x.id(), alpha](Graph<T>& gr, std::int32_t self) {
        const auto gout = gr.grad(self).data();
        if (Tensor<T>* acc = gr.grad_accumulator(ix)) {
          auto d = acc->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * gout[i];
        }
      });
}

template <typename T>
Var<T> Mul(Var<T> a, Var<T> b) {
  RequireSameShape(a, b, "mul");
  Tensor<T> out = a.value();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  return a.graph().Record(
      "mul", std::move(out), {a.id(), b.id()},
      [ia = a.id(), ib = b.id()](Graph<T>& gr, std::int32_t self) {
        const auto gout = gr.grad(self).data();
        const auto av = gr.value(ia).data();
        const auto bv = gr.value(ib).data();
        if (Tensor<T>* acc = gr.grad_accumulator(ia)) {
          auto d = acc->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i] * bv[i];
        }
        if (Tensor<T>* acc = gr.grad_accumulator(ib)) {
          auto d = acc->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gout[i] * av[i];
        }
      });
}

template <typename T>
Var<T> MulChannelwise(Var<T> u, Var<T> s) {
  const Shape& su = u.shape();
  if (&u.graph() != &s.graph()) {
    throw UsageError("mul_channelwise: operands from different graphs");
  }
  if (!IsChannelVectorOf(s.shape(), su)) {
    throw MismatchError("mul_channelwise: scale " + s.shape().str() +
                        " does not match " + su.str());
  }
  Tensor<T> out = u.value();
  const std::int64_t plane = su.plane();
  for (std::int64_t nc = 0; nc < su.n * su.c; ++nc) {
    const T scale = s.value()[nc];
    T* p = out.data().data() + nc * plane;
    for (std::int64_t i = 0; i < plane; ++i) p[i] *= scale;
  }
  return u.graph().Record(
      "mul_channelwise", std::move(out), {u.id(), s.id()},
      [iu = u.id(), is = s.id(), plane](Graph<T>& gr, std::int32_t self) {
        const Tensor<T>& gout = gr.grad(self);
        const Tensor<T>& uv = gr.value(iu);
        const Tensor<T>& sv = gr.value(is);
        const std::int64_t channels = sv.numel();
        if (Tensor<T>* acc = gr.grad_accumulator(iu)) {
          for (std::int64_t nc = 0; nc < channels; ++nc) {
            const T scale = sv[nc];
            const T* g = gout.data().data() + nc * plane;
            T* d = acc->data().data() + nc * plane;
            for (std::int64_t i = 0; i < plane; ++i) d[i] += scale * g[i];
          }
        }
        if (Tensor<T>* acc = gr.grad_accumulator(is)) {
          for (std::int64_t nc = 0; nc < channels; ++nc) {
            const T* g = gout.data().data() + nc * plane;
            const T* x = uv.data().data() + nc * plane;
            T dot = 0;
            for (std::int64_t i = 0; i < plane; ++i) dot += g[i] * x[i];
            (*acc)[nc] += dot;
          }
        }
      });
}

template <typename T>
Var<T> Sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().data()) total += v;
  return x.graph().Record("sum", Tensor<T>::Scalar(total), {x.id()},
                          [ix = x.id()](Graph<T>& gr, std::int32_t self) {
                            const T g = gr.grad(self)[0];
                            if (Tensor<T>* acc = gr.grad_accumulator(ix)) {
                              for (auto& d : acc->data()) d += g;
                            }
                          });
}

template class Graph<float>;
template class Graph<double>;

#define SRSE_INSTANTIATE(T)                              \
  template Var<T> Add<T>(Var<T>, Var<T>);                \
  template Var<T> Scale<T>(Var<T>, T);                   \
  template Var<T> Mul<T>(Var<T>, Var<T>);                \
  template Var<T> MulChannelwise<T>(Var<T>, Var<T>);     \
  template Var<T> Sum<T>(Var<T>);

SRSE_INSTANTIATE(float)
SRSE_INSTANTIATE(double)
#undef SRSE_INSTANTIATE

}  // namespace srse
