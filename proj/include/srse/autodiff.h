#pragma once

// Tape-based reverse-mode automatic differentiation over NCHW tensors.
//
// A Graph records every op of one forward pass as an append-only node list.
// Inputs always precede their consumers, so a single reverse sweep over the
// insertion order is a valid topological backward pass. Graphs are meant to
// live for one forward/backward round and then be dropped.

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "srse/tensor.h"

namespace srse {

template <typename T>
class Graph;

enum class NodeKind : std::uint8_t { kConstant, kVariable, kParameter, kOp };

// Handle to a node of a Graph. Cheap to copy; only valid while the graph is.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::int32_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::int32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::int32_t id_ = -1;
};

template <typename T>
class Graph {
 public:
  // Called once during Backward with the node's own id. The callback reads
  // grad(self) and accumulates into grad_accumulator(input) for each input.
  using BackwardFn = std::function<void(Graph&, std::int32_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives a gradient.
  Var<T> Constant(Tensor<T> value);
  // Leaf that receives a gradient but is not trainable (gradcheck inputs).
  Var<T> Variable(Tensor<T> value);
  // Trainable leaf. Backward keeps its gradient.
  Var<T> Parameter(Tensor<T> value, std::string name = {});

  // Appends an op node. `inputs` must already be in this graph.
  Var<T> Record(std::string_view op, Tensor<T> value,
                std::vector<std::int32_t> inputs, BackwardFn backward);

  const Tensor<T>& value(std::int32_t id) const { return node(id).value; }
  bool requires_grad(std::int32_t id) const { return node(id).requires_grad; }
  NodeKind kind(std::int32_t id) const { return node(id).kind; }
  const std::string& label(std::int32_t id) const { return node(id).label; }
  const std::vector<std::int32_t>& inputs(std::int32_t id) const {
    return node(id).inputs;
  }
  std::size_t size() const { return nodes_.size(); }

  // Zero-initialized on first use. Null when the node needs no gradient.
  Tensor<T>* grad_accumulator(std::int32_t id);

  // Gradient of the last Backward call. Empty tensor if none reached it.
  const Tensor<T>& grad(std::int32_t id) const { return node(id).grad; }
  const Tensor<T>& grad(Var<T> v) const { return grad(v.id()); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse. Gradients
  // of op nodes are released as soon as they have been propagated; gradients
  // of Variable and Parameter leaves are kept.
  void Backward(Var<T> loss);

  std::vector<std::int32_t> parameters() const { return parameters_; }

  // When on, every recorded value is checked for NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }

  void Clear();

 private:
  struct Node {
    NodeKind kind = NodeKind::kConstant;
    std::string label;
    std::vector<std::int32_t> inputs;
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var<T> AddLeaf(NodeKind kind, Tensor<T> value, std::string label);
  const Node& node(std::int32_t id) const;
  Node& node(std::int32_t id);

  // deque keeps value references stable while the tape grows.
  std::deque<Node> nodes_;
  std::vector<std::int32_t> parameters_;
  bool check_finite_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->requires_grad(id_);
}

// Elementwise a + b. `b` may also be (N, C, 1, 1) and is then broadcast over
// the spatial extents of `a`.
template <typename T>
Var<T> Add(Var<T> a, Var<T> b);

// alpha * x.
template <typename T>
Var<T> Scale(Var<T> x, T alpha);

// Elementwise product of equal shapes.
template <typename T>
Var<T> Mul(Var<T> a, Var<T> b);

// Each (n, c) plane of u times the scalar s(n, c, 0, 0).
template <typename T>
Var<T> MulChannelwise(Var<T> u, Var<T> s);

// Test hook for harness sensitivity checks: during Backward, the incoming
// gradient of every op node labelled `op` is multiplied by `factor` before it
// is propagated. An empty label turns the hook off.
void SetBackwardCorruption(std::string op, double factor = 1.05);

// Sum of all elements, as a (1,1,1,1) tensor.
template <typename T>
Var<T> Sum(Var<T> x);

}  // namespace srse
