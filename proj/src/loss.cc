#include "srse/loss.h"

#include <cmath>

namespace srse {

template <typename T>
Var<T> CharbonnierLoss(Var<T> pred, Var<T> target, T eps) {
  if (!(eps > T(0))) throw UsageError("charbonnier epsilon must be positive");
  if (&pred.graph() != &target.graph()) {
    throw UsageError("charbonnier: operands from different graphs");
  }
  if (pred.shape() != target.shape()) {
    throw MismatchError("charbonnier: prediction " + pred.shape().str() +
                        " vs target " + target.shape().str());
  }
  const auto p = pred.value().data();
  const auto t = target.value().data();
  // Accumulate in double so the float path does not drift on large batches.
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += CharbonnierPenalty(p[i] - t[i], eps);
  const double count = static_cast<double>(p.size());
  return pred.graph().Record(
      "charbonnier", Tensor<T>::Scalar(static_cast<T>(total / count)),
      {pred.id(), target.id()},
      [ip = pred.id(), it = target.id(), eps, count](Graph<T>& g, std::int32_t self) {
        const T scale = static_cast<T>(g.grad(self)[0] / count);
        const auto pv = g.value(ip).data();
        const auto tv = g.value(it).data();
        Tensor<T>* dp = g.grad_accumulator(ip);
        Tensor<T>* dt = g.grad_accumulator(it);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const T z = pv[i] - tv[i];
          const T d = scale * z / CharbonnierPenalty(z, eps);
          if (dp) (*dp)[static_cast<std::int64_t>(i)] += d;
          if (dt) (*dt)[static_cast<std::int64_t>(i)] -= d;
        }
      });
}

template Var<float> CharbonnierLoss<float>(Var<float>, Var<float>, float);
template Var<double> CharbonnierLoss<double>(Var<double>, Var<double>, double);

}  // namespace srse
