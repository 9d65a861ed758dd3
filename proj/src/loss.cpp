#include "sap/loss.hpp"

#include <vector>

#include "sap/error.hpp"

namespace sap::ad {

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                         shape_string(target.shape()));
  }
  return scale(mean(square(sub(pred, target))), 0.5);
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const std::uint32_t> labels) {
  if (logits.rank() == 1) return softmax_cross_entropy(reshape(logits, {1, logits.size()}), labels);
  return softmax_cross_entropy(logits, labels);
}

Tensor l1_penalty(std::span<const Tensor> tensors) {
  if (tensors.empty()) return Tensor::scalar(0.0);
  Tensor total;
  for (const auto& t : tensors) {
    std::vector<double> ones(t.size(), 1.0);
    Tensor term = weighted_abs_sum(t, ones);
    total = total ? add(total, term) : term;
  }
  return total;
}

}  // namespace sap::ad
