#pragma once

#include <cstdint>
#include <span>

#include "sap/tensor.hpp"

namespace sap::ad {

// 1/2 * mean((pred - target)^2)
Tensor mse_loss(const Tensor& pred, const Tensor& target);
// Mean negative log softmax probability of the label; logits [n,C] or [C].
Tensor cross_entropy_loss(const Tensor& logits, std::span<const std::uint32_t> labels);
// Sum of absolute entries over all tensors.
Tensor l1_penalty(std::span<const Tensor> tensors);

}  // namespace sap::ad
