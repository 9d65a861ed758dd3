#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sap/tensor.hpp"

namespace sap::ad {

// Step-indexed learning rate: base until drop_step (inclusive), dropped after.
struct LrSchedule {
  double base = 1e-3;
  std::optional<std::uint64_t> drop_step;
  double dropped = 1e-4;

  double at(std::uint64_t t) const {
    return (drop_step && t > *drop_step) ? dropped : base;
  }
};

struct AdamState {
  LrSchedule lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(std::size_t parameter_count, LrSchedule schedule);
};

// Updates params in place from grads. Throws TrainingError with the flat
// parameter index on a non-finite gradient (params are left untouched).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);
void adam_step(AdamState& state, std::span<Tensor> params);

}  // namespace sap::ad
