#include "sap/optim.hpp"

#include <cmath>

#include "sap/error.hpp"

namespace sap::ad {

AdamState::AdamState(std::size_t parameter_count, LrSchedule schedule)
    : lr(schedule), m(parameter_count, 0.0), v(parameter_count, 0.0) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.m.size()) + " moments");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw TrainingError("non-finite gradient at parameter " + std::to_string(i), i);
    }
  }
  state.t += 1;
  const double lr = state.lr.at(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void adam_step(AdamState& state, std::span<Tensor> params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  if (total != state.m.size()) {
    throw DimensionError("adam_step: state sized for " + std::to_string(state.m.size()) +
                         " parameters, model has " + std::to_string(total));
  }
  std::vector<double> flat(total), grad(total);
  std::size_t k = 0;
  for (auto& p : params) {
    auto d = p.data();
    auto g = p.grad();
    std::copy(d.begin(), d.end(), flat.begin() + k);
    std::copy(g.begin(), g.end(), grad.begin() + k);
    k += d.size();
  }
  adam_step(state, flat, grad);
  k = 0;
  for (auto& p : params) {
    auto d = p.data();
    std::copy(flat.begin() + k, flat.begin() + k + d.size(), d.begin());
    k += d.size();
  }
}

}  // namespace sap::ad
