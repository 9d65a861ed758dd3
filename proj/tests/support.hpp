#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sap/tensor.hpp"

namespace sap::test {

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

// Central differences on every entry of every parameter against backward().
// Relative error uses max(|a|, |n|, floor) as the denominator.
inline GradCheck grad_check(std::vector<ad::Tensor> params, const std::function<ad::Tensor()>& loss_fn,
                            double eps = 1e-6, double floor = 1e-2) {
  for (auto& p : params) p.zero_grad();
  ad::backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());
  GradCheck r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto d = params[k].data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double keep = d[i];
      d[i] = keep + eps;
      const double up = loss_fn().item();
      d[i] = keep - eps;
      const double down = loss_fn().item();
      d[i] = keep;
      const double num = (up - down) / (2 * eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      r.max_rel = std::max(r.max_rel, rel);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace sap::test
