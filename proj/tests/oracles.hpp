#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "sap/optim.hpp"

namespace sap::test {

// Textbook Adam with bias correction, written out per coordinate.
struct AdamOracle {
  double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& p, const std::vector<double>& g, double lr) {
    if (m.empty()) m.assign(p.size(), 0.0), v.assign(p.size(), 0.0);
    ++t;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

// Gradient fed at step t (1-based) in the fixed 10-step trace.
inline std::vector<double> trace_grad(int t, const std::vector<double>& p) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = std::sin(double(t) + double(i)) + 0.1 * p[i];
  return g;
}

// Runs the library optimizer over the trace; lr 1e-2, dropping to 1e-3 after step 5.
inline std::vector<double> library_adam_trace() {
  std::vector<double> p{0.5, -1.25, 2.0};
  ad::AdamState st(p.size(), ad::LrSchedule{1e-2, 5, 1e-3});
  for (int t = 1; t <= 10; ++t) {
    const auto g = trace_grad(t, p);
    ad::adam_step(st, p, g);
  }
  return p;
}

inline std::vector<double> oracle_adam_trace() {
  std::vector<double> p{0.5, -1.25, 2.0};
  AdamOracle o;
  for (int t = 1; t <= 10; ++t) o.step(p, trace_grad(t, p), t <= 5 ? 1e-2 : 1e-3);
  return p;
}

// Same trace evaluated independently in double precision outside this code base.
inline constexpr std::array<double, 3> kAdamTraceReference{0.4674008473328422, -1.2551452661187916,
                                                           2.003645522465881};

}  // namespace sap::test
