#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sap/error.hpp"
#include "sap/loss.hpp"
#include "sap/mlp.hpp"
#include "sap/optim.hpp"

using namespace sap;

TEST_CASE("learning-rate schedule drops strictly after the drop step") {
  ad::LrSchedule s{1e-3, 30000, 1e-4};
  CHECK(s.at(1) == 1e-3);
  CHECK(s.at(30000) == 1e-3);
  CHECK(s.at(30001) == 1e-4);
  ad::LrSchedule flat{3e-4, std::nullopt, 1.0};
  CHECK(flat.at(1000000) == 3e-4);
}

TEST_CASE("adam 10-step trace matches the reference") {
  const auto lib = test::library_adam_trace();
  const auto ora = test::oracle_adam_trace();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(lib[i] - ora[i]) < 1e-12);
    CHECK(std::abs(lib[i] - test::kAdamTraceReference[i]) < 1e-12);
  }
}

TEST_CASE("first adam step moves each coordinate by about lr against the gradient sign") {
  std::vector<double> p{1.0, -2.0, 0.0};
  std::vector<double> g{0.3, -5.0, 1e-3};
  ad::AdamState st(3, ad::LrSchedule{0.1, std::nullopt, 0.1});
  ad::adam_step(st, p, g);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(-0.1).epsilon(1e-4));
  CHECK(st.t == 1);
}

TEST_CASE("non-finite gradient raises with the parameter index and leaves params alone") {
  std::vector<double> p{1.0, 2.0, 3.0};
  std::vector<double> g{0.0, std::nan(""), 1.0};
  ad::AdamState st(3, ad::LrSchedule{});
  try {
    ad::adam_step(st, p, g);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.index() == 1);
  }
  CHECK(p == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("adam fits a small regression") {
  ad::Mlp net({1, 16, 1}, 3);
  std::vector<double> xs, ys;
  for (int i = 0; i < 32; ++i) {
    const double x = -1.0 + 2.0 * i / 31.0;
    xs.push_back(x);
    ys.push_back(x * x);
  }
  auto X = ad::Tensor::from({32, 1}, xs);
  auto Y = ad::Tensor::from({32, 1}, ys);
  auto params = net.parameters();
  ad::AdamState st(net.parameter_count(), ad::LrSchedule{1e-2, std::nullopt, 1e-2});
  double first = 0, last = 0;
  for (int it = 0; it < 1500; ++it) {
    auto loss = ad::mse_loss(net.forward(X), Y);
    if (it == 0) first = loss.item();
    last = loss.item();
    ad::zero_grad(params);
    ad::backward(loss);
    ad::adam_step(st, params);
  }
  CHECK(last < first * 0.05);
}
