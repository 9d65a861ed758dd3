#include <doctest.h>

#include <cmath>
#include <random>

#include "sap/error.hpp"
#include "sap/loss.hpp"
#include "sap/mlp.hpp"
#include "sap/rng.hpp"
#include "sap/tensor.hpp"
#include "support.hpp"

using namespace sap;
using ad::Tensor;

namespace {

Tensor rand_tensor(ad::Shape s, Rng& rng, bool grad = true, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::shape_size(s));
  for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
  return Tensor::from(std::move(s), std::move(v), grad);
}

}  // namespace

TEST_CASE("scalar chain rule by hand") {
  auto x = Tensor::scalar(3.0, true);
  auto y = ad::square(ad::add(x, Tensor::scalar(1.0)));  // (x+1)^2
  ad::backward(y);
  CHECK(y.item() == doctest::Approx(16.0));
  CHECK(x.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("shared subexpression accumulates once per path") {
  auto x = Tensor::scalar(2.0, true);
  auto a = ad::mul(x, x);          // x^2
  auto y = ad::add(a, ad::scale(a, 3.0));  // 4 x^2
  const std::size_t visited = ad::backward(y);
  CHECK(x.grad()[0] == doctest::Approx(16.0));
  CHECK(visited == 4);  // x, a, scale(a), add
}

TEST_CASE("backward needs a scalar") {
  auto x = Tensor::zeros({2, 2}, true);
  CHECK_THROWS_AS(ad::backward(ad::relu(x)), ContractError);
}

TEST_CASE("shape errors") {
  Rng rng(1);
  auto a = rand_tensor({2, 3}, rng);
  auto b = rand_tensor({3, 2}, rng);
  CHECK_THROWS_AS(ad::add(a, b), DimensionError);
  CHECK_THROWS_AS(ad::linear(a, rand_tensor({4, 2}, rng), rand_tensor({4}, rng)), DimensionError);
  CHECK_THROWS_AS(ad::matmul(a, a), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(ad::slice_cols(a, 2, 4), DimensionError);
  CHECK_THROWS_AS(ad::reshape(a, {4}), DimensionError);
  std::vector<std::uint32_t> bad{0, 3};
  CHECK_THROWS_AS(ad::softmax_cross_entropy(a, bad), DimensionError);
}

TEST_CASE("finite differences: elementwise and reductions") {
  Rng rng(7);
  auto a = rand_tensor({3, 4}, rng);
  auto b = rand_tensor({3, 4}, rng);
  auto check = [&](const char* name, std::function<Tensor()> f) {
    CAPTURE(name);
    const auto r = test::grad_check({a, b}, f);
    CHECK(r.max_rel < 1e-6);
  };
  check("add", [&] { return ad::sum(ad::add(a, b)); });
  check("sub", [&] { return ad::sum(ad::square(ad::sub(a, b))); });
  check("mul", [&] { return ad::mean(ad::mul(a, b)); });
  check("scale", [&] { return ad::sum(ad::scale(ad::mul(a, a), -2.5)); });
  check("relu", [&] { return ad::sum(ad::mul(ad::relu(a), b)); });
  check("sigmoid", [&] { return ad::sum(ad::mul(ad::sigmoid(a), b)); });
  check("slice", [&] { return ad::sum(ad::square(ad::slice_cols(ad::mul(a, b), 1, 3))); });
  check("reshape", [&] { return ad::sum(ad::mul(ad::reshape(a, {12}), ad::reshape(b, {12}))); });
}

TEST_CASE("finite differences: linear algebra") {
  Rng rng(11);
  auto x = rand_tensor({5, 4}, rng);
  auto w = rand_tensor({3, 4}, rng);
  auto bias = rand_tensor({3}, rng);
  auto m = rand_tensor({4, 6}, rng);
  CHECK(test::grad_check({x, w, bias}, [&] { return ad::sum(ad::square(ad::linear(x, w, bias))); }).max_rel < 1e-6);
  CHECK(test::grad_check({x, m}, [&] { return ad::mean(ad::square(ad::matmul(x, m))); }).max_rel < 1e-6);
}

TEST_CASE("finite differences: gathers and segments") {
  Rng rng(13);
  auto h = rand_tensor({4, 5}, rng);
  auto w = rand_tensor({6, 5}, rng);
  auto b = rand_tensor({6}, rng);
  std::vector<std::uint32_t> rows{0, 1, 3, 3, 2, 0}, units{5, 0, 2, 2, 1, 4};
  CHECK(test::grad_check({h, w, b}, [&] {
          return ad::sum(ad::square(ad::gather_linear(h, w, b, rows, units)));
        }).max_rel < 1e-6);

  auto x = rand_tensor({7}, rng);
  std::vector<std::uint32_t> seg{0, 0, 1, 2, 2, 2, 1};
  CHECK(test::grad_check({x}, [&] { return ad::sum(ad::square(ad::segment_sum(x, seg, 3))); }).max_rel < 1e-6);
  CHECK(test::grad_check({x}, [&] { return ad::sum(ad::square(ad::segment_max(x, seg, 3))); }).max_rel < 1e-6);
  std::vector<double> wt{0.5, 1, 2, 0.1, 3, 1, 1};
  CHECK(test::grad_check({x}, [&] { return ad::weighted_abs_sum(x, wt); }).max_rel < 1e-6);
  std::vector<std::uint32_t> idx{6, 0, 0, 3};
  CHECK(test::grad_check({x}, [&] { return ad::sum(ad::square(ad::gather(x, idx))); }).max_rel < 1e-6);
}

TEST_CASE("finite differences: losses") {
  Rng rng(17);
  auto logits = rand_tensor({4, 5}, rng, true, -3, 3);
  std::vector<std::uint32_t> labels{0, 4, 2, 2};
  CHECK(test::grad_check({logits}, [&] { return ad::softmax_cross_entropy(logits, labels); }).max_rel < 1e-6);
  CHECK(test::grad_check({logits}, [&] { return ad::cross_entropy_loss(logits, labels); }).max_rel < 1e-6);
  auto z = rand_tensor({6}, rng, true, -4, 4);
  std::vector<double> t{0, 1, 1, 0, 0.5, 1};
  CHECK(test::grad_check({z}, [&] { return ad::bce_with_logits(z, t); }).max_rel < 1e-6);
  auto p = rand_tensor({3, 2}, rng);
  auto q = rand_tensor({3, 2}, rng, false);
  CHECK(test::grad_check({p}, [&] { return ad::mse_loss(p, q); }).max_rel < 1e-6);
  std::vector<Tensor> both{p, z};
  CHECK(test::grad_check({p, z}, [&] { return ad::l1_penalty(both); }).max_rel < 1e-6);
}

TEST_CASE("loss values against direct formulas") {
  auto logits = Tensor::from({1, 3}, {1.0, 2.0, 3.0});
  std::vector<std::uint32_t> lab{2};
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(ad::softmax_cross_entropy(logits, lab).item() == doctest::Approx(-std::log(std::exp(3.0) / z)).epsilon(1e-12));
  auto p = Tensor::from({2}, {1.0, 3.0});
  auto q = Tensor::from({2}, {0.0, 1.0});
  CHECK(ad::mse_loss(p, q).item() == doctest::Approx(0.5 * (1.0 + 4.0) / 2.0));
  auto x = Tensor::from({1}, {0.0});
  std::vector<double> t{1.0};
  CHECK(ad::bce_with_logits(x, t).item() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("mlp gradient on random widths") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> widths{std::size_t(uniform_int(rng, 1, 6))};
    const int depth = uniform_int(rng, 1, 3);
    for (int d = 0; d < depth; ++d) widths.push_back(std::size_t(uniform_int(rng, 1, 6)));
    ad::Mlp net(widths, std::uint64_t(trial));
    auto x = rand_tensor({3, widths.front()}, rng, false);
    auto params = net.parameters();
    CHECK(test::grad_check(params, [&] { return ad::mean(ad::square(net.forward(x))); }).max_rel < 1e-5);
  }
}

TEST_CASE("frozen mlp matches the graph forward") {
  Rng rng(5);
  ad::Mlp net({7, 5, 4, 3}, 9);
  ad::FrozenMlp frozen(net);
  auto x = rand_tensor({1, 7}, rng, false);
  auto ref = net.forward(x);
  auto out = frozen.forward(x.data());
  for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("mlp init is seeded and flat parameters round-trip") {
  ad::Mlp a({4, 3, 2}, 42), b({4, 3, 2}, 42), c({4, 3, 2}, 43);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
  CHECK(a.parameter_count() == 4 * 3 + 3 + 3 * 2 + 2);
  auto flat = c.flat_parameters();
  a.set_flat_parameters(flat);
  CHECK(a.checksum() == c.checksum());
  // fan-in bound
  for (double w : b.layers()[0].w.data()) CHECK(std::abs(w) <= 1.0 / std::sqrt(4.0));
}
