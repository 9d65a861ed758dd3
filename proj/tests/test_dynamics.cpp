#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "sap/contingency.hpp"
#include "sap/dynamics.hpp"
#include "sap/env/gridworld.hpp"
#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"
#include "sap/reward.hpp"

using namespace sap;
using namespace sap::env;

TEST_CASE("input and output widths") {
  const auto g = DynamicsModel::create(EnvId::gridworld, {8}, 1);
  CHECK(g.input_width() == 144 + 4 + 3 * 2);
  CHECK(g.output_width() == 2);
  const auto p = DynamicsModel::create(EnvId::platformer, {8}, 1);
  CHECK(p.input_width() == 49 * 8 + 5 + 3 * 5 + 3 * 2 + kPlanStepSlots);
  CHECK(p.output_width() == 3);
  const auto r = DynamicsModel::create(EnvId::reacher, {8}, 1);
  CHECK(r.input_width() == 3375 + 8 + 3 * 3);
  CHECK(r.output_width() == 3);
}

TEST_CASE("history shifts most recent first") {
  History h;
  CHECK(h.actions == std::array<int, 3>{-1, -1, -1});
  const double d1[] = {1, 0}, d2[] = {0, -1}, d3[] = {2, 2};
  h.push(d1, 3);
  h.push(d2, 1);
  h.push(d3, 0);
  CHECK(h.actions == std::array<int, 3>{0, 1, 3});
  CHECK(h.deltas[0][0] == 2);
  CHECK(h.deltas[2][0] == 1);
  h.push(d1, 2);
  CHECK(h.actions == std::array<int, 3>{2, 0, 1});
}

TEST_CASE("extras encoding") {
  const auto p = DynamicsModel::create(EnvId::platformer, {8}, 1);
  History h;
  const double d[] = {1.0, -2.0};
  h.push(d, 4);
  std::vector<double> out(p.extra_width());
  encode_dyn_extras(p, 2, h, 20, out);
  std::vector<double> want(p.extra_width(), 0.0);
  want[2] = 1;              // action
  want[5 + 4] = 1;          // previous action
  want[20 + 0] = 1.0;       // newest delta
  want[20 + 1] = -2.0;
  want[26 + kPlanStepSlots - 1] = 1;  // plan step clamps to the last slot
  CHECK(out == want);
  CHECK_THROWS_AS(encode_dyn_extras(p, 5, h, 0, out), ContractError);
  std::vector<double> small(3);
  CHECK_THROWS_AS(encode_dyn_extras(p, 0, h, 0, small), DimensionError);
}

TEST_CASE("evaluator matches the graph forward, cached or not") {
  for (auto id : {EnvId::gridworld, EnvId::platformer, EnvId::reacher}) {
    const auto m = DynamicsModel::create(id, {16}, 3);
    auto e = make_env(make_spec(id, config_names(id).front()));
    e->reset(2);
    History h;
    const double d[] = {0.5, 0.0, -0.5};
    h.push(d, 1);
    const DynamicsEvaluator ev(m);
    for (std::uint32_t a = 0; a < m.action_count; ++a) {
      const auto w = extract_dynamics_window(*e, e->position());
      std::vector<double> x(w);
      std::vector<double> extras(m.extra_width());
      encode_dyn_extras(m, a, h, 1, extras);
      x.insert(x.end(), extras.begin(), extras.end());
      const auto out = m.net.forward(ad::Tensor::from({1, x.size()}, x));
      for (int rep = 0; rep < 2; ++rep) {
        const auto p = ev.predict(*e, e->position(), a, h, 1);
        for (std::size_t k = 0; k < m.delta_dims; ++k) CHECK(p.delta[k] == doctest::Approx(out[k]).epsilon(1e-12));
        if (m.done_head) CHECK(p.done_prob == doctest::Approx(1.0 / (1.0 + std::exp(-out[2]))).epsilon(1e-12));
        else CHECK(p.done_prob == 0.0);
      }
      const auto q = predict_next(m, w, a, h, 1);
      CHECK(q.delta[0] == doctest::Approx(out[0]).epsilon(1e-12));
    }
  }
}

TEST_CASE("applying a prediction rounds to the lattice and clamps") {
  GridWorld g(make_spec(EnvId::gridworld, "World-1"));
  Pos pos{5, 5, 0};
  Prediction p;
  p.delta = {0.6, -1.4, 0.0};
  CHECK_FALSE(apply_prediction(g, p, pos));
  CHECK(pos == Pos{6, 4, 0});
  pos = {0, 0, 0};
  p.delta = {-1.0, 3.0, 0.0};
  CHECK(apply_prediction(g, p, pos));
  CHECK(pos == Pos{0, 3, 0});

  Reacher r(make_spec(EnvId::reacher, "Config-A"));
  pos = {100, 30, 4};
  p.delta = {0.5, 0.5, -0.5};  // one voxel each
  CHECK_FALSE(apply_prediction(r, p, pos));
  CHECK(pos == Pos{101, 31, 3});
}

TEST_CASE("bank transitions carry true deltas and terminal done flags") {
  const auto bank = generate_exploration_bank(make_spec(EnvId::platformer, "Level-A"),
                                              default_exploration(EnvId::platformer), 30, 5);
  std::vector<std::size_t> all(30);
  std::iota(all.begin(), all.end(), 0);
  const auto tr = bank_transitions(bank, all);
  auto e = make_env(bank.spec);
  std::size_t total = 0, dones = 0;
  for (const auto& t : bank.trajectories) {
    total += t.length();
    dones += t.done && t.length() > 0;
  }
  CHECK(tr.size() == total);
  std::size_t seen_done = 0;
  for (const auto& x : tr) {
    const auto& t = bank.trajectories[x.trajectory];
    e->restore(t.states[x.t]);
    const auto a = e->position();
    e->restore(t.states[x.t + 1]);
    const auto b = e->position();
    CHECK(x.delta[0] == b[0] - a[0]);
    CHECK(x.delta[1] == b[1] - a[1]);
    CHECK(x.action == t.actions[x.t]);
    seen_done += x.done;
    if (x.done) CHECK(x.t + 1 == t.length());
    if (x.t == 0) CHECK(x.history.actions[0] == -1);
    else CHECK(x.history.actions[0] == int(t.actions[x.t - 1]));
  }
  CHECK(seen_done == dones);
}

TEST_CASE("gridworld dynamics are learnable") {
  const auto bank = generate_exploration_bank(make_spec(EnvId::gridworld, "World-1"),
                                              default_exploration(EnvId::gridworld), 100, 1);
  DynTrainConfig cfg;
  cfg.iterations = 3000;
  cfg.seed = 2;
  cfg.eval_every = 1000;
  const auto res = train_dynamics(bank, cfg);
  CHECK(res.heldout_trajectories.size() == 20);
  CHECK(res.heldout_accuracy >= 0.95);
  CHECK(next_position_accuracy(res.model, bank, bank_transitions(bank, res.heldout_trajectories)) ==
        res.heldout_accuracy);
  REQUIRE(res.log.size() >= 2);
  CHECK(res.log.back().delta_loss < res.log.front().delta_loss);

  // rollout follows the true dynamics for a few steps away from the border
  GridWorld g(bank.spec);
  g.place_agent({4, 4, 0});
  const std::vector<std::uint32_t> acts{GridWorld::down, GridWorld::right, GridWorld::right, GridWorld::up};
  const auto ro = rollout(DynamicsEvaluator(res.model), g, History{}, acts);
  REQUIRE(ro.positions.size() == acts.size() + 1);
  CHECK(ro.done_step == -1);
  CHECK(ro.positions.back() == Pos{4, 6, 0});
}

TEST_CASE("dynamics checkpoint round trip and type check") {
  const auto m = DynamicsModel::create(EnvId::reacher, {8}, 9);
  const auto dir = std::filesystem::temp_directory_path();
  save_dynamics(dir / "sap_dyn_test.ckpt", m, {{"k", "v"}});
  std::map<std::string, std::string> meta;
  const auto back = load_dynamics(dir / "sap_dyn_test.ckpt", &meta);
  CHECK(back.net.checksum() == m.net.checksum());
  CHECK(back.env == EnvId::reacher);
  CHECK(meta.at("k") == "v");
  save_scorer(dir / "sap_dyn_test_scorer.ckpt", ScoringModel::create(EnvId::reacher, "grid27", {4}, 1));
  CHECK_THROWS_AS(load_dynamics(dir / "sap_dyn_test_scorer.ckpt"), ConfigError);
  std::filesystem::remove(dir / "sap_dyn_test.ckpt");
  std::filesystem::remove(dir / "sap_dyn_test_scorer.ckpt");
}
