#include <doctest.h>

#include "sap/contingency.hpp"
#include "sap/env/bank.hpp"
#include "sap/planner.hpp"
#include "sap/reward.hpp"
#include "sap/rng.hpp"

using namespace sap;
using namespace sap::env;

namespace {
constexpr int kCases = 1000;

EnvId env_of(int i) { return static_cast<EnvId>(i % 3); }

std::unique_ptr<Environment> random_state(EnvId id, Rng& rng) {
  auto e = make_env(make_spec(id, config_names(id)[std::size_t(uniform_int(rng, 0, int(config_names(id).size()) - 1))]));
  e->reset(rng());
  const int steps = uniform_int(rng, 0, 10);
  for (int k = 0; k < steps && !e->terminated(); ++k)
    e->step(std::uint32_t(uniform_int(rng, 0, int(e->action_count()) - 1)));
  return e;
}
}  // namespace

TEST_CASE("temporal additivity: the return of a trajectory splits at any step") {
  const auto spec = make_spec(EnvId::gridworld, "World-1");
  const auto bank = generate_exploration_bank(spec, default_exploration(EnvId::gridworld), 50, 12);
  const auto m = ScoringModel::create(EnvId::gridworld, "cells9", {8}, 4);
  const ScoreEvaluator ev(m);
  Rng rng(1);
  for (int c = 0; c < kCases; ++c) {
    const auto& t = bank.trajectories[std::size_t(uniform_int(rng, 0, 49))];
    const std::size_t cut = std::size_t(uniform_int(rng, 0, int(t.length())));
    Trajectory head, tail;
    head.states.assign(t.states.begin(), t.states.begin() + std::ptrdiff_t(cut) + 1);
    head.actions.assign(t.actions.begin(), t.actions.begin() + std::ptrdiff_t(cut));
    tail.states.assign(t.states.begin() + std::ptrdiff_t(cut), t.states.end());
    tail.actions.assign(t.actions.begin() + std::ptrdiff_t(cut), t.actions.end());
    const double whole = trajectory_return(ev, spec, t);
    const double parts = trajectory_return(ev, spec, head) + trajectory_return(ev, spec, tail);
    CHECK(whole == doctest::Approx(parts).epsilon(1e-10));
  }
}

TEST_CASE("spatial additivity: step score is the sum of region scores") {
  Rng rng(2);
  std::vector<ScoringModel> models;
  for (auto id : {EnvId::gridworld, EnvId::platformer, EnvId::reacher})
    models.push_back(ScoringModel::create(id, default_layout(id), {8}, 3));
  for (int c = 0; c < kCases; ++c) {
    const auto& m = models[std::size_t(c % 3)];
    const ScoreEvaluator ev(m);
    std::vector<double> w(window_spec(m.env).width());
    for (auto& x : w) x = uniform01(rng) < 0.5 ? 0.0 : uniform01(rng);
    const auto regs = split_subregions(w, m.layout);
    const std::uint32_t a = std::uint32_t(uniform_int(rng, 0, int(m.action_count) - 1));
    const auto parts = ev.region_scores(w, a);
    REQUIRE(parts.size() == m.regions());
    double sum = 0;
    std::vector<double> out(m.action_count * m.regions());
    for (std::size_t l = 0; l < m.regions(); ++l) {
      ev.region_outputs(std::span<const double>(regs.data() + l * m.layout.region_width(), m.layout.region_width()),
                        out);
      CHECK(parts[l] == doctest::Approx(out[m.unit(a, l)]).epsilon(1e-12));
      sum += out[m.unit(a, l)];
    }
    CHECK(ev.score_step(w, a) == doctest::Approx(sum).epsilon(1e-10));
  }
}

TEST_CASE("purity: scoring and planning leave the environment and model untouched") {
  Rng rng(3);
  std::vector<ScoringModel> models;
  for (auto id : {EnvId::gridworld, EnvId::platformer, EnvId::reacher})
    models.push_back(ScoringModel::create(id, default_layout(id), {8}, 5));
  std::vector<std::uint64_t> sums;
  for (const auto& m : models) sums.push_back(m.net.checksum());
  PlannerConfig cfg;
  cfg.horizon = 2;
  cfg.samples = 3;
  for (int c = 0; c < kCases; ++c) {
    const auto id = env_of(c);
    const auto& m = models[std::size_t(id)];
    auto e = random_state(id, rng);
    const auto before = e->snapshot();
    const std::uint32_t a = std::uint32_t(uniform_int(rng, 0, int(e->action_count()) - 1));
    const double s1 = score_step(m, *e, e->position(), a);
    const double s2 = score_step(m, *e, e->position(), a);
    CHECK(s1 == s2);
    if (c % 10 == 0 && !e->terminated()) {
      Rng prng(static_cast<std::uint64_t>(c));
      mpc_plan(*e, History{}, LearnedScorer(m), PerfectRollout{}, cfg, prng);
    }
    CHECK(e->snapshot() == before);
  }
  for (std::size_t i = 0; i < models.size(); ++i) CHECK(models[i].net.checksum() == sums[i]);
}

TEST_CASE("replay: random episodes re-simulate exactly") {
  Rng rng(4);
  for (int c = 0; c < kCases; ++c) {
    const auto id = env_of(c);
    auto e = random_state(id, rng);
    Rng act(rng());
    const auto t = record_episode(*e, 40, [&](const Environment& x) {
      return std::uint32_t(uniform_int(act, 0, int(x.action_count()) - 1));
    });
    std::string why;
    CHECK_MESSAGE(replay_check(e->spec(), t, &why), why);
  }
}

TEST_CASE("snapshot round trip is exact") {
  Rng rng(5);
  for (int c = 0; c < kCases; ++c) {
    auto e = random_state(env_of(c), rng);
    const auto s = e->snapshot();
    auto f = make_env(e->spec());
    f->restore(s);
    CHECK(f->snapshot() == s);
    CHECK(extract_window(*f) == extract_window(*e));
  }
}
