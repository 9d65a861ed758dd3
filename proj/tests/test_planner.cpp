#include <doctest.h>

#include <cmath>
#include <map>
#include <tuple>

#include "sap/env/gridworld.hpp"
#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"
#include "sap/planner.hpp"
#include "sap/contingency.hpp"

using namespace sap;
using namespace sap::env;

namespace {

class ConstScorer final : public StepScorer {
 public:
  explicit ConstScorer(double v) : v_(v) {}
  double score(const Environment&, const Pos&, std::uint32_t) const override { return v_; }

 private:
  double v_;
};

// Score depends only on the action.
class ActionScorer final : public StepScorer {
 public:
  explicit ActionScorer(std::vector<double> v) : v_(std::move(v)) {}
  double score(const Environment&, const Pos&, std::uint32_t a) const override { return v_.at(a); }

 private:
  std::vector<double> v_;
};

// Independent dynamic program over (cell, steps left) for the gridworld.
double grid_dp(const GridWorld& g, Pos p, std::size_t k, std::map<std::tuple<int, int, std::size_t>, double>& memo) {
  if (k == 0) return 0.0;
  const auto key = std::tuple{p[0], p[1], k};
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  static const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  double best = -1e300;
  for (int a = 0; a < 4; ++a) {
    Pos q{p[0] + dr[a], p[1] + dc[a], 0};
    if (q[0] < 0 || q[0] >= GridWorld::kSize || q[1] < 0 || q[1] >= GridWorld::kSize) q = p;
    best = std::max(best, g.cell_value(p[0], p[1]) + grid_dp(g, q, k - 1, memo));
  }
  return memo[key] = best;
}

// A reacher state one action below the goal line.
std::unique_ptr<Reacher> reacher_below_goal() {
  auto r = std::make_unique<Reacher>(make_spec(EnvId::reacher, "Config-A"));
  for (int x = 5; x < 195; ++x)
    for (int z = 5; z < 60; ++z) {
      const Pos p{x, 119, z};
      if (!r->can_place(p)) continue;
      r->place_agent(p);
      auto c = r->clone();
      c->step(7);
      if (c->at_goal()) return r;
    }
  return nullptr;
}

}  // namespace

TEST_CASE("config validation") {
  PlannerConfig c;
  CHECK_NOTHROW(c.validate());
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = {};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("exhaustive planning with the true model equals dynamic programming") {
  GridWorld g(make_spec(EnvId::gridworld, "World-2"));
  PerfectRollout model;
  TrueRewardScorer scorer;
  PlannerConfig cfg;
  for (std::size_t H : {1u, 2u, 4u}) {
    cfg.horizon = H;
    std::map<std::tuple<int, int, std::size_t>, double> memo;
    for (const Pos p : {Pos{0, 0, 0}, Pos{3, 5, 0}, Pos{8, 1, 0}, Pos{9, 9, 0}}) {
      g.place_agent(p);
      const auto res = exhaustive_plan(g, History{}, scorer, model, cfg);
      CHECK(res.evaluated == std::size_t(std::pow(4, H)));
      CHECK(res.best_return == doctest::Approx(grid_dp(g, p, H, memo)).epsilon(1e-12));
      CHECK(evaluate_sequence(g, History{}, scorer, model, res.best_sequence, cfg) == res.best_return);
    }
  }
}

TEST_CASE("enumerate mode is exhaustive planning") {
  GridWorld g(make_spec(EnvId::gridworld, "World-1"));
  g.place_agent({4, 4, 0});
  PlannerConfig cfg;
  cfg.horizon = 3;
  cfg.enumerate = true;
  Rng rng(1);
  const auto a = mpc_plan(g, History{}, TrueRewardScorer{}, PerfectRollout{}, cfg, rng);
  const auto b = exhaustive_plan(g, History{}, TrueRewardScorer{}, PerfectRollout{}, cfg);
  CHECK(a.best_sequence == b.best_sequence);
  CHECK(a.best_return == b.best_return);
  CHECK(a.mean_return == b.mean_return);
  cfg.horizon = 12;
  CHECK_THROWS_AS(exhaustive_plan(g, History{}, TrueRewardScorer{}, PerfectRollout{}, cfg), ContractError);
}

TEST_CASE("horizon one picks the best scored action") {
  GridWorld g(make_spec(EnvId::gridworld, "World-1"));
  g.place_agent({4, 4, 0});
  PlannerConfig cfg;
  cfg.horizon = 1;
  cfg.samples = 400;
  Rng rng(3);
  const ActionScorer s({0.1, 0.7, -1.0, 0.3});
  const auto r = mpc_plan(g, History{}, s, PerfectRollout{}, cfg, rng);
  CHECK(r.action == 1);
  CHECK(r.best_return == 0.7);
  CHECK(r.min_return == -1.0);
  CHECK(r.chosen_first_mean == doctest::Approx(0.7));
}

TEST_CASE("random shooting: ties go to the first sample, draws are reproducible") {
  GridWorld g(make_spec(EnvId::gridworld, "World-1"));
  g.place_agent({4, 4, 0});
  PlannerConfig cfg;
  cfg.horizon = 5;
  cfg.samples = 20;
  Rng rng(11), mirror(11);
  const auto r = mpc_plan(g, History{}, ConstScorer(1.0), PerfectRollout{}, cfg, rng);
  std::vector<std::uint32_t> first(5);
  for (auto& a : first) a = std::uint32_t(uniform_int(mirror, 0, 3));
  CHECK(r.best_sequence == first);
  CHECK(r.evaluated == 20);
  CHECK(r.best_return == 5.0);
  Rng again(11);
  CHECK(mpc_plan(g, History{}, ConstScorer(1.0), PerfectRollout{}, cfg, again).best_sequence == first);
}

TEST_CASE("discount and aggregator") {
  GridWorld g(make_spec(EnvId::gridworld, "World-1"));
  g.place_agent({4, 4, 0});
  PlannerConfig cfg;
  cfg.gamma = 0.5;
  const std::vector<std::uint32_t> seq{1, 1, 1};
  CHECK(evaluate_sequence(g, History{}, ConstScorer(1.0), PerfectRollout{}, seq, cfg) == 1.75);
  cfg.gamma = 1.0;
  cfg.aggregator = Aggregator::max;
  const ActionScorer s({0.0, 2.0, 5.0, -1.0});
  const std::vector<std::uint32_t> mixed{1, 2, 3};
  CHECK(evaluate_sequence(g, History{}, s, PerfectRollout{}, mixed, cfg) == 5.0);
}

TEST_CASE("done truncates the candidate; ignore mode keeps scoring") {
  auto r = reacher_below_goal();
  REQUIRE(r);
  PlannerConfig cfg;
  const std::vector<std::uint32_t> seq{7, 7, 7, 7};
  const auto c = evaluate_candidate(*r, History{}, ConstScorer(1.0), PerfectRollout{}, seq, cfg);
  CHECK(c.goal_step == 0);
  CHECK(c.done_step == 0);
  CHECK(c.ret == 1.0);
  cfg.done_mode = DoneMode::ignore;
  CHECK(evaluate_candidate(*r, History{}, ConstScorer(1.0), PerfectRollout{}, seq, cfg).ret == 4.0);
}

TEST_CASE("goal ordering") {
  CandidateOutcome none{10.0, -1, -1}, late{-5.0, 3, 3}, early{-9.0, 1, 1}, early_hi{0.0, 1, 1};
  CHECK(better_candidate(late, none));
  CHECK_FALSE(better_candidate(none, late));
  CHECK(better_candidate(early, late));
  CHECK(better_candidate(early_hi, early));
  CHECK_FALSE(better_candidate(early, early));
  CHECK(better_candidate(CandidateOutcome{2.0, -1, 0}, CandidateOutcome{1.0, -1, -1}));

  // planner prefers reaching the goal over a higher score elsewhere
  auto r = reacher_below_goal();
  REQUIRE(r);
  PlannerConfig cfg;
  cfg.horizon = 2;
  cfg.enumerate = true;
  std::vector<double> v(8, 0.0);
  v[0] = 100.0;  // moving down is scored highest
  Rng rng(1);
  const auto res = mpc_plan(*r, History{}, ActionScorer(v), PerfectRollout{}, cfg, rng);
  CHECK(res.goal_step == 0);
  CHECK((res.action & 2u) != 0);
}

TEST_CASE("true-reward scorer needs the true state") {
  GridWorld g(make_spec(EnvId::gridworld, "World-1"));
  g.place_agent({2, 3, 0});
  TrueRewardScorer s;
  CHECK(s.score(g, {2, 3, 0}, 0) == g.cell_value(2, 3));
  CHECK_THROWS_AS(s.score(g, {2, 4, 0}, 0), ContractError);
}

TEST_CASE("learned scorer caches per position and world") {
  const auto m = ScoringModel::create(EnvId::gridworld, "cells9", {8}, 2);
  const LearnedScorer ls(m);
  const ScoreEvaluator ev(m);
  GridWorld w1(make_spec(EnvId::gridworld, "World-1")), w2(make_spec(EnvId::gridworld, "World-2"));
  for (int rep = 0; rep < 2; ++rep)
    for (const GridWorld* g : {&w1, &w2})
      for (const Pos p : {Pos{1, 1, 0}, Pos{5, 6, 0}}) {
        const auto want = ev.action_scores(extract_window(*g, p));
        for (std::uint32_t a = 0; a < 4; ++a) CHECK(ls.score(*g, p, a) == want[a]);
      }
  CHECK_THROWS_AS(ls.score(w1, {1, 1, 0}, 4), ContractError);

  // platformer: keyed on the window (monsters move)
  const auto pm = ScoringModel::create(EnvId::platformer, "ring8", {8}, 2);
  const LearnedScorer lp(pm);
  Platformer p(make_spec(EnvId::platformer, "Level-A"));
  p.reset(0);
  for (int t = 0; t < 5; ++t) {
    const auto want = ScoreEvaluator(pm).action_scores(extract_window(p));
    CHECK(lp.score(p, p.position(), 1) == want[1]);
    p.step(Platformer::right);
  }
}

TEST_CASE("episodes: random policy runs to the cap and replays") {
  RandomPolicy pol;
  const auto spec = make_spec(EnvId::gridworld, "World-1");
  const auto r = run_episode(spec, pol, 4);
  CHECK(r.steps == 30);
  CHECK(r.trajectory.length() == 30);
  CHECK(replay_check(spec, r.trajectory));
  CHECK(run_episode(spec, pol, 4).trajectory.actions == r.trajectory.actions);
}

TEST_CASE("planner policy on the true gridworld is at least as good as random") {
  const auto spec = make_spec(EnvId::gridworld, "World-1");
  PlannerConfig cfg = default_planner(EnvId::gridworld);
  PlannerPolicy plan(std::make_shared<TrueRewardScorer>(), std::make_shared<PerfectRollout>(), cfg);
  RandomPolicy rnd;
  double sp = 0, sr = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    sp += run_episode(spec, plan, i).ret;
    sr += run_episode(spec, rnd, i).ret;
  }
  CHECK(sp > sr);
}
