#include "sap/planner.hpp"

#include <cmath>
#include <limits>

#include "sap/contingency.hpp"
#include "sap/error.hpp"

namespace sap {

using env::EnvId;
using env::Pos;

void PlannerConfig::validate() const {
  if (horizon < 1) throw ContractError("planner: horizon must be at least 1");
  if (samples < 1) throw ContractError("planner: sample count must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractError("planner: gamma must lie in (0, 1]");
}

PlannerConfig default_planner(EnvId env) {
  PlannerConfig c;
  switch (env) {
    case EnvId::gridworld: c.horizon = 4; c.samples = 256; c.gamma = 1.0; break;
    case EnvId::platformer: c.horizon = 10; c.samples = 128; c.gamma = 0.95; break;
    case EnvId::reacher: c.horizon = 8; c.samples = 64; c.gamma = 1.0; break;
  }
  return c;
}

const std::vector<double>& LearnedScorer::scores_at(const env::Environment& world, const Pos& at) const {
  if (world.static_world()) {
    if (auto k = world.world_key(); k != cache_world_) {
      by_pos_.clear();
      cache_world_ = std::move(k);
    }
    const std::uint64_t key = env::pos_key(at);
    auto it = by_pos_.find(key);
    if (it == by_pos_.end()) it = by_pos_.emplace(key, eval_.action_scores(extract_window(world, at))).first;
    return it->second;
  }
  thread_local std::vector<double> window;
  window.resize(window_spec(world.id()).width());
  extract_window(world, at, window);
  std::string key(reinterpret_cast<const char*>(window.data()), window.size() * sizeof(double));
  auto it = by_window_.find(key);
  if (it == by_window_.end()) it = by_window_.emplace(std::move(key), eval_.action_scores(window)).first;
  return it->second;
}

double LearnedScorer::score(const env::Environment& world, const Pos& at, std::uint32_t action) const {
  const auto& s = scores_at(world, at);
  if (action >= s.size()) throw ContractError("score: invalid action " + std::to_string(action));
  return s[action];
}

double TrueRewardScorer::score(const env::Environment& world, const Pos& at, std::uint32_t action) const {
  if (world.position() != at) {
    throw ContractError("true-reward scorer needs the true agent state (perfect dynamics)");
  }
  if (world.done() || world.at_goal()) return 0.0;
  auto w = world.clone();
  const double before = w->terminal_reward();
  w->step(action);
  return w->terminal_reward() - before;
}

SimState RolloutModel::start(const env::Environment& env, const History& h) const {
  SimState s;
  s.world = env.clone();
  s.pos = env.position();
  s.history = h;
  return s;
}

bool LearnedRollout::advance(SimState& s, std::uint32_t action, std::size_t plan_step) const {
  const auto p = dyn_.predict(*s.world, s.pos, action, s.history, plan_step);
  const Pos before = s.pos;
  apply_prediction(*s.world, p, s.pos);
  s.history.push(env::delta_units(*s.world, before, s.pos), action);
  s.world->advance_exogenous();
  s.reached_goal = p.done_prob <= 0.5 && s.world->goal_at(s.pos);
  s.ended = p.done_prob > 0.5 || s.reached_goal;
  return s.ended;
}

bool PerfectRollout::advance(SimState& s, std::uint32_t action, std::size_t) const {
  if (s.ended) return true;
  const Pos before = s.pos;
  s.world->step(action);
  s.pos = s.world->position();
  s.history.push(env::delta_units(*s.world, before, s.pos), action);
  s.reached_goal = s.world->at_goal();
  s.ended = s.world->done() || s.reached_goal;
  return s.ended;
}

CandidateOutcome evaluate_candidate(const env::Environment& env, const History& h, const StepScorer& scorer,
                                    const RolloutModel& model, std::span<const std::uint32_t> seq,
                                    const PlannerConfig& cfg) {
  CandidateOutcome out;
  SimState s = model.start(env, h);
  double total = 0.0, best = -std::numeric_limits<double>::infinity(), disc = 1.0;
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const double term = disc * scorer.score(*s.world, s.pos, seq[k]);
    total += term;
    best = std::max(best, term);
    const bool was_ended = s.ended;
    const bool ended = model.advance(s, seq[k], k);
    disc *= cfg.gamma;
    if (ended && !was_ended) {
      out.done_step = int(k);
      if (s.reached_goal) out.goal_step = int(k);
    }
    if (ended && cfg.done_mode == DoneMode::truncate) break;
  }
  out.ret = cfg.aggregator == Aggregator::max ? (seq.empty() ? 0.0 : best) : total;
  return out;
}

double evaluate_sequence(const env::Environment& env, const History& h, const StepScorer& scorer,
                         const RolloutModel& model, std::span<const std::uint32_t> seq,
                         const PlannerConfig& cfg) {
  return evaluate_candidate(env, h, scorer, model, seq, cfg).ret;
}

bool better_candidate(const CandidateOutcome& a, const CandidateOutcome& b) {
  const bool ga = a.goal_step >= 0, gb = b.goal_step >= 0;
  if (ga != gb) return ga;
  if (ga && a.goal_step != b.goal_step) return a.goal_step < b.goal_step;
  return a.ret > b.ret;
}

namespace {

struct Tally {
  PlanResult res;
  CandidateOutcome best;
  double sum = 0.0;
  std::vector<double> first_sum;
  std::vector<std::size_t> first_n;
  bool any = false;

  explicit Tally(std::size_t actions) : first_sum(actions, 0.0), first_n(actions, 0) {}

  void add(std::span<const std::uint32_t> seq, const CandidateOutcome& c) {
    const double r = c.ret;
    if (!any || better_candidate(c, best)) {
      best = c;
      res.best_return = r;
      res.goal_step = c.goal_step;
      res.best_sequence.assign(seq.begin(), seq.end());
      res.action = seq[0];
    }
    res.min_return = any ? std::min(res.min_return, r) : r;
    any = true;
    sum += r;
    first_sum[seq[0]] += r;
    ++first_n[seq[0]];
    ++res.evaluated;
  }

  PlanResult finish() {
    res.mean_return = sum / double(res.evaluated);
    res.chosen_first_mean = first_sum[res.action] / double(first_n[res.action]);
    return res;
  }
};

}  // namespace

PlanResult exhaustive_plan(const env::Environment& env, const History& h, const StepScorer& scorer,
                           const RolloutModel& model, const PlannerConfig& cfg) {
  cfg.validate();
  const std::size_t A = env.action_count(), H = cfg.horizon;
  double count = std::pow(double(A), double(H));
  if (count > double(kExhaustiveBudget)) {
    throw ContractError("exhaustive_plan: " + std::to_string(A) + "^" + std::to_string(H) +
                        " sequences exceed the budget of " + std::to_string(kExhaustiveBudget));
  }
  Tally tally(A);
  std::vector<std::uint32_t> seq(H, 0);
  while (true) {
    tally.add(seq, evaluate_candidate(env, h, scorer, model, seq, cfg));
    std::size_t k = H;
    while (k > 0) {
      --k;
      if (++seq[k] < A) break;
      seq[k] = 0;
      if (k == 0) return tally.finish();
    }
  }
}

PlanResult mpc_plan(const env::Environment& env, const History& h, const StepScorer& scorer,
                    const RolloutModel& model, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.enumerate) return exhaustive_plan(env, h, scorer, model, cfg);
  const std::size_t A = env.action_count();
  Tally tally(A);
  std::vector<std::uint32_t> seq(cfg.horizon);
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    for (auto& a : seq) a = static_cast<std::uint32_t>(uniform_int(rng, 0, int(A) - 1));
    tally.add(seq, evaluate_candidate(env, h, scorer, model, seq, cfg));
  }
  return tally.finish();
}

std::uint32_t PlannerPolicy::act(const env::Environment& env, const History& h) {
  return mpc_plan(env, h, *scorer_, *model_, cfg_, rng_).action;
}

std::uint32_t RandomPolicy::act(const env::Environment& env, const History&) {
  return static_cast<std::uint32_t>(uniform_int(rng_, 0, int(env.action_count()) - 1));
}

EpisodeResult run_episode(env::Environment& env, Policy& policy, std::uint64_t policy_seed) {
  policy.begin_episode(policy_seed);
  History h;
  EpisodeResult r;
  r.trajectory.states.push_back(env.snapshot());
  while (!env.terminated()) {
    const std::uint32_t a = policy.act(env, h);
    const Pos before = env.position();
    env.step(a);
    h.push(env::delta_units(env, before, env.position()), a);
    r.trajectory.actions.push_back(a);
    r.trajectory.states.push_back(env.snapshot());
  }
  r.trajectory.terminal_reward = env.terminal_reward();
  r.trajectory.done = env.done();
  r.ret = env.terminal_reward();
  r.steps = env.step_count();
  r.reached_goal = env.at_goal();
  return r;
}

EpisodeResult run_episode(const env::EnvSpec& spec, Policy& policy, std::uint64_t seed) {
  auto e = env::make_env(spec);
  e->reset(seed);
  return run_episode(*e, policy, derive_seed(seed, "policy"));
}

}  // namespace sap
