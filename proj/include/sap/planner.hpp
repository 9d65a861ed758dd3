#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sap/dynamics.hpp"
#include "sap/env/bank.hpp"
#include "sap/reward.hpp"
#include "sap/rng.hpp"

namespace sap {

enum class DoneMode { truncate, ignore };

struct PlannerConfig {
  std::size_t horizon = 4;
  std::size_t samples = 128;
  double gamma = 1.0;
  Aggregator aggregator = Aggregator::sum;
  std::uint64_t seed = 0;
  DoneMode done_mode = DoneMode::truncate;
  bool enumerate = false;  // evaluate all |A|^H sequences instead of sampling

  void validate() const;
};

PlannerConfig default_planner(env::EnvId env);

// Per-step score of taking `action` with the agent at `at` in `world`.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual double score(const env::Environment& world, const env::Pos& at, std::uint32_t action) const = 0;
};

// Learned scoring model with a per-position (static worlds) or per-window cache.
class LearnedScorer final : public StepScorer {
 public:
  explicit LearnedScorer(const ScoringModel& model) : eval_(model) {}
  double score(const env::Environment& world, const env::Pos& at, std::uint32_t action) const override;
  const ScoreEvaluator& evaluator() const { return eval_; }

 private:
  const std::vector<double>& scores_at(const env::Environment& world, const env::Pos& at) const;
  ScoreEvaluator eval_;
  mutable std::unordered_map<std::uint64_t, std::vector<double>> by_pos_;
  mutable std::unordered_map<std::string, std::vector<double>> by_window_;
  mutable std::string cache_world_;
};

// Exact per-step reward from the simulator: the change in terminal reward
// caused by the action. Only meaningful when `world` holds the true agent state
// at `at` (perfect-dynamics rollouts).
class TrueRewardScorer final : public StepScorer {
 public:
  double score(const env::Environment& world, const env::Pos& at, std::uint32_t action) const override;
};

// Candidate state during a rollout.
struct SimState {
  std::unique_ptr<env::Environment> world;
  env::Pos pos{};
  History history;
  bool ended = false;
  bool reached_goal = false;  // ended at the goal rather than by dying
};

class RolloutModel {
 public:
  virtual ~RolloutModel() = default;
  SimState start(const env::Environment& env, const History& h) const;
  // Applies one action; returns true when the step ends the episode.
  virtual bool advance(SimState& s, std::uint32_t action, std::size_t plan_step) const = 0;
};

class LearnedRollout final : public RolloutModel {
 public:
  explicit LearnedRollout(const DynamicsModel& model) : dyn_(model) {}
  bool advance(SimState& s, std::uint32_t action, std::size_t plan_step) const override;

 private:
  DynamicsEvaluator dyn_;
};

class PerfectRollout final : public RolloutModel {
 public:
  bool advance(SimState& s, std::uint32_t action, std::size_t plan_step) const override;
};

struct PlanResult {
  std::uint32_t action = 0;
  std::vector<std::uint32_t> best_sequence;
  double best_return = 0.0;
  double mean_return = 0.0;
  double min_return = 0.0;
  double chosen_first_mean = 0.0;  // mean return of candidates starting with `action`
  std::size_t evaluated = 0;
  int goal_step = -1;  // of the chosen candidate, -1 if it does not reach the goal
};

struct CandidateOutcome {
  double ret = 0.0;
  int goal_step = -1;  // index of the action that reaches the goal
  int done_step = -1;  // index of the action after which the episode ends
};

// Discounted return of one sequence (truncated after a done step in truncate mode).
CandidateOutcome evaluate_candidate(const env::Environment& env, const History& h, const StepScorer& scorer,
                                    const RolloutModel& model, std::span<const std::uint32_t> seq,
                                    const PlannerConfig& cfg);
double evaluate_sequence(const env::Environment& env, const History& h, const StepScorer& scorer,
                         const RolloutModel& model, std::span<const std::uint32_t> seq,
                         const PlannerConfig& cfg);

// Candidate order: reaching the goal beats not reaching it, an earlier goal
// beats a later one, then the higher return wins.
bool better_candidate(const CandidateOutcome& a, const CandidateOutcome& b);

// Random shooting: N uniform sequences (with replacement) of length H; ties
// go to the first sampled. With cfg.enumerate every sequence is evaluated in
// lexicographic order instead.
PlanResult mpc_plan(const env::Environment& env, const History& h, const StepScorer& scorer,
                    const RolloutModel& model, const PlannerConfig& cfg, Rng& rng);

inline constexpr std::size_t kExhaustiveBudget = 1000000;

// All |A|^H sequences in lexicographic order. ContractError above the budget.
PlanResult exhaustive_plan(const env::Environment& env, const History& h, const StepScorer& scorer,
                           const RolloutModel& model, const PlannerConfig& cfg);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  virtual std::uint32_t act(const env::Environment& env, const History& h) = 0;
};

class PlannerPolicy final : public Policy {
 public:
  PlannerPolicy(std::shared_ptr<const StepScorer> scorer, std::shared_ptr<const RolloutModel> model,
                PlannerConfig cfg)
      : scorer_(std::move(scorer)), model_(std::move(model)), cfg_(cfg) { cfg_.validate(); }
  void begin_episode(std::uint64_t seed) override { rng_.seed(derive_seed(cfg_.seed, seed)); }
  std::uint32_t act(const env::Environment& env, const History& h) override;
  const PlannerConfig& config() const { return cfg_; }

 private:
  std::shared_ptr<const StepScorer> scorer_;
  std::shared_ptr<const RolloutModel> model_;
  PlannerConfig cfg_;
  Rng rng_;
};

class RandomPolicy final : public Policy {
 public:
  void begin_episode(std::uint64_t seed) override { rng_.seed(seed); }
  std::uint32_t act(const env::Environment& env, const History& h) override;

 private:
  Rng rng_;
};

struct EpisodeResult {
  env::Trajectory trajectory;
  double ret = 0.0;
  std::size_t steps = 0;
  bool reached_goal = false;
};

// Resets a fresh env with the episode seed and replans every step.
EpisodeResult run_episode(const env::EnvSpec& spec, Policy& policy, std::uint64_t seed);
// Same from the env's current state.
EpisodeResult run_episode(env::Environment& env, Policy& policy, std::uint64_t policy_seed);

}  // namespace sap
