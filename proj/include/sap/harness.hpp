#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sap/baselines.hpp"
#include "sap/dynamics.hpp"
#include "sap/env/bank.hpp"
#include "sap/planner.hpp"
#include "sap/reward.hpp"

namespace sap {

// Everything one experiment needs. JSON files overlay the env defaults; keys
// not listed here are rejected.
struct ExperimentConfig {
  env::EnvId env = env::EnvId::gridworld;
  std::string train_config;
  std::vector<std::string> test_configs;
  std::uint64_t world_seed = env::kDefaultWorldSeed;
  std::uint64_t master_seed = 0;

  std::size_t bank_size = 100;
  env::ExplorationPolicy exploration;

  ScoreTrainConfig score;
  bool train_nospatial = false;  // also fit the one-region scorer
  DynTrainConfig dyn;
  bool learned_dynamics = true;  // false: plan with the true simulator
  PlannerConfig planner;
  BcTrainConfig bc;
  std::size_t bc_sap_episodes = 100;

  // Methods run by `eval`: sap, sap_nospatial, sap_perfect, mbhp, greedy,
  // bc_random, bc_sap, privileged_bc.
  std::vector<std::string> methods;
  std::size_t eval_episodes = 100;
  std::vector<std::size_t> horizon_sweep{8, 10, 12};
  std::string out_dir = "out";

  static ExperimentConfig defaults(env::EnvId env);
  nlohmann::ordered_json to_json() const;
  // Throws ConfigError naming the offending field.
  static ExperimentConfig from_json(const nlohmann::json& j);

  env::EnvSpec spec(const std::string& config) const;
  // "return" or "steps" (steps-to-goal, reacher).
  std::string metric() const;
  // Sub-seeds are fanned out from master_seed; the per-module seed fields are
  // overwritten by apply_seeds().
  void apply_seeds();
  void validate() const;
};

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"sap",   "sap_nospatial", "sap_perfect", "mbhp",
                                          "greedy", "bc_random",    "bc_sap",      "privileged_bc"};
  return m;
}

// Reads a JSON config; syntax errors report line and column.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");

// FNV-1a over the canonical JSON of the config, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
  double sd = 0.0;
};

// Normal-approximation 95% interval: 1.96 s / sqrt(n). ContractError if n < 2.
Interval compute_ci(std::span<const double> samples);

struct MetricsRow {
  std::string method;
  std::string env_config;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  double ci95 = 0.0;
  std::size_t n = 0;
};

struct MetricsReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;

  void add(const std::string& method, const std::string& env_config, const std::string& metric,
           std::span<const double> samples);
  const MetricsRow& find(const std::string& method, const std::string& env_config) const;
  std::string to_csv() const;
  std::string to_table() const;
  void write(const std::filesystem::path& csv_path) const;  // also writes <stem>.txt
};

// Artifacts of one run, in memory.
struct Pipeline {
  ExperimentConfig cfg;
  std::string hash;
  std::optional<env::TrajectoryBank> bank;
  std::optional<ScoreTrainResult> scorer;
  std::optional<ScoreTrainResult> scorer_nospatial;
  std::optional<DynTrainResult> dynamics;

  explicit Pipeline(ExperimentConfig c);

  const env::TrajectoryBank& ensure_bank();
  const ScoringModel& ensure_scorer();
  const ScoringModel& ensure_scorer_nospatial();
  // Null when the config plans with the true simulator.
  const DynamicsModel* ensure_dynamics();

  std::shared_ptr<const RolloutModel> rollout();
  // Builds the policy for a method name (training BC models on demand).
  std::unique_ptr<Policy> policy(const std::string& method);
  std::unique_ptr<Policy> planner_policy(std::shared_ptr<const StepScorer> scorer, const PlannerConfig& pc,
                                         bool perfect = false);

  // Per-episode metric on one config; episode i uses the same seed for every method.
  std::vector<double> evaluate(Policy& policy, const std::string& env_config, std::size_t episodes);
  std::vector<double> evaluate(const std::string& method, const std::string& env_config);

 private:
  std::map<std::string, BcModel> bc_cache_;
  std::shared_ptr<const RolloutModel> rollout_;
  const BcModel& bc_model(const std::string& key);
};

// Paths inside out_dir.
struct ArtifactPaths {
  std::filesystem::path bank, scorer, scorer_nospatial, score_log, dynamics, dyn_log, report;
  explicit ArtifactPaths(const std::filesystem::path& out);
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool force = false;
};

ExperimentConfig resolve_config(const CommandOptions& opt);

// Each returns the path of its main output.
std::filesystem::path cmd_gen_data(const CommandOptions& opt);
std::filesystem::path cmd_train_score(const CommandOptions& opt);
std::filesystem::path cmd_train_dyn(const CommandOptions& opt);
std::filesystem::path cmd_eval(const CommandOptions& opt);
// which: spatial | temporal | horizon | egocentric-bc
std::filesystem::path cmd_ablate(const CommandOptions& opt, const std::string& which);
// One greedy-map CSV per test config; returns the first.
std::filesystem::path cmd_viz(const CommandOptions& opt);

MetricsReport run_eval(Pipeline& p);
MetricsReport run_ablation(Pipeline& p, const std::string& which);
std::string greedy_map_csv(const ScoringModel& model, const env::Environment& level, const std::string& hash,
                           std::uint64_t seed);

}  // namespace sap
