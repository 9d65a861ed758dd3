#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sap/checkpoint.hpp"
#include "sap/contingency.hpp"
#include "sap/env/bank.hpp"
#include "sap/mlp.hpp"
#include "sap/optim.hpp"

namespace sap {

enum class Aggregator { sum, max };
Aggregator parse_aggregator(const std::string& name);
std::string aggregator_name(Aggregator g);

// J over a sequence of step scores. Empty: 0 under sum, ContractError under max.
double aggregate(std::span<const double> step_scores, Aggregator g);

// Shared network scoring one flattened region; output unit a * L + l holds
// the score of action a for region index l.
struct ScoringModel {
  env::EnvId env = env::EnvId::gridworld;
  SubRegionLayout layout;
  std::size_t action_count = 0;
  ad::Mlp net;

  static ScoringModel create(env::EnvId env, const std::string& layout,
                             const std::vector<std::size_t>& hidden, std::uint64_t seed);
  std::size_t regions() const { return layout.count(); }
  std::size_t unit(std::size_t action, std::size_t region) const { return action * regions() + region; }
};

std::vector<std::size_t> default_scorer_hidden(env::EnvId env);

// Graph-free scoring of windows with a snapshot of a ScoringModel.
class ScoreEvaluator {
 public:
  ScoreEvaluator() = default;
  explicit ScoreEvaluator(const ScoringModel& model);

  std::size_t action_count() const { return actions_; }
  std::size_t regions() const { return layout_.count(); }
  const SubRegionLayout& layout() const { return layout_; }

  // Network output of one region vector (all A*L units).
  void region_outputs(std::span<const double> region, std::span<double> out) const;
  // out[a] = sum_l S(W_l, a)
  void action_scores(std::span<const double> window, std::span<double> out) const;
  std::vector<double> action_scores(std::span<const double> window) const;
  double score_step(std::span<const double> window, std::uint32_t action) const;
  // Row-major [action][region].
  std::vector<double> score_matrix(std::span<const double> window) const;
  std::vector<double> region_scores(std::span<const double> window, std::uint32_t action) const;

 private:
  SubRegionLayout layout_;
  std::size_t actions_ = 0;
  ad::FrozenMlp net_;
};

double score_step(const ScoringModel& model, const env::Environment& env, const env::Pos& at,
                  std::uint32_t action);

struct ScoreTrainConfig {
  ad::LrSchedule lr{1e-3, std::nullopt, 1e-4};
  std::size_t batch = 128;
  std::size_t iterations = 1000;
  Aggregator aggregator = Aggregator::sum;
  double l1 = 0.0;
  std::size_t stride = 1;
  std::uint64_t seed = 0;
  bool spatial = true;  // false -> the whole window is one region
  std::string layout;   // empty -> env default
  std::vector<std::size_t> hidden;  // empty -> env default
  double holdout = 0.2;
  std::size_t eval_every = 500;
};

struct LabeledTrajectory {
  std::size_t trajectory = 0;      // index into the bank
  std::vector<std::size_t> steps;  // kept step indices
  double target = 0.0;
  bool done = false;
};

struct LabelResult {
  std::vector<LabeledTrajectory> labeled;
  bool no_done_warning = false;
};

// Platformer banks get the mean-future correction for trajectories alive
// at the cap; other envs keep raw rewards. Every env honours the stride.
LabelResult label_bank(const env::TrajectoryBank& bank, const ScoreTrainConfig& cfg);

struct ScoreLogRow {
  std::size_t iteration = 0;
  double loss = 0.0;
  double reg = 0.0;
  double heldout_residual = -1.0;  // < 0 when not evaluated at this iteration
};

struct ScoreTrainResult {
  ScoringModel model;
  std::vector<ScoreLogRow> log;
  std::vector<std::size_t> train_indices;    // bank trajectory indices
  std::vector<std::size_t> heldout_indices;
  double final_heldout_residual = -1.0;
  bool no_done_warning = false;
};

// Region vectors of every kept step, deduplicated into a row table.
struct ScoreDataset {
  std::size_t width = 0;
  std::size_t regions = 0;
  std::vector<double> rows;  // unique region vectors, width each
  struct Item {
    std::vector<std::uint32_t> region_rows;  // steps * regions
    std::vector<std::uint32_t> actions;      // steps
    double target = 0.0;
    bool done = false;
  };
  std::vector<Item> items;

  std::size_t row_count() const { return width ? rows.size() / width : 0; }
};

ScoreDataset build_score_dataset(const env::TrajectoryBank& bank,
                                 const std::vector<LabeledTrajectory>& labeled,
                                 const SubRegionLayout& layout);

// Fits net so aggregated step scores match the targets.
ScoreTrainResult train_scoring(const env::TrajectoryBank& bank, const ScoreTrainConfig& cfg);
// Same on a prepared dataset (all items used for training, none held out).
void fit_scoring(ScoringModel& model, const ScoreDataset& data, const std::vector<std::size_t>& train,
                 const ScoreTrainConfig& cfg, std::vector<ScoreLogRow>* log,
                 const ScoreDataset* heldout_data = nullptr,
                 const std::vector<std::size_t>* heldout = nullptr);

// J of a full trajectory under the model (all steps, configured aggregator).
double trajectory_return(const ScoreEvaluator& eval, const env::EnvSpec& spec,
                         const env::Trajectory& traj, Aggregator g = Aggregator::sum,
                         std::size_t stride = 1);

// mean |J - target| / mean |target| over dataset items.
double regression_residual(const ScoringModel& model, const ScoreDataset& data,
                           const std::vector<std::size_t>& items, Aggregator g);

struct GreedyCell {
  int row = 0;  // platformer y
  int col = 0;  // platformer x
  std::uint32_t best_action = 0;
};

// Argmax one-step score at every legal agent cell of the level (ties -> lowest id).
std::vector<GreedyCell> greedy_action_map(const ScoringModel& model, const env::Environment& level);

// Padding-anchored recovery of gridworld cell values: per type, the mean over
// actions of the score of the type's mean feature, minus the padding score.
std::vector<double> recovered_type_scores(const ScoringModel& model, const env::Environment& grid);
double score_recovery_error(const ScoringModel& model, const env::Environment& grid);

ad::CheckpointHeader scorer_header(const ScoringModel& model, std::uint64_t step);
void save_scorer(const std::filesystem::path& path, const ScoringModel& model,
                 const std::map<std::string, std::string>& meta = {});
ScoringModel load_scorer(const std::filesystem::path& path,
                         std::map<std::string, std::string>* meta = nullptr);

void write_score_log(const std::filesystem::path& path, const std::vector<ScoreLogRow>& log,
                     const std::string& header_comment = "");

}  // namespace sap
