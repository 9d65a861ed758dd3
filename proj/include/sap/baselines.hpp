#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sap/env/bank.hpp"
#include "sap/mlp.hpp"
#include "sap/optim.hpp"
#include "sap/planner.hpp"

namespace sap {

enum class BcFeatures { egocentric, global };
BcFeatures parse_bc_features(const std::string& name);
std::string bc_features_name(BcFeatures f);

// Action classifier. Egocentric input is the flattened window; global input is
// a low-dimensional absolute state (gridworld position one-hot, platformer
// [x, y, vertical speed], reacher position), all scaled to about [0, 1].
struct BcModel {
  env::EnvId env = env::EnvId::gridworld;
  BcFeatures features = BcFeatures::egocentric;
  std::size_t action_count = 0;
  ad::Mlp net;

  static BcModel create(env::EnvId env, BcFeatures features, const std::vector<std::size_t>& hidden,
                        std::uint64_t seed);
};

std::size_t bc_input_width(env::EnvId env, BcFeatures features);
void bc_encode(const env::Environment& env, BcFeatures features, std::span<double> out);
std::vector<double> bc_encode(const env::Environment& env, BcFeatures features);

struct BcTrainConfig {
  ad::LrSchedule lr{1e-3, std::nullopt, 1e-4};
  std::size_t batch = 128;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  BcFeatures features = BcFeatures::egocentric;
  std::vector<std::size_t> hidden{64};
};

struct BcTrainResult {
  BcModel model;
  std::vector<double> loss;  // per iteration
};

// Cross-entropy on every (state, action) pair of the bank.
BcTrainResult train_bc(const env::TrajectoryBank& bank, const BcTrainConfig& cfg);

std::vector<double> bc_logits(const BcModel& model, std::span<const double> features);

enum class BcMode { sample, argmax };

// Sample mode draws from the softmax; argmax ties go to the lowest id.
std::uint32_t bc_act(std::span<const double> logits, BcMode mode, Rng& rng);
std::uint32_t bc_act(const BcModel& model, const env::Environment& env, BcMode mode, Rng& rng);

class BcPolicy final : public Policy {
 public:
  BcPolicy(BcModel model, BcMode mode) : model_(std::move(model)), net_(model_.net), mode_(mode) {}
  void begin_episode(std::uint64_t seed) override { rng_.seed(seed); }
  std::uint32_t act(const env::Environment& env, const History& h) override;

 private:
  BcModel model_;
  ad::FrozenMlp net_;
  BcMode mode_;
  Rng rng_;
};

// Hand-coded prior: platformer 1 for any rightward action, 0 for noop;
// reacher +0.5 / -0.5 from the y bit. Gridworld has none (UnsupportedEnvError).
double mbhp_score(env::EnvId env, std::uint32_t action);

class MbhpScorer final : public StepScorer {
 public:
  explicit MbhpScorer(env::EnvId env);
  double score(const env::Environment& world, const env::Pos& at, std::uint32_t action) const override;

 private:
  env::EnvId env_;
};

// One-step lookahead with every action enumerated.
PlannerConfig greedy_config(const PlannerConfig& base);

// Runs `policy` for n episodes (episode i reset with derive_seed(seed, i)) and
// stores them as a bank, e.g. to clone a planner.
env::TrajectoryBank collect_policy_bank(const env::EnvSpec& spec, Policy& policy, std::size_t n,
                                        std::uint64_t seed);

void save_bc(const std::filesystem::path& path, const BcModel& model,
             const std::map<std::string, std::string>& meta = {});
BcModel load_bc(const std::filesystem::path& path, std::map<std::string, std::string>* meta = nullptr);

}  // namespace sap
