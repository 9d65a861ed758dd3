#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "sap/checkpoint.hpp"
#include "sap/env/bank.hpp"
#include "sap/mlp.hpp"
#include "sap/optim.hpp"

namespace sap {

inline constexpr std::size_t kHistory = 3;
inline constexpr std::size_t kPlanStepSlots = 12;

// Recent agent motion, most recent first; zero / -1 at episode start.
struct History {
  std::array<std::array<double, 3>, kHistory> deltas{};
  std::array<int, kHistory> actions{-1, -1, -1};

  void push(std::span<const double> delta, std::uint32_t action);
};

// Input: [dynamics window | action one-hot | (platformer) 3 previous actions one-hot |
//         3 recent deltas | (platformer) planning-step one-hot].
// Output: [delta (2 or 3) | (platformer) done logit].
struct DynamicsModel {
  env::EnvId env = env::EnvId::gridworld;
  std::size_t action_count = 0;
  std::size_t window_width = 0;
  std::size_t delta_dims = 0;
  bool done_head = false;
  bool action_history = false;
  bool plan_step = false;
  ad::Mlp net;

  static DynamicsModel create(env::EnvId env, const std::vector<std::size_t>& hidden, std::uint64_t seed);
  std::size_t extra_width() const;
  std::size_t input_width() const { return window_width + extra_width(); }
  std::size_t output_width() const { return delta_dims + (done_head ? 1 : 0); }
};

std::vector<std::size_t> default_dyn_hidden(env::EnvId env);

// Everything after the window.
void encode_dyn_extras(const DynamicsModel& m, std::uint32_t action, const History& h,
                       std::size_t plan_step, std::span<double> out);

struct Prediction {
  std::array<double, 3> delta{};  // world units
  double done_prob = 0.0;
};

// Frozen evaluator. For static worlds the window part of the first layer is
// cached per position; an instance is therefore not safe to share between threads.
class DynamicsEvaluator {
 public:
  DynamicsEvaluator() = default;
  explicit DynamicsEvaluator(const DynamicsModel& model);

  const DynamicsModel& model() const { return model_; }
  Prediction predict(std::span<const double> window, std::uint32_t action, const History& h,
                     std::size_t plan_step) const;
  Prediction predict(const env::Environment& world, const env::Pos& at, std::uint32_t action,
                     const History& h, std::size_t plan_step) const;

 private:
  Prediction finish(std::span<const double> proj, std::uint32_t action, const History& h,
                    std::size_t plan_step) const;

  DynamicsModel model_;
  ad::FrozenMlp net_;
  mutable std::unordered_map<std::uint64_t, std::vector<double>> cache_;
  mutable std::string cache_world_;
};

Prediction predict_next(const DynamicsModel& model, std::span<const double> window, std::uint32_t action,
                        const History& h, std::size_t plan_step = 0);

// Lattice step from a prediction: rounds, clamps into the world. Returns true
// if clamping was needed.
bool apply_prediction(const env::Environment& world, const Prediction& p, env::Pos& pos);

struct RolloutResult {
  std::vector<env::Pos> positions;  // positions[0] is the start
  int done_step = -1;               // index of the action after which done was predicted
  bool clamped = false;
};

// Recursive prediction from the start state; windows are re-read from the
// true static map (monsters advanced with their patrol rule).
RolloutResult rollout(const DynamicsEvaluator& dyn, const env::Environment& start, const History& h,
                      std::span<const std::uint32_t> actions);

struct DynTrainConfig {
  ad::LrSchedule lr{3e-4, std::nullopt, 3e-4};
  std::size_t batch = 64;
  std::size_t iterations = 2000;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden;  // empty -> env default
  double holdout = 0.2;
  std::size_t eval_every = 500;
};

struct DynLogRow {
  std::size_t iteration = 0;
  double delta_loss = 0.0;
  double done_loss = 0.0;
  double heldout_accuracy = -1.0;
};

struct Transition {
  std::size_t trajectory = 0;
  std::size_t t = 0;
  std::uint32_t action = 0;
  History history;
  std::array<double, 3> delta{};
  bool done = false;
};

std::vector<Transition> bank_transitions(const env::TrajectoryBank& bank,
                                         const std::vector<std::size_t>& trajectories);

struct DynTrainResult {
  DynamicsModel model;
  std::vector<DynLogRow> log;
  std::vector<std::size_t> train_trajectories;
  std::vector<std::size_t> heldout_trajectories;
  double heldout_accuracy = -1.0;
};

DynTrainResult train_dynamics(const env::TrajectoryBank& bank, const DynTrainConfig& cfg);

// Fraction of transitions whose rounded predicted next position is exact.
double next_position_accuracy(const DynamicsModel& model, const env::TrajectoryBank& bank,
                              const std::vector<Transition>& transitions);

void save_dynamics(const std::filesystem::path& path, const DynamicsModel& model,
                   const std::map<std::string, std::string>& meta = {});
DynamicsModel load_dynamics(const std::filesystem::path& path,
                            std::map<std::string, std::string>* meta = nullptr);
void write_dyn_log(const std::filesystem::path& path, const std::vector<DynLogRow>& log,
                   const std::string& header_comment = "");

}  // namespace sap
