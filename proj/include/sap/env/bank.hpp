#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sap/env/environment.hpp"
#include "sap/rng.hpp"

namespace sap::env {

inline constexpr int kBankFormatVersion = 1;

// states.size() == actions.size() + 1; states[t] is the state acted on by actions[t].
struct Trajectory {
  std::vector<Snapshot> states;
  std::vector<std::uint32_t> actions;
  double terminal_reward = 0.0;
  bool done = false;

  std::size_t length() const { return actions.size(); }
};

struct ExplorationPolicy {
  enum class Kind { uniform_random, epsilon_noisy };
  Kind kind = Kind::uniform_random;
  std::uint32_t base_action = 0;  // epsilon_noisy: scripted action
  double epsilon = 0.4;           // probability of a uniform draw over all actions
  bool scattered_starts = false;  // random legal start cell instead of reset()
  std::size_t max_steps = 0;      // 0 -> spec step cap

  std::string describe() const;
};

struct TrajectoryBank {
  EnvSpec spec;
  ExplorationPolicy policy;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
  std::map<std::string, std::string> meta;  // provenance tags (config hash, ...)
};

// Default exploration for an env: uniform for gridworld, epsilon-noisy
// always-right for the platformer, uniform with short episodes for reacher.
ExplorationPolicy default_exploration(EnvId env);

// Random legal start used for scattered exploration.
Pos sample_start(const Environment& env, Rng& rng);

TrajectoryBank generate_exploration_bank(const EnvSpec& spec, const ExplorationPolicy& policy,
                                         std::size_t n, std::uint64_t seed);

// Runs one episode from env's current state; the callback picks each action.
Trajectory record_episode(Environment& env, std::size_t max_steps,
                          const std::function<std::uint32_t(const Environment&)>& choose);

// Re-simulates from states[0]; true if every snapshot and the reward match.
bool replay_check(const EnvSpec& spec, const Trajectory& traj, std::string* why = nullptr);

std::string bank_to_jsonl(const TrajectoryBank& bank);
TrajectoryBank bank_from_jsonl(const std::string& text);
void write_bank(const std::filesystem::path& path, const TrajectoryBank& bank);
TrajectoryBank read_bank(const std::filesystem::path& path);

}  // namespace sap::env
