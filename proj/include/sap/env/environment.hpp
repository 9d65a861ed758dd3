#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sap::env {

enum class EnvId { gridworld, platformer, reacher };

std::string_view env_name(EnvId id);
EnvId parse_env_id(std::string_view name);

// Integer lattice coordinates: gridworld (row, col, 0), platformer
// (col, row-from-bottom, 0), reacher voxel indices (ix, iy, iz).
using Pos = std::array<int, 3>;

struct EnvSpec {
  EnvId env = EnvId::gridworld;
  std::string config;
  std::size_t action_count = 0;
  std::size_t step_cap = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kDefaultWorldSeed = 20190617;

// Fills action count and cap for the env; validates the config name.
EnvSpec make_spec(EnvId env, std::string config, std::uint64_t seed = kDefaultWorldSeed,
                  std::optional<std::size_t> step_cap = std::nullopt);
std::vector<std::string> config_names(EnvId env);
std::size_t action_count_of(EnvId env);

// Flat numeric state record; layout documented per environment.
using Snapshot = std::vector<double>;

class Environment {
 public:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {}
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  EnvId id() const { return spec_.env; }
  std::size_t action_count() const { return spec_.action_count; }
  // Identifies the static map (env, config, world seed); caches keyed by
  // position are only valid within one key.
  std::string world_key() const {
    return std::string(env_name(spec_.env)) + "/" + spec_.config + "/" + std::to_string(spec_.seed);
  }

  virtual std::unique_ptr<Environment> clone() const = 0;

  // Default start state for an episode seed.
  virtual void reset(std::uint64_t episode_seed) = 0;
  // Fresh episode (step 0, exogenous state at its initial layout) with the
  // agent at p. Throws ContractError if p is not a legal agent cell.
  virtual void place_agent(const Pos& p) = 0;
  virtual bool can_place(const Pos& p) const = 0;

  virtual void step(std::uint32_t action) = 0;

  // Trajectory "done" flag: death (platformer), goal (reacher), never (gridworld).
  virtual bool done() const = 0;
  virtual bool at_goal() const = 0;
  bool terminated() const { return done() || at_goal() || step_count() >= spec_.step_cap; }
  virtual std::size_t step_count() const = 0;
  virtual double terminal_reward() const = 0;

  virtual Pos position() const = 0;
  virtual bool in_bounds(const Pos& p) const = 0;
  // Goal predicate evaluated at an arbitrary position.
  virtual bool goal_at(const Pos& p) const = 0;

  // Number of coordinates that move (2 or 3) and world units per lattice step.
  virtual std::size_t delta_dims() const = 0;
  virtual double unit() const { return 1.0; }

  // Advances everything except the agent by one step (platformer monsters).
  virtual void advance_exogenous() {}
  virtual bool static_world() const { return true; }

  virtual Snapshot snapshot() const = 0;
  virtual void restore(const Snapshot& s) = 0;

 private:
  EnvSpec spec_;
};

std::unique_ptr<Environment> make_env(const EnvSpec& spec);

// Position delta in world units, truncated to delta_dims().
std::vector<double> delta_units(const Environment& env, const Pos& from, const Pos& to);

inline std::uint64_t pos_key(const Pos& p) {
  return (std::uint64_t(std::uint32_t(p[0] + 1024)) << 42) ^ (std::uint64_t(std::uint32_t(p[1] + 1024)) << 21) ^
         std::uint64_t(std::uint32_t(p[2] + 1024));
}

}  // namespace sap::env
