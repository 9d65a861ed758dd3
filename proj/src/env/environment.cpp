#include "sap/env/environment.hpp"

#include <algorithm>

#include "sap/env/gridworld.hpp"
#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"

namespace sap::env {

std::string_view env_name(EnvId id) {
  switch (id) {
    case EnvId::gridworld: return "gridworld";
    case EnvId::platformer: return "platformer";
    case EnvId::reacher: return "reacher";
  }
  return "?";
}

EnvId parse_env_id(std::string_view name) {
  if (name == "gridworld") return EnvId::gridworld;
  if (name == "platformer") return EnvId::platformer;
  if (name == "reacher") return EnvId::reacher;
  throw ConfigError("unknown env id '" + std::string(name) + "'");
}

std::vector<std::string> config_names(EnvId env) {
  switch (env) {
    case EnvId::gridworld: return {"World-1", "World-2"};
    case EnvId::platformer: return {"Level-A", "Level-B", "Level-C"};
    case EnvId::reacher: return {"Config-A", "Config-B", "Config-C", "Config-D"};
  }
  return {};
}

std::size_t action_count_of(EnvId env) {
  switch (env) {
    case EnvId::gridworld: return 4;
    case EnvId::platformer: return 5;
    case EnvId::reacher: return 8;
  }
  return 0;
}

EnvSpec make_spec(EnvId env, std::string config, std::uint64_t seed,
                  std::optional<std::size_t> step_cap) {
  const auto names = config_names(env);
  if (std::find(names.begin(), names.end(), config) == names.end()) {
    throw ConfigError("unknown config '" + config + "' for env " + std::string(env_name(env)));
  }
  EnvSpec s;
  s.env = env;
  s.config = std::move(config);
  s.seed = seed;
  s.action_count = action_count_of(env);
  switch (env) {
    case EnvId::gridworld: s.step_cap = 30; break;
    case EnvId::platformer: s.step_cap = 400; break;
    case EnvId::reacher: s.step_cap = 2000; break;
  }
  if (step_cap) {
    if (*step_cap == 0) throw ConfigError("step cap must be positive");
    s.step_cap = *step_cap;
  }
  return s;
}

std::unique_ptr<Environment> make_env(const EnvSpec& spec) {
  switch (spec.env) {
    case EnvId::gridworld: return std::make_unique<GridWorld>(spec);
    case EnvId::platformer: return std::make_unique<Platformer>(spec);
    case EnvId::reacher: return std::make_unique<Reacher>(spec);
  }
  throw ConfigError("unknown env id");
}

std::vector<double> delta_units(const Environment& env, const Pos& from, const Pos& to) {
  std::vector<double> d(env.delta_dims());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (to[i] - from[i]) * env.unit();
  return d;
}

}  // namespace sap::env
