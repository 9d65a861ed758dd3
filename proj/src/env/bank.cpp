#include "sap/env/bank.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"

namespace sap::env {

using json = nlohmann::ordered_json;

std::string ExplorationPolicy::describe() const {
  std::ostringstream os;
  if (kind == Kind::uniform_random) {
    os << "uniform-random";
  } else {
    os << "epsilon-noisy(base=" << base_action << ",eps=" << epsilon << ")";
  }
  if (scattered_starts) os << "+scattered";
  if (max_steps) os << "+cap" << max_steps;
  return os.str();
}

ExplorationPolicy default_exploration(EnvId env) {
  ExplorationPolicy p;
  switch (env) {
    case EnvId::gridworld:
      p.scattered_starts = true;
      break;
    case EnvId::platformer:
      p.kind = ExplorationPolicy::Kind::epsilon_noisy;
      p.base_action = Platformer::right;
      p.epsilon = 0.4;
      p.scattered_starts = true;
      break;
    case EnvId::reacher:
      p.scattered_starts = true;
      p.max_steps = 100;
      break;
  }
  return p;
}

Pos sample_start(const Environment& env, Rng& rng) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Pos p{};
    switch (env.id()) {
      case EnvId::gridworld:
        p = {uniform_int(rng, 1, 8), uniform_int(rng, 1, 8), 0};
        break;
      case EnvId::platformer: {
        const auto& lv = static_cast<const Platformer&>(env).level();
        p = {uniform_int(rng, 0, lv.cols - 10), 1, 0};
        if (lv.at(p[0], 0) != Tile::ground) continue;
        break;
      }
      case EnvId::reacher:
        p = {uniform_int(rng, 85, 115), uniform_int(rng, 10, 118), uniform_int(rng, 0, 20)};
        break;
    }
    if (env.can_place(p)) return p;
  }
  throw ContractError("sample_start: no legal start cell found");
}

Trajectory record_episode(Environment& env, std::size_t max_steps,
                          const std::function<std::uint32_t(const Environment&)>& choose) {
  Trajectory t;
  t.states.push_back(env.snapshot());
  while (!env.terminated() && t.actions.size() < max_steps) {
    const std::uint32_t a = choose(env);
    env.step(a);
    t.actions.push_back(a);
    t.states.push_back(env.snapshot());
  }
  t.terminal_reward = env.terminal_reward();
  t.done = env.done();
  return t;
}

TrajectoryBank generate_exploration_bank(const EnvSpec& spec, const ExplorationPolicy& policy,
                                         std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractError("generate_exploration_bank: n must be at least 1");
  TrajectoryBank bank;
  bank.spec = spec;
  bank.policy = policy;
  bank.seed = seed;
  auto env = make_env(spec);
  const std::size_t cap = policy.max_steps ? policy.max_steps : spec.step_cap;
  const std::uint32_t na = static_cast<std::uint32_t>(spec.action_count);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    if (policy.scattered_starts) {
      env->place_agent(sample_start(*env, rng));
    } else {
      env->reset(rng());
    }
    auto choose = [&](const Environment&) -> std::uint32_t {
      if (policy.kind == ExplorationPolicy::Kind::epsilon_noisy && uniform01(rng) >= policy.epsilon) {
        return policy.base_action;
      }
      return static_cast<std::uint32_t>(uniform_int(rng, 0, int(na) - 1));
    };
    bank.trajectories.push_back(record_episode(*env, cap, choose));
  }
  return bank;
}

bool replay_check(const EnvSpec& spec, const Trajectory& traj, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (traj.states.size() != traj.actions.size() + 1) return fail("state/action count mismatch");
  auto env = make_env(spec);
  env->restore(traj.states[0]);
  for (std::size_t t = 0; t < traj.actions.size(); ++t) {
    env->step(traj.actions[t]);
    if (env->snapshot() != traj.states[t + 1]) return fail("state mismatch at step " + std::to_string(t + 1));
  }
  if (env->terminal_reward() != traj.terminal_reward) return fail("terminal reward mismatch");
  if (env->done() != traj.done) return fail("done flag mismatch");
  return true;
}

namespace {

json policy_json(const ExplorationPolicy& p) {
  json j;
  j["kind"] = p.kind == ExplorationPolicy::Kind::uniform_random ? "uniform-random" : "epsilon-noisy";
  j["base_action"] = p.base_action;
  j["epsilon"] = p.epsilon;
  j["scattered_starts"] = p.scattered_starts;
  j["max_steps"] = p.max_steps;
  return j;
}

ExplorationPolicy policy_from_json(const json& j) {
  ExplorationPolicy p;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "uniform-random") p.kind = ExplorationPolicy::Kind::uniform_random;
  else if (kind == "epsilon-noisy") p.kind = ExplorationPolicy::Kind::epsilon_noisy;
  else throw ConfigError("bank header: unknown policy kind '" + kind + "'");
  p.base_action = j.at("base_action").get<std::uint32_t>();
  p.epsilon = j.at("epsilon").get<double>();
  p.scattered_starts = j.at("scattered_starts").get<bool>();
  p.max_steps = j.at("max_steps").get<std::size_t>();
  return p;
}

}  // namespace

std::string bank_to_jsonl(const TrajectoryBank& bank) {
  std::string out;
  json h;
  h["format_version"] = kBankFormatVersion;
  h["env"] = std::string(env_name(bank.spec.env));
  h["config"] = bank.spec.config;
  h["world_seed"] = bank.spec.seed;
  h["step_cap"] = bank.spec.step_cap;
  h["seed"] = bank.seed;
  h["policy"] = policy_json(bank.policy);
  h["n"] = bank.trajectories.size();
  if (!bank.meta.empty()) h["meta"] = bank.meta;
  out += h.dump() + "\n";
  for (const auto& t : bank.trajectories) {
    json j;
    j["states"] = t.states;
    j["actions"] = t.actions;
    j["terminal_reward"] = t.terminal_reward;
    j["done"] = t.done;
    out += j.dump() + "\n";
  }
  return out;
}

TrajectoryBank bank_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  TrajectoryBank bank;
  std::size_t expected = 0;
  try {
    if (!std::getline(in, line)) throw ConfigError("empty bank file");
    ++lineno;
    const json h = json::parse(line);
    if (h.at("format_version").get<int>() != kBankFormatVersion) {
      throw ConfigError("unsupported bank format version");
    }
    bank.spec = make_spec(parse_env_id(h.at("env").get<std::string>()),
                          h.at("config").get<std::string>(), h.at("world_seed").get<std::uint64_t>(),
                          h.at("step_cap").get<std::size_t>());
    bank.seed = h.at("seed").get<std::uint64_t>();
    bank.policy = policy_from_json(h.at("policy"));
    expected = h.at("n").get<std::size_t>();
    if (h.contains("meta")) bank.meta = h.at("meta").get<std::map<std::string, std::string>>();
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      Trajectory t;
      t.states = j.at("states").get<std::vector<Snapshot>>();
      t.actions = j.at("actions").get<std::vector<std::uint32_t>>();
      t.terminal_reward = j.at("terminal_reward").get<double>();
      t.done = j.at("done").get<bool>();
      bank.trajectories.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ConfigError("bank line " + std::to_string(lineno) + ": " + e.what());
  }
  if (bank.trajectories.size() != expected) {
    throw ConfigError("bank header announces " + std::to_string(expected) + " trajectories, found " +
                      std::to_string(bank.trajectories.size()));
  }
  return bank;
}

void write_bank(const std::filesystem::path& path, const TrajectoryBank& bank) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write bank " + path.string());
  f << bank_to_jsonl(bank);
}

TrajectoryBank read_bank(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("bank not found: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return bank_from_jsonl(ss.str());
}

}  // namespace sap::env
