#include "sap/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sap/checkpoint.hpp"
#include "sap/contingency.hpp"
#include "sap/env/gridworld.hpp"
#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"
#include "sap/loss.hpp"

namespace sap {

using env::EnvId;

BcFeatures parse_bc_features(const std::string& name) {
  if (name == "egocentric") return BcFeatures::egocentric;
  if (name == "global") return BcFeatures::global;
  throw ConfigError("unknown BC feature set '" + name + "' (egocentric | global)");
}

std::string bc_features_name(BcFeatures f) { return f == BcFeatures::egocentric ? "egocentric" : "global"; }

std::size_t bc_input_width(EnvId env, BcFeatures features) {
  if (features == BcFeatures::egocentric) return window_spec(env).width();
  switch (env) {
    case EnvId::gridworld: return std::size_t(env::GridWorld::kSize * env::GridWorld::kSize);
    case EnvId::platformer: return 3;
    case EnvId::reacher: return 3;
  }
  return 0;
}

void bc_encode(const env::Environment& e, BcFeatures features, std::span<double> out) {
  if (out.size() != bc_input_width(e.id(), features)) throw DimensionError("bc_encode: output width mismatch");
  if (features == BcFeatures::egocentric) {
    extract_window(e, e.position(), out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  const auto p = e.position();
  switch (e.id()) {
    case EnvId::gridworld:
      out[std::size_t(p[0] * env::GridWorld::kSize + p[1])] = 1.0;
      break;
    case EnvId::platformer: {
      const auto& pf = dynamic_cast<const env::Platformer&>(e);
      out[0] = double(p[0]) / double(pf.level().cols);
      out[1] = double(p[1]) / double(pf.level().rows);
      out[2] = double(pf.last_dy()) / 3.0;
      break;
    }
    case EnvId::reacher:
      for (int d = 0; d < 3; ++d) out[std::size_t(d)] = double(p[std::size_t(d)]) / double(env::Reacher::kGrid);
      break;
  }
}

std::vector<double> bc_encode(const env::Environment& e, BcFeatures features) {
  std::vector<double> out(bc_input_width(e.id(), features));
  bc_encode(e, features, out);
  return out;
}

BcModel BcModel::create(EnvId env, BcFeatures features, const std::vector<std::size_t>& hidden,
                        std::uint64_t seed) {
  BcModel m;
  m.env = env;
  m.features = features;
  m.action_count = env::action_count_of(env);
  std::vector<std::size_t> widths{bc_input_width(env, features)};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(m.action_count);
  m.net = ad::Mlp(widths, seed);
  return m;
}

BcTrainResult train_bc(const env::TrajectoryBank& bank, const BcTrainConfig& cfg) {
  struct Pair {
    std::size_t traj, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < bank.trajectories.size(); ++i) {
    for (std::size_t t = 0; t < bank.trajectories[i].length(); ++t) pairs.push_back({i, t});
  }
  if (pairs.empty()) throw ContractError("train_bc: the bank has no state-action pairs");

  const EnvId id = bank.spec.env;
  BcTrainResult res;
  res.model = BcModel::create(id, cfg.features, cfg.hidden, derive_seed(cfg.seed, "bc/init"));
  auto& m = res.model;
  auto params = m.net.parameters();
  ad::AdamState adam(m.net.parameter_count(), cfg.lr);
  Rng rng(derive_seed(cfg.seed, "bc/batches"));
  auto e = env::make_env(bank.spec);
  const std::size_t in = m.net.in_width();
  // Full batch when the data is small.
  const std::size_t B = std::min(cfg.batch, pairs.size());
  std::vector<double> x(B * in);
  std::vector<std::uint32_t> y(B);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t b = 0; b < B; ++b) {
      const auto& p = B == pairs.size() ? pairs[b] : pairs[std::size_t(uniform_int(rng, 0, int(pairs.size()) - 1))];
      const auto& tr = bank.trajectories[p.traj];
      e->restore(tr.states[p.t]);
      bc_encode(*e, cfg.features, std::span<double>(x.data() + b * in, in));
      y[b] = tr.actions[p.t];
    }
    const ad::Tensor loss = ad::softmax_cross_entropy(m.net.forward(ad::Tensor::from({B, in}, x)), y);
    if (!std::isfinite(loss.item())) {
      throw TrainingError("bc training: non-finite loss at iteration " + std::to_string(it), it);
    }
    ad::zero_grad(params);
    ad::backward(loss);
    adam_step(adam, params);
    res.loss.push_back(loss.item());
  }
  return res;
}

std::vector<double> bc_logits(const BcModel& model, std::span<const double> features) {
  return ad::FrozenMlp(model.net).forward(features);
}

std::uint32_t bc_act(std::span<const double> logits, BcMode mode, Rng& rng) {
  if (logits.empty()) throw ContractError("bc_act: no logits");
  const auto top = std::max_element(logits.begin(), logits.end());  // first maximum
  if (mode == BcMode::argmax) return static_cast<std::uint32_t>(top - logits.begin());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - *top);
  double u = uniform01(rng) * z;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (u < p[i]) return static_cast<std::uint32_t>(i);
    u -= p[i];
  }
  return static_cast<std::uint32_t>(top - logits.begin());
}

std::uint32_t bc_act(const BcModel& model, const env::Environment& e, BcMode mode, Rng& rng) {
  return bc_act(bc_logits(model, bc_encode(e, model.features)), mode, rng);
}

std::uint32_t BcPolicy::act(const env::Environment& e, const History&) {
  thread_local std::vector<double> x, logits;
  x.resize(bc_input_width(e.id(), model_.features));
  logits.resize(model_.action_count);
  bc_encode(e, model_.features, x);
  net_.forward(x, logits);
  return bc_act(logits, mode_, rng_);
}

double mbhp_score(EnvId env, std::uint32_t action) {
  if (action >= env::action_count_of(env)) throw ContractError("mbhp_score: invalid action " + std::to_string(action));
  switch (env) {
    case EnvId::platformer: return action == env::Platformer::noop ? 0.0 : 1.0;
    case EnvId::reacher: return (action & 2u) ? 0.5 : -0.5;
    case EnvId::gridworld: break;
  }
  throw UnsupportedEnvError("no hand-coded prior exists for the gridworld");
}

MbhpScorer::MbhpScorer(EnvId env) : env_(env) {
  if (env == EnvId::gridworld) throw UnsupportedEnvError("no hand-coded prior exists for the gridworld");
}

double MbhpScorer::score(const env::Environment&, const env::Pos&, std::uint32_t action) const {
  return mbhp_score(env_, action);
}

PlannerConfig greedy_config(const PlannerConfig& base) {
  PlannerConfig c = base;
  c.horizon = 1;
  c.enumerate = true;
  return c;
}

env::TrajectoryBank collect_policy_bank(const env::EnvSpec& spec, Policy& policy, std::size_t n,
                                        std::uint64_t seed) {
  env::TrajectoryBank bank;
  bank.spec = spec;
  bank.seed = seed;
  bank.policy.kind = env::ExplorationPolicy::Kind::uniform_random;
  bank.policy.epsilon = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    bank.trajectories.push_back(run_episode(spec, policy, s).trajectory);
  }
  return bank;
}

void save_bc(const std::filesystem::path& path, const BcModel& model,
             const std::map<std::string, std::string>& meta) {
  ad::CheckpointHeader h;
  h.module = "bc";
  h.seed = model.net.seed();
  h.meta = meta;
  h.meta["env"] = std::string(env::env_name(model.env));
  h.meta["features"] = bc_features_name(model.features);
  ad::save_checkpoint(path, h, model.net);
}

BcModel load_bc(const std::filesystem::path& path, std::map<std::string, std::string>* meta) {
  auto ck = ad::load_checkpoint(path);
  if (ck.header.module != "bc") {
    throw ConfigError(path.string() + " holds a '" + ck.header.module + "' checkpoint, expected bc");
  }
  const EnvId id = env::parse_env_id(ck.header.meta.at("env"));
  const BcFeatures f = parse_bc_features(ck.header.meta.at("features"));
  std::vector<std::size_t> hidden(ck.net.widths().begin() + 1, ck.net.widths().end() - 1);
  BcModel m = BcModel::create(id, f, hidden, 0);
  if (m.net.widths() != ck.net.widths()) throw DimensionError("bc checkpoint widths do not match the env");
  m.net = std::move(ck.net);
  if (meta) *meta = ck.header.meta;
  return m;
}

}  // namespace sap
