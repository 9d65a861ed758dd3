#include "sap/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sap/contingency.hpp"
#include "sap/env/platformer.hpp"
#include "sap/error.hpp"
#include "sap/loss.hpp"
#include "sap/rng.hpp"

namespace sap {

using env::EnvId;
using env::Pos;

void History::push(std::span<const double> delta, std::uint32_t action) {
  for (std::size_t i = kHistory - 1; i > 0; --i) {
    deltas[i] = deltas[i - 1];
    actions[i] = actions[i - 1];
  }
  deltas[0] = {0.0, 0.0, 0.0};
  for (std::size_t d = 0; d < delta.size() && d < 3; ++d) deltas[0][d] = delta[d];
  actions[0] = static_cast<int>(action);
}

std::vector<std::size_t> default_dyn_hidden(EnvId env) {
  switch (env) {
    case EnvId::gridworld: return {64};
    case EnvId::platformer: return {128, 128};
    case EnvId::reacher: return {64};
  }
  return {};
}

DynamicsModel DynamicsModel::create(EnvId env, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  DynamicsModel m;
  m.env = env;
  m.action_count = env::action_count_of(env);
  m.window_width = dynamics_window_spec(env).width();
  m.delta_dims = env == EnvId::reacher ? 3 : 2;
  m.done_head = m.action_history = m.plan_step = env == EnvId::platformer;
  std::vector<std::size_t> widths = {m.input_width()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(m.output_width());
  m.net = ad::Mlp(widths, seed);
  return m;
}

std::size_t DynamicsModel::extra_width() const {
  return action_count + (action_history ? kHistory * action_count : 0) + kHistory * delta_dims +
         (plan_step ? kPlanStepSlots : 0);
}

void encode_dyn_extras(const DynamicsModel& m, std::uint32_t action, const History& h,
                       std::size_t plan_step, std::span<double> out) {
  if (out.size() != m.extra_width()) throw DimensionError("encode_dyn_extras: buffer width mismatch");
  if (action >= m.action_count) throw ContractError("dynamics: invalid action " + std::to_string(action));
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t k = 0;
  out[k + action] = 1.0;
  k += m.action_count;
  if (m.action_history) {
    for (std::size_t i = 0; i < kHistory; ++i, k += m.action_count)
      if (h.actions[i] >= 0) out[k + std::size_t(h.actions[i])] = 1.0;
  }
  for (std::size_t i = 0; i < kHistory; ++i)
    for (std::size_t d = 0; d < m.delta_dims; ++d) out[k++] = h.deltas[i][d];
  if (m.plan_step) out[k + std::min(plan_step, kPlanStepSlots - 1)] = 1.0;
}

DynamicsEvaluator::DynamicsEvaluator(const DynamicsModel& model) : model_(model), net_(model.net) {}

Prediction DynamicsEvaluator::finish(std::span<const double> proj, std::uint32_t action, const History& h,
                                     std::size_t plan_step) const {
  thread_local std::vector<double> extras, acc, out;
  extras.resize(model_.extra_width());
  encode_dyn_extras(model_, action, h, plan_step, extras);
  acc.assign(proj.begin(), proj.end());
  net_.project_first(extras, model_.window_width, acc);
  out.resize(model_.output_width());
  net_.forward_from_projection(acc, out);
  Prediction p;
  for (std::size_t d = 0; d < model_.delta_dims; ++d) p.delta[d] = out[d];
  p.done_prob = model_.done_head ? 1.0 / (1.0 + std::exp(-out[model_.delta_dims])) : 0.0;
  return p;
}

Prediction DynamicsEvaluator::predict(std::span<const double> window, std::uint32_t action, const History& h,
                                      std::size_t plan_step) const {
  if (window.size() != model_.window_width) throw DimensionError("dynamics: window width mismatch");
  thread_local std::vector<double> proj;
  proj.assign(net_.first_width(), 0.0);
  net_.project_first(window, 0, proj);
  return finish(proj, action, h, plan_step);
}

Prediction DynamicsEvaluator::predict(const env::Environment& world, const Pos& at, std::uint32_t action,
                                      const History& h, std::size_t plan_step) const {
  if (world.static_world()) {
    if (auto k = world.world_key(); k != cache_world_) {
      cache_.clear();
      cache_world_ = std::move(k);
    }
    const std::uint64_t key = env::pos_key(at);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      const auto window = extract_dynamics_window(world, at);
      std::vector<double> proj(net_.first_width(), 0.0);
      net_.project_first(window, 0, proj);
      it = cache_.emplace(key, std::move(proj)).first;
    }
    return finish(it->second, action, h, plan_step);
  }
  thread_local std::vector<double> window;
  window.resize(model_.window_width);
  extract_dynamics_window(world, at, window);
  return predict(window, action, h, plan_step);
}

Prediction predict_next(const DynamicsModel& model, std::span<const double> window, std::uint32_t action,
                        const History& h, std::size_t plan_step) {
  return DynamicsEvaluator(model).predict(window, action, h, plan_step);
}

bool apply_prediction(const env::Environment& world, const Prediction& p, Pos& pos) {
  Pos q = pos;
  for (std::size_t d = 0; d < world.delta_dims(); ++d) q[d] += static_cast<int>(std::lround(p.delta[d] / world.unit()));
  if (world.in_bounds(q)) {
    pos = q;
    return false;
  }
  // Clamp axis by axis toward the last in-bounds position.
  for (std::size_t d = 0; d < world.delta_dims(); ++d) {
    Pos t = pos;
    t[d] = q[d];
    while (!world.in_bounds(t) && t[d] != pos[d]) t[d] += t[d] > pos[d] ? -1 : 1;
    q[d] = t[d];
  }
  pos = world.in_bounds(q) ? q : pos;
  return true;
}

RolloutResult rollout(const DynamicsEvaluator& dyn, const env::Environment& start, const History& h,
                      std::span<const std::uint32_t> actions) {
  RolloutResult r;
  auto world = start.clone();
  History hist = h;
  Pos pos = start.position();
  r.positions.push_back(pos);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const auto p = dyn.predict(*world, pos, actions[k], hist, k);
    const Pos before = pos;
    r.clamped = apply_prediction(*world, p, pos) || r.clamped;
    hist.push(env::delta_units(*world, before, pos), actions[k]);
    world->advance_exogenous();
    r.positions.push_back(pos);
    if (p.done_prob > 0.5 || world->goal_at(pos)) {
      r.done_step = static_cast<int>(k);
      break;
    }
  }
  return r;
}

std::vector<Transition> bank_transitions(const env::TrajectoryBank& bank,
                                         const std::vector<std::size_t>& trajectories) {
  std::vector<Transition> out;
  auto e = env::make_env(bank.spec);
  for (std::size_t i : trajectories) {
    const auto& t = bank.trajectories.at(i);
    History h;
    for (std::size_t s = 0; s < t.length(); ++s) {
      e->restore(t.states[s]);
      const Pos a = e->position();
      e->restore(t.states[s + 1]);
      const Pos b = e->position();
      const auto d = env::delta_units(*e, a, b);
      Transition tr;
      tr.trajectory = i;
      tr.t = s;
      tr.action = t.actions[s];
      tr.history = h;
      for (std::size_t k = 0; k < d.size(); ++k) tr.delta[k] = d[k];
      tr.done = t.done && s + 1 == t.length();
      out.push_back(tr);
      h.push(d, t.actions[s]);
    }
  }
  return out;
}

double next_position_accuracy(const DynamicsModel& model, const env::TrajectoryBank& bank,
                              const std::vector<Transition>& transitions) {
  if (transitions.empty()) return 0.0;
  const DynamicsEvaluator eval(model);
  auto e = env::make_env(bank.spec);
  std::size_t hit = 0;
  for (const auto& tr : transitions) {
    const auto& t = bank.trajectories[tr.trajectory];
    e->restore(t.states[tr.t + 1]);
    const Pos truth = e->position();
    e->restore(t.states[tr.t]);
    Pos pos = e->position();
    const auto p = eval.predict(*e, pos, tr.action, tr.history, 0);
    apply_prediction(*e, p, pos);
    if (pos == truth) ++hit;
  }
  return double(hit) / double(transitions.size());
}

DynTrainResult train_dynamics(const env::TrajectoryBank& bank, const DynTrainConfig& cfg) {
  if (bank.trajectories.empty()) throw ContractError("train_dynamics: empty bank");
  if (cfg.batch == 0) throw ContractError("train_dynamics: batch must be positive");
  const EnvId id = bank.spec.env;
  DynTrainResult res;
  res.model = DynamicsModel::create(id, cfg.hidden.empty() ? default_dyn_hidden(id) : cfg.hidden,
                                    derive_seed(cfg.seed, "dynamics/init"));
  auto& m = res.model;

  std::vector<std::size_t> order(bank.trajectories.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, "dynamics/split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout * double(order.size())));
  res.heldout_trajectories.assign(order.begin(), order.begin() + std::ptrdiff_t(n_hold));
  res.train_trajectories.assign(order.begin() + std::ptrdiff_t(n_hold), order.end());
  std::sort(res.heldout_trajectories.begin(), res.heldout_trajectories.end());
  std::sort(res.train_trajectories.begin(), res.train_trajectories.end());
  const auto train = bank_transitions(bank, res.train_trajectories);
  const auto held = bank_transitions(bank, res.heldout_trajectories);
  if (train.empty()) throw ContractError("train_dynamics: no transitions to train on");

  Rng rng(derive_seed(cfg.seed, "dynamics/batches"));
  auto params = m.net.parameters();
  ad::AdamState adam(m.net.parameter_count(), cfg.lr);
  auto e = env::make_env(bank.spec);
  const std::size_t in = m.input_width(), W = m.window_width, D = m.delta_dims, B = cfg.batch;
  std::vector<double> x(B * in), target(B * D), done(B);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t b = 0; b < B; ++b) {
      const auto& tr = train[std::size_t(uniform_int(rng, 0, int(train.size()) - 1))];
      const std::size_t plan_step = m.plan_step ? std::size_t(uniform_int(rng, 0, int(kPlanStepSlots) - 1)) : 0;
      e->restore(bank.trajectories[tr.trajectory].states[tr.t]);
      extract_dynamics_window(*e, e->position(), std::span<double>(x.data() + b * in, W));
      encode_dyn_extras(m, tr.action, tr.history, plan_step, std::span<double>(x.data() + b * in + W, in - W));
      for (std::size_t d = 0; d < D; ++d) target[b * D + d] = tr.delta[d];
      done[b] = tr.done ? 1.0 : 0.0;
    }
    const ad::Tensor out = m.net.forward(ad::Tensor::from({B, in}, x));
    const ad::Tensor pred = ad::slice_cols(out, 0, D);
    const ad::Tensor diff = ad::sub(pred, ad::Tensor::from({B, D}, target));
    const ad::Tensor delta_loss = ad::scale(ad::sum(ad::square(diff)), 0.5 / double(B));
    ad::Tensor total = delta_loss;
    double done_loss = 0.0;
    if (m.done_head) {
      const ad::Tensor dl = ad::bce_with_logits(ad::slice_cols(out, D, D + 1), done);
      done_loss = dl.item();
      total = ad::add(delta_loss, dl);
    }
    if (!std::isfinite(total.item())) {
      throw TrainingError("dynamics training: non-finite loss at iteration " + std::to_string(it), it);
    }
    ad::zero_grad(params);
    ad::backward(total);
    adam_step(adam, params);
    DynLogRow row{it, delta_loss.item(), done_loss, -1.0};
    if (!held.empty() && cfg.eval_every && (it % cfg.eval_every == 0 || it == cfg.iterations)) {
      row.heldout_accuracy = next_position_accuracy(m, bank, held);
    }
    res.log.push_back(row);
  }
  res.heldout_accuracy = held.empty() ? -1.0 : res.log.back().heldout_accuracy;
  return res;
}

void save_dynamics(const std::filesystem::path& path, const DynamicsModel& model,
                   const std::map<std::string, std::string>& meta) {
  ad::CheckpointHeader h;
  h.module = "dynamics";
  h.seed = model.net.seed();
  h.meta = meta;
  if (auto it = meta.find("step"); it != meta.end()) h.step = std::stoull(it->second);
  h.meta["env"] = std::string(env::env_name(model.env));
  ad::save_checkpoint(path, h, model.net);
}

DynamicsModel load_dynamics(const std::filesystem::path& path, std::map<std::string, std::string>* meta) {
  auto ck = ad::load_checkpoint(path);
  if (ck.header.module != "dynamics") {
    throw ConfigError(path.string() + " holds a '" + ck.header.module + "' checkpoint, expected dynamics");
  }
  const EnvId id = env::parse_env_id(ck.header.meta.at("env"));
  std::vector<std::size_t> hidden(ck.net.widths().begin() + 1, ck.net.widths().end() - 1);
  DynamicsModel m = DynamicsModel::create(id, hidden, 0);
  if (m.net.widths() != ck.net.widths()) throw DimensionError("dynamics checkpoint widths do not match the env");
  m.net = std::move(ck.net);
  if (meta) *meta = ck.header.meta;
  return m;
}

void write_dyn_log(const std::filesystem::path& path, const std::vector<DynLogRow>& log,
                   const std::string& header_comment) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  if (!header_comment.empty()) f << header_comment << "\n";
  f << "iteration,delta_loss,done_loss,heldout_accuracy\n";
  f.precision(10);
  for (const auto& r : log) {
    f << r.iteration << ',' << r.delta_loss << ',' << r.done_loss << ',';
    if (r.heldout_accuracy >= 0.0) f << r.heldout_accuracy;
    f << "\n";
  }
}

}  // namespace sap
