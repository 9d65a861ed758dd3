#include "sap/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "sap/env/gridworld.hpp"
#include "sap/env/platformer.hpp"
#include "sap/error.hpp"
#include "sap/loss.hpp"
#include "sap/rng.hpp"

namespace sap {

using env::EnvId;

Aggregator parse_aggregator(const std::string& name) {
  if (name == "sum") return Aggregator::sum;
  if (name == "max") return Aggregator::max;
  throw ConfigError("unknown aggregator '" + name + "'");
}

std::string aggregator_name(Aggregator g) { return g == Aggregator::sum ? "sum" : "max"; }

double aggregate(std::span<const double> s, Aggregator g) {
  if (g == Aggregator::sum) return std::accumulate(s.begin(), s.end(), 0.0);
  if (s.empty()) throw ContractError("aggregate: max over an empty sequence");
  return *std::max_element(s.begin(), s.end());
}

std::vector<std::size_t> default_scorer_hidden(EnvId env) {
  switch (env) {
    case EnvId::gridworld: return {32, 16};
    case EnvId::platformer: return {64, 32};
    case EnvId::reacher: return {128};
  }
  return {};
}

ScoringModel ScoringModel::create(EnvId env, const std::string& layout,
                                  const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  ScoringModel m;
  m.env = env;
  m.layout = make_layout(layout.empty() ? default_layout(env) : layout, env);
  m.action_count = env::action_count_of(env);
  std::vector<std::size_t> widths = {m.layout.region_width()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(m.action_count * m.layout.count());
  m.net = ad::Mlp(widths, seed);
  return m;
}

ScoreEvaluator::ScoreEvaluator(const ScoringModel& model)
    : layout_(model.layout), actions_(model.action_count), net_(model.net) {
  if (model.net.out_width() != actions_ * layout_.count()) {
    throw DimensionError("scoring net has " + std::to_string(model.net.out_width()) +
                         " outputs, layout needs " + std::to_string(actions_ * layout_.count()));
  }
}

void ScoreEvaluator::region_outputs(std::span<const double> region, std::span<double> out) const {
  net_.forward(region, out);
}

void ScoreEvaluator::action_scores(std::span<const double> window, std::span<double> out) const {
  const std::size_t L = regions(), rw = layout_.region_width();
  thread_local std::vector<double> reg, o;
  reg.resize(L * rw);
  o.resize(actions_ * L);
  split_subregions(window, layout_, reg);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    net_.forward(std::span<const double>(reg.data() + l * rw, rw), o);
    for (std::size_t a = 0; a < actions_; ++a) out[a] += o[a * L + l];
  }
}

std::vector<double> ScoreEvaluator::action_scores(std::span<const double> window) const {
  std::vector<double> out(actions_);
  action_scores(window, out);
  return out;
}

double ScoreEvaluator::score_step(std::span<const double> window, std::uint32_t action) const {
  if (action >= actions_) throw ContractError("score_step: invalid action " + std::to_string(action));
  return action_scores(window)[action];
}

std::vector<double> ScoreEvaluator::score_matrix(std::span<const double> window) const {
  const std::size_t L = regions(), rw = layout_.region_width();
  const auto reg = split_subregions(window, layout_);
  std::vector<double> m(actions_ * L), o(actions_ * L);
  for (std::size_t l = 0; l < L; ++l) {
    net_.forward(std::span<const double>(reg.data() + l * rw, rw), o);
    for (std::size_t a = 0; a < actions_; ++a) m[a * L + l] = o[a * L + l];
  }
  return m;
}

std::vector<double> ScoreEvaluator::region_scores(std::span<const double> window,
                                                  std::uint32_t action) const {
  const auto m = score_matrix(window);
  const std::size_t L = regions();
  return {m.begin() + std::ptrdiff_t(action * L), m.begin() + std::ptrdiff_t((action + 1) * L)};
}

double score_step(const ScoringModel& model, const env::Environment& e, const env::Pos& at,
                  std::uint32_t action) {
  return ScoreEvaluator(model).score_step(extract_window(e, at), action);
}

namespace {

bool ended_at_goal(const env::EnvSpec& spec, const env::Trajectory& t) {
  auto e = env::make_env(spec);
  e->restore(t.states.back());
  return e->at_goal();
}

}  // namespace

LabelResult label_bank(const env::TrajectoryBank& bank, const ScoreTrainConfig& cfg) {
  if (cfg.stride < 1) throw ContractError("label_bank: stride must be at least 1");
  LabelResult res;
  const auto& trajs = bank.trajectories;
  std::vector<double> rewards;
  for (const auto& t : trajs) rewards.push_back(t.terminal_reward);
  const bool platformer = bank.spec.env == EnvId::platformer;
  const bool any_done = std::any_of(trajs.begin(), trajs.end(), [](const auto& t) { return t.done; });
  res.no_done_warning = platformer && !any_done;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& t = trajs[i];
    LabeledTrajectory lt;
    lt.trajectory = i;
    lt.done = t.done;
    for (std::size_t s = 0; s < t.length(); s += cfg.stride) lt.steps.push_back(s);
    lt.target = t.terminal_reward;
    if (platformer && any_done && !t.done && !ended_at_goal(bank.spec, t)) {
      double acc = 0.0;
      std::size_t n = 0;
      for (double r : rewards) {
        if (r > t.terminal_reward) {
          acc += r - t.terminal_reward;
          ++n;
        }
      }
      if (n) lt.target += acc / double(n);
    }
    if (!std::isfinite(lt.target)) throw ContractError("label_bank: non-finite target");
    res.labeled.push_back(std::move(lt));
  }
  return res;
}

ScoreDataset build_score_dataset(const env::TrajectoryBank& bank,
                                 const std::vector<LabeledTrajectory>& labeled,
                                 const SubRegionLayout& layout) {
  if (layout.env != bank.spec.env) throw ContractError("build_score_dataset: layout is for another env");
  ScoreDataset ds;
  ds.width = layout.region_width();
  ds.regions = layout.count();
  auto e = env::make_env(bank.spec);
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<double> window(window_spec(bank.spec.env).width());
  std::vector<double> reg(layout.count() * ds.width);
  for (const auto& lt : labeled) {
    const auto& t = bank.trajectories.at(lt.trajectory);
    ScoreDataset::Item item;
    item.target = lt.target;
    item.done = lt.done;
    for (std::size_t s : lt.steps) {
      e->restore(t.states.at(s));
      extract_window(*e, e->position(), window);
      split_subregions(window, layout, reg);
      for (std::size_t l = 0; l < layout.count(); ++l) {
        const double* r = reg.data() + l * ds.width;
        std::string key(reinterpret_cast<const char*>(r), ds.width * sizeof(double));
        auto [it, fresh] = index.try_emplace(std::move(key), std::uint32_t(ds.row_count()));
        if (fresh) ds.rows.insert(ds.rows.end(), r, r + ds.width);
        item.region_rows.push_back(it->second);
      }
      item.actions.push_back(t.actions.at(s));
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

namespace {

// Per-item J from precomputed outputs of every dataset row.
std::vector<double> dataset_returns(const ScoringModel& model, const ScoreDataset& data,
                                    const std::vector<std::size_t>& items, Aggregator g) {
  const ad::FrozenMlp net(model.net);
  const std::size_t AL = net.out_width(), L = data.regions;
  std::vector<double> cache(data.row_count() * AL);
  std::vector<char> have(data.row_count(), 0);
  std::vector<double> out;
  for (std::size_t i : items) {
    const auto& it = data.items.at(i);
    std::vector<double> steps;
    for (std::size_t s = 0; s < it.actions.size(); ++s) {
      double v = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        const std::uint32_t r = it.region_rows[s * L + l];
        if (!have[r]) {
          net.forward(std::span<const double>(data.rows.data() + std::size_t(r) * data.width, data.width),
                      std::span<double>(cache.data() + std::size_t(r) * AL, AL));
          have[r] = 1;
        }
        v += cache[std::size_t(r) * AL + it.actions[s] * L + l];
      }
      steps.push_back(v);
    }
    out.push_back(aggregate(steps, g));
  }
  return out;
}

}  // namespace

double regression_residual(const ScoringModel& model, const ScoreDataset& data,
                           const std::vector<std::size_t>& items, Aggregator g) {
  if (items.empty()) return 0.0;
  const auto J = dataset_returns(model, data, items, g);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    num += std::abs(J[k] - data.items[items[k]].target);
    den += std::abs(data.items[items[k]].target);
  }
  return den > 0.0 ? num / den : num;
}

void fit_scoring(ScoringModel& model, const ScoreDataset& data, const std::vector<std::size_t>& train,
                 const ScoreTrainConfig& cfg, std::vector<ScoreLogRow>* log,
                 const ScoreDataset* heldout_data, const std::vector<std::size_t>* heldout) {
  if (train.empty()) throw ContractError("fit_scoring: no training trajectories");
  if (cfg.batch == 0) throw ContractError("fit_scoring: batch must be positive");
  if (cfg.l1 < 0.0) throw ContractError("fit_scoring: l1 weight must be non-negative");
  std::vector<std::size_t> usable;
  for (std::size_t i : train)
    if (cfg.aggregator == Aggregator::sum || !data.items.at(i).actions.empty()) usable.push_back(i);
  if (usable.empty()) throw ContractError("fit_scoring: every trajectory is empty");

  std::vector<std::size_t> done_items, alive_items;
  for (std::size_t i : usable) (data.items[i].done ? done_items : alive_items).push_back(i);
  const bool balance = model.env == EnvId::platformer && !done_items.empty() && !alive_items.empty();

  Rng rng(cfg.seed);
  auto params = model.net.parameters();
  ad::AdamState adam(model.net.parameter_count(), cfg.lr);
  const std::size_t L = data.regions, A = model.action_count, AL = A * L, W = data.width;
  std::vector<std::int64_t> local(data.row_count(), -1);
  std::vector<std::uint32_t> used;

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    std::vector<std::size_t> batch(cfg.batch);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto& pool = balance ? (b % 2 == 0 ? done_items : alive_items) : usable;
      batch[b] = pool[std::size_t(uniform_int(rng, 0, int(pool.size()) - 1))];
    }
    used.clear();
    for (std::size_t i : batch)
      for (auto r : data.items[i].region_rows)
        if (local[r] < 0) {
          local[r] = std::int64_t(used.size());
          used.push_back(r);
        }
    std::vector<double> x(used.size() * W);
    for (std::size_t k = 0; k < used.size(); ++k)
      std::copy_n(data.rows.data() + std::size_t(used[k]) * W, W, x.data() + k * W);
    const ad::Tensor X = ad::Tensor::from({used.size(), W}, std::move(x));
    const ad::Tensor out = model.net.forward(X);

    std::vector<std::uint32_t> idx, seg, step_traj;
    std::vector<double> y(cfg.batch), l1w(cfg.l1 > 0.0 ? used.size() * AL : 0, 0.0);
    std::size_t nsteps = 0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto& item = data.items[batch[b]];
      y[b] = item.target;
      for (std::size_t s = 0; s < item.actions.size(); ++s, ++nsteps) {
        step_traj.push_back(std::uint32_t(b));
        for (std::size_t l = 0; l < L; ++l) {
          const auto row = std::size_t(local[item.region_rows[s * L + l]]);
          idx.push_back(std::uint32_t(row * AL + item.actions[s] * L + l));
          seg.push_back(cfg.aggregator == Aggregator::sum ? std::uint32_t(b) : std::uint32_t(nsteps));
          if (!l1w.empty())
            for (std::size_t a = 0; a < A; ++a) l1w[row * AL + a * L + l] += 1.0 / double(cfg.batch);
        }
      }
    }
    for (auto r : used) local[r] = -1;

    const ad::Tensor picked = ad::gather(out, idx);
    ad::Tensor J;
    if (cfg.aggregator == Aggregator::sum) {
      J = ad::segment_sum(picked, seg, cfg.batch);
    } else {
      J = ad::segment_max(ad::segment_sum(picked, seg, nsteps), step_traj, cfg.batch);
    }
    const ad::Tensor fit = ad::mse_loss(J, ad::Tensor::from({cfg.batch}, y));
    ad::Tensor total = fit;
    double reg = 0.0;
    if (!l1w.empty()) {
      const ad::Tensor r = ad::scale(ad::weighted_abs_sum(out, l1w), cfg.l1);
      reg = r.item();
      total = ad::add(fit, r);
    }
    if (!std::isfinite(total.item())) {
      throw TrainingError("score training: non-finite loss at iteration " + std::to_string(it), it);
    }
    ad::zero_grad(params);
    ad::backward(total);
    adam_step(adam, params);

    if (log) {
      ScoreLogRow row{it, fit.item(), reg, -1.0};
      if (heldout_data && heldout && !heldout->empty() && cfg.eval_every &&
          (it % cfg.eval_every == 0 || it == cfg.iterations)) {
        row.heldout_residual = regression_residual(model, *heldout_data, *heldout, cfg.aggregator);
      }
      log->push_back(row);
    }
  }
}

ScoreTrainResult train_scoring(const env::TrajectoryBank& bank, const ScoreTrainConfig& cfg) {
  if (bank.trajectories.empty()) throw ContractError("train_scoring: empty bank");
  const EnvId id = bank.spec.env;
  ScoreTrainResult res;
  const std::string layout = cfg.spatial ? (cfg.layout.empty() ? default_layout(id) : cfg.layout) : "whole";
  res.model = ScoringModel::create(id, layout, cfg.hidden.empty() ? default_scorer_hidden(id) : cfg.hidden,
                                   derive_seed(cfg.seed, "scorer/init"));
  const auto labels = label_bank(bank, cfg);
  res.no_done_warning = labels.no_done_warning;
  const auto data = build_score_dataset(bank, labels.labeled, res.model.layout);

  std::vector<std::size_t> order(bank.trajectories.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, "scorer/split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout * double(order.size())));
  res.heldout_indices.assign(order.begin(), order.begin() + std::ptrdiff_t(n_hold));
  res.train_indices.assign(order.begin() + std::ptrdiff_t(n_hold), order.end());
  std::sort(res.heldout_indices.begin(), res.heldout_indices.end());
  std::sort(res.train_indices.begin(), res.train_indices.end());

  ScoreTrainConfig run = cfg;
  run.seed = derive_seed(cfg.seed, "scorer/batches");
  fit_scoring(res.model, data, res.train_indices, run, &res.log, &data, &res.heldout_indices);
  if (!res.heldout_indices.empty()) {
    res.final_heldout_residual = regression_residual(res.model, data, res.heldout_indices, cfg.aggregator);
  }
  return res;
}

double trajectory_return(const ScoreEvaluator& eval, const env::EnvSpec& spec,
                         const env::Trajectory& traj, Aggregator g, std::size_t stride) {
  auto e = env::make_env(spec);
  std::vector<double> steps;
  for (std::size_t t = 0; t < traj.length(); t += stride) {
    e->restore(traj.states[t]);
    steps.push_back(eval.score_step(extract_window(*e), traj.actions[t]));
  }
  return aggregate(steps, g);
}

std::vector<GreedyCell> greedy_action_map(const ScoringModel& model, const env::Environment& level) {
  const ScoreEvaluator eval(model);
  auto e = level.clone();
  std::vector<GreedyCell> cells;
  std::vector<double> window(window_spec(level.id()).width()), scores(model.action_count);
  int nx = 0, ny = 0;
  if (level.id() == EnvId::platformer) {
    const auto& lv = static_cast<const env::Platformer&>(level).level();
    nx = lv.cols;
    ny = lv.rows;
  } else if (level.id() == EnvId::gridworld) {
    nx = ny = env::GridWorld::kSize;
  } else {
    throw UnsupportedEnvError("greedy_action_map: needs a 2-D env");
  }
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const env::Pos p = level.id() == EnvId::platformer ? env::Pos{x, y, 0} : env::Pos{y, x, 0};
      if (!e->can_place(p)) continue;
      e->place_agent(p);
      extract_window(*e, p, window);
      eval.action_scores(window, scores);
      std::uint32_t best = 0;
      for (std::uint32_t a = 1; a < scores.size(); ++a)
        if (scores[a] > scores[best]) best = a;
      cells.push_back({y, x, best});
    }
  }
  return cells;
}

std::vector<double> recovered_type_scores(const ScoringModel& model, const env::Environment& grid) {
  if (grid.id() != EnvId::gridworld) throw UnsupportedEnvError("score recovery is defined on the gridworld");
  const auto& g = static_cast<const env::GridWorld&>(grid);
  constexpr int D = env::GridWorld::kFeatureDim, K = env::GridWorld::kTypes, N = env::GridWorld::kSize;
  std::vector<double> mean(K * D, 0.0);
  std::vector<int> count(K, 0);
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) {
      const int t = g.cell_type(r, c);
      const auto f = g.features(r, c);
      for (int j = 0; j < D; ++j) mean[t * D + j] += f[j];
      ++count[t];
    }
  const ScoreEvaluator eval(model);
  std::vector<double> type_score(K, 0.0);
  std::vector<double> window(window_spec(EnvId::gridworld).width(), 0.0);
  for (int t = 0; t < K; ++t) {
    if (count[t] == 0) {
      type_score[t] = std::nan("");
      continue;
    }
    for (int j = 0; j < D; ++j) window[4 * D + j] = mean[t * D + j] / count[t];
    const auto s = eval.action_scores(window);
    type_score[t] = std::accumulate(s.begin(), s.end(), 0.0) / double(s.size());
  }
  std::vector<double> out(K);
  for (int t = 0; t < K; ++t) out[t] = type_score[t] - type_score[0];
  return out;
}

double score_recovery_error(const ScoringModel& model, const env::Environment& grid) {
  const auto& g = static_cast<const env::GridWorld&>(grid);
  const auto rec = recovered_type_scores(model, grid);
  double err = 0.0;
  int n = 0;
  for (int t = 1; t < env::GridWorld::kTypes; ++t) {
    if (std::isnan(rec[t])) continue;
    err += std::abs(rec[t] - g.hidden_value(t));
    ++n;
  }
  return n ? err / n : 0.0;
}

ad::CheckpointHeader scorer_header(const ScoringModel& model, std::uint64_t step) {
  ad::CheckpointHeader h;
  h.module = "scorer";
  h.seed = model.net.seed();
  h.step = step;
  h.meta["layout"] = model.layout.name;
  h.meta["env"] = std::string(env::env_name(model.env));
  h.meta["actions"] = std::to_string(model.action_count);
  return h;
}

void save_scorer(const std::filesystem::path& path, const ScoringModel& model,
                 const std::map<std::string, std::string>& meta) {
  auto h = scorer_header(model, 0);
  for (const auto& [k, v] : meta) h.meta[k] = v;
  if (auto it = meta.find("step"); it != meta.end()) h.step = std::stoull(it->second);
  ad::save_checkpoint(path, h, model.net);
}

ScoringModel load_scorer(const std::filesystem::path& path, std::map<std::string, std::string>* meta) {
  auto ck = ad::load_checkpoint(path);
  if (ck.header.module != "scorer") {
    throw ConfigError(path.string() + " holds a '" + ck.header.module + "' checkpoint, expected scorer");
  }
  ScoringModel m;
  m.env = env::parse_env_id(ck.header.meta.at("env"));
  m.layout = make_layout(ck.header.meta.at("layout"), m.env);
  m.action_count = std::stoul(ck.header.meta.at("actions"));
  m.net = std::move(ck.net);
  if (m.net.in_width() != m.layout.region_width() || m.net.out_width() != m.action_count * m.layout.count()) {
    throw DimensionError("scorer checkpoint widths do not match layout '" + m.layout.name + "'");
  }
  if (meta) *meta = ck.header.meta;
  return m;
}

void write_score_log(const std::filesystem::path& path, const std::vector<ScoreLogRow>& log,
                     const std::string& header_comment) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  if (!header_comment.empty()) f << header_comment << "\n";
  f << "iteration,loss,reg_term,heldout_residual\n";
  f.precision(10);
  for (const auto& r : log) {
    f << r.iteration << ',' << r.loss << ',' << r.reg << ',';
    if (r.heldout_residual >= 0.0) f << r.heldout_residual;
    f << "\n";
  }
}

}  // namespace sap
