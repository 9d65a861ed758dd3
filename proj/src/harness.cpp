#include "sap/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "sap/env/platformer.hpp"
#include "sap/error.hpp"

namespace sap {

using env::EnvId;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---- config -----------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults(EnvId id) {
  ExperimentConfig c;
  c.env = id;
  c.exploration = env::default_exploration(id);
  c.planner = default_planner(id);
  c.score.eval_every = 1000;
  c.dyn.eval_every = 5000;
  switch (id) {
    case EnvId::gridworld:
      c.train_config = "World-1";
      c.test_configs = {"World-1", "World-2"};
      c.bank_size = 100;
      c.score.iterations = 40000;
      c.score.lr.drop_step = 30000;
      c.score.holdout = 0.0;
      c.learned_dynamics = false;
      c.dyn.iterations = 3000;
      c.methods = {"sap", "bc_sap", "bc_random"};
      c.eval_episodes = 100;
      break;
    case EnvId::platformer:
      c.train_config = "Level-A";
      c.test_configs = {"Level-B", "Level-C"};
      c.bank_size = 5000;
      c.exploration.max_steps = 15;
      c.score.iterations = 5000;
      c.score.l1 = 1e-4;
      c.score.stride = 2;
      c.train_nospatial = true;
      c.dyn.iterations = 40000;
      c.methods = {"sap", "sap_nospatial", "mbhp", "bc_random"};
      c.eval_episodes = 50;
      break;
    case EnvId::reacher:
      c.train_config = "Config-A";
      c.test_configs = {"Config-A", "Config-B", "Config-C", "Config-D"};
      c.bank_size = 500;
      c.score.iterations = 10000;
      c.score.l1 = 2e-5;
      c.dyn.iterations = 30000;
      c.methods = {"sap", "sap_perfect", "mbhp"};
      c.eval_episodes = 50;
      break;
  }
  c.apply_seeds();
  return c;
}

void ExperimentConfig::apply_seeds() {
  score.seed = derive_seed(master_seed, "score");
  dyn.seed = derive_seed(master_seed, "dyn");
  planner.seed = derive_seed(master_seed, "planner");
  bc.seed = derive_seed(master_seed, "bc");
}

env::EnvSpec ExperimentConfig::spec(const std::string& config) const { return env::make_spec(env, config, world_seed); }

std::string ExperimentConfig::metric() const { return env == EnvId::reacher ? "steps" : "return"; }

void ExperimentConfig::validate() const {
  const auto names = env::config_names(env);
  auto check_cfg = [&](const std::string& n, const char* field) {
    if (std::find(names.begin(), names.end(), n) == names.end()) {
      throw ConfigError(std::string("field ") + field + ": unknown " + std::string(env::env_name(env)) +
                        " config '" + n + "'");
    }
  };
  check_cfg(train_config, "train_config");
  if (test_configs.empty()) throw ConfigError("field test_configs: must not be empty");
  for (const auto& t : test_configs) check_cfg(t, "test_configs");
  if (bank_size == 0) throw ConfigError("field bank.size: must be positive");
  if (eval_episodes < 2) throw ConfigError("field eval_episodes: at least 2 episodes are needed for an interval");
  const auto layouts = layout_names(env);
  if (!score.layout.empty() && std::find(layouts.begin(), layouts.end(), score.layout) == layouts.end()) {
    throw ConfigError("field score.layout: unknown layout '" + score.layout + "' for " +
                      std::string(env::env_name(env)));
  }
  for (const auto& m : methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      throw ConfigError("field methods: unknown method '" + m + "'");
    }
    if (env == EnvId::gridworld && m == "mbhp") throw ConfigError("field methods: mbhp is not defined for the gridworld");
  }
  for (auto h : horizon_sweep)
    if (h == 0) throw ConfigError("field horizon_sweep: horizons must be positive");
  try {
    planner.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("field planner: ") + e.what());
  }
}

namespace {

ojson lr_json(const ad::LrSchedule& s) {
  ojson j;
  j["base"] = s.base;
  j["drop_step"] = s.drop_step ? ojson(*s.drop_step) : ojson(nullptr);
  j["dropped"] = s.dropped;
  return j;
}

std::string kind_name(env::ExplorationPolicy::Kind k) {
  return k == env::ExplorationPolicy::Kind::uniform_random ? "uniform-random" : "epsilon-noisy";
}

// Reads fields of one JSON object, rejecting keys it was not asked about.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("field " + (path_.empty() ? std::string("<root>") : path_) + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& dst) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      dst = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("field " + name(key) + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("field " + name(it.key()) + ": unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_lr(const json& j, const std::string& path, ad::LrSchedule& lr) {
  Fields f(j, path);
  f.get("base", lr.base);
  if (const json* d = f.sub("drop_step")) {
    if (d->is_null()) lr.drop_step.reset();
    else if (d->is_number_unsigned()) lr.drop_step = d->get<std::uint64_t>();
    else throw ConfigError("field " + f.name("drop_step") + ": expected a non-negative integer or null");
  }
  f.get("dropped", lr.dropped);
  f.finish();
}

}  // namespace

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["env"] = std::string(env::env_name(env));
  j["train_config"] = train_config;
  j["test_configs"] = test_configs;
  j["world_seed"] = world_seed;
  j["master_seed"] = master_seed;
  ojson ex;
  ex["kind"] = kind_name(exploration.kind);
  ex["base_action"] = exploration.base_action;
  ex["epsilon"] = exploration.epsilon;
  ex["scattered_starts"] = exploration.scattered_starts;
  ex["max_steps"] = exploration.max_steps;
  j["bank"] = {{"size", bank_size}, {"exploration", ex}};
  j["score"] = {{"iterations", score.iterations}, {"batch", score.batch},     {"lr", lr_json(score.lr)},
                {"l1", score.l1},                 {"stride", score.stride},   {"aggregator", aggregator_name(score.aggregator)},
                {"spatial", score.spatial},       {"layout", score.layout},   {"hidden", score.hidden},
                {"holdout", score.holdout},       {"eval_every", score.eval_every}};
  j["train_nospatial"] = train_nospatial;
  j["dyn"] = {{"iterations", dyn.iterations}, {"batch", dyn.batch},       {"lr", lr_json(dyn.lr)},
              {"hidden", dyn.hidden},         {"holdout", dyn.holdout},   {"eval_every", dyn.eval_every}};
  j["learned_dynamics"] = learned_dynamics;
  j["planner"] = {{"horizon", planner.horizon},
                  {"samples", planner.samples},
                  {"gamma", planner.gamma},
                  {"aggregator", aggregator_name(planner.aggregator)},
                  {"done_mode", planner.done_mode == DoneMode::truncate ? "truncate" : "ignore"},
                  {"enumerate", planner.enumerate}};
  j["bc"] = {{"iterations", bc.iterations}, {"batch", bc.batch},  {"lr", lr_json(bc.lr)},
             {"features", bc_features_name(bc.features)}, {"hidden", bc.hidden}};
  j["bc_sap_episodes"] = bc_sap_episodes;
  j["methods"] = methods;
  j["eval_episodes"] = eval_episodes;
  j["horizon_sweep"] = horizon_sweep;
  j["out_dir"] = out_dir;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("field <root>: expected an object");
  if (!j.contains("env")) throw ConfigError("field env: required");
  EnvId id;
  try {
    id = env::parse_env_id(j.at("env").get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("field env: ") + e.what());
  }
  ExperimentConfig c = defaults(id);
  Fields root(j, "");
  std::string env_name;
  root.get("env", env_name);
  root.get("train_config", c.train_config);
  root.get("test_configs", c.test_configs);
  root.get("world_seed", c.world_seed);
  root.get("master_seed", c.master_seed);
  if (const json* b = root.sub("bank")) {
    Fields f(*b, "bank");
    f.get("size", c.bank_size);
    if (const json* e = f.sub("exploration")) {
      Fields g(*e, "bank.exploration");
      std::string kind = kind_name(c.exploration.kind);
      g.get("kind", kind);
      if (kind == "uniform-random") c.exploration.kind = env::ExplorationPolicy::Kind::uniform_random;
      else if (kind == "epsilon-noisy") c.exploration.kind = env::ExplorationPolicy::Kind::epsilon_noisy;
      else throw ConfigError("field bank.exploration.kind: expected uniform-random or epsilon-noisy");
      g.get("base_action", c.exploration.base_action);
      g.get("epsilon", c.exploration.epsilon);
      g.get("scattered_starts", c.exploration.scattered_starts);
      g.get("max_steps", c.exploration.max_steps);
      g.finish();
    }
    f.finish();
  }
  if (const json* s = root.sub("score")) {
    Fields f(*s, "score");
    f.get("iterations", c.score.iterations);
    f.get("batch", c.score.batch);
    if (const json* lr = f.sub("lr")) read_lr(*lr, "score.lr", c.score.lr);
    f.get("l1", c.score.l1);
    f.get("stride", c.score.stride);
    std::string agg = aggregator_name(c.score.aggregator);
    f.get("aggregator", agg);
    try {
      c.score.aggregator = parse_aggregator(agg);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("field score.aggregator: ") + e.what());
    }
    f.get("spatial", c.score.spatial);
    f.get("layout", c.score.layout);
    f.get("hidden", c.score.hidden);
    f.get("holdout", c.score.holdout);
    f.get("eval_every", c.score.eval_every);
    f.finish();
  }
  root.get("train_nospatial", c.train_nospatial);
  if (const json* d = root.sub("dyn")) {
    Fields f(*d, "dyn");
    f.get("iterations", c.dyn.iterations);
    f.get("batch", c.dyn.batch);
    if (const json* lr = f.sub("lr")) read_lr(*lr, "dyn.lr", c.dyn.lr);
    f.get("hidden", c.dyn.hidden);
    f.get("holdout", c.dyn.holdout);
    f.get("eval_every", c.dyn.eval_every);
    f.finish();
  }
  root.get("learned_dynamics", c.learned_dynamics);
  if (const json* p = root.sub("planner")) {
    Fields f(*p, "planner");
    f.get("horizon", c.planner.horizon);
    f.get("samples", c.planner.samples);
    f.get("gamma", c.planner.gamma);
    std::string agg = aggregator_name(c.planner.aggregator), done = "truncate";
    f.get("aggregator", agg);
    try {
      c.planner.aggregator = parse_aggregator(agg);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("field planner.aggregator: ") + e.what());
    }
    if (c.planner.done_mode == DoneMode::ignore) done = "ignore";
    f.get("done_mode", done);
    if (done == "truncate") c.planner.done_mode = DoneMode::truncate;
    else if (done == "ignore") c.planner.done_mode = DoneMode::ignore;
    else throw ConfigError("field planner.done_mode: expected truncate or ignore");
    f.get("enumerate", c.planner.enumerate);
    f.finish();
  }
  if (const json* b = root.sub("bc")) {
    Fields f(*b, "bc");
    f.get("iterations", c.bc.iterations);
    f.get("batch", c.bc.batch);
    if (const json* lr = f.sub("lr")) read_lr(*lr, "bc.lr", c.bc.lr);
    std::string feats = bc_features_name(c.bc.features);
    f.get("features", feats);
    try {
      c.bc.features = parse_bc_features(feats);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("field bc.features: ") + e.what());
    }
    f.get("hidden", c.bc.hidden);
    f.finish();
  }
  root.get("bc_sap_episodes", c.bc_sap_episodes);
  root.get("methods", c.methods);
  root.get("eval_episodes", c.eval_episodes);
  root.get("horizon_sweep", c.horizon_sweep);
  root.get("out_dir", c.out_dir);
  root.finish();
  c.apply_seeds();
  c.validate();
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error: " +
                      e.what());
  }
  try {
    return ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_hash(const ExperimentConfig& cfg) {
  ojson j = cfg.to_json();
  j.erase("out_dir");  // where artifacts go does not change them
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

// ---- metrics ----------------------------------------------------------------

Interval compute_ci(std::span<const double> x) {
  if (x.size() < 2) throw ContractError("compute_ci: need at least 2 samples, got " + std::to_string(x.size()));
  const double n = double(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n), sd};
}

void MetricsReport::add(const std::string& method, const std::string& env_config, const std::string& metric,
                        std::span<const double> samples) {
  const Interval ci = compute_ci(samples);
  rows.push_back({method, env_config, metric, ci.mean, ci.sd, ci.half_width, samples.size()});
}

const MetricsRow& MetricsReport::find(const std::string& method, const std::string& env_config) const {
  for (const auto& r : rows)
    if (r.method == method && r.env_config == env_config) return r;
  throw ContractError("report has no row for " + method + " on " + env_config);
}

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
std::string header_line(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}
}  // namespace

std::string MetricsReport::to_csv() const {
  std::string out = header_line(config_hash, seed);
  out += "method,env_config,metric,mean,ci95,n\n";
  for (const auto& r : rows) {
    out += r.method + "," + r.env_config + "," + r.metric + "," + fmt(r.mean) + "," + fmt(r.ci95) + "," +
           std::to_string(r.n) + "\n";
  }
  return out;
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  os << header_line(config_hash, seed);
  os << std::left << std::setw(16) << "method" << std::setw(12) << "config" << std::setw(8) << "metric" << std::right
     << std::setw(11) << "mean" << std::setw(11) << "sd" << std::setw(11) << "ci95" << std::setw(6) << "n" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    os << std::left << std::setw(16) << r.method << std::setw(12) << r.env_config << std::setw(8) << r.metric
       << std::right << std::setw(11) << r.mean << std::setw(11) << r.sd << std::setw(11) << r.ci95 << std::setw(6)
       << r.n << "\n";
  }
  return os.str();
}

namespace {
void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << s;
}
}  // namespace

void MetricsReport::write(const fs::path& csv_path) const {
  write_text(csv_path, to_csv());
  fs::path txt = csv_path;
  txt.replace_extension(".txt");
  write_text(txt, to_table());
}

// ---- pipeline ---------------------------------------------------------------

Pipeline::Pipeline(ExperimentConfig c) : cfg(std::move(c)), hash(config_hash(cfg)) {}

const env::TrajectoryBank& Pipeline::ensure_bank() {
  if (!bank) {
    bank = env::generate_exploration_bank(cfg.spec(cfg.train_config), cfg.exploration, cfg.bank_size,
                                          derive_seed(cfg.master_seed, "bank"));
    bank->meta = {{"config_hash", hash}, {"seed", std::to_string(cfg.master_seed)}};
  }
  return *bank;
}

const ScoringModel& Pipeline::ensure_scorer() {
  if (!scorer) scorer = train_scoring(ensure_bank(), cfg.score);
  return scorer->model;
}

const ScoringModel& Pipeline::ensure_scorer_nospatial() {
  if (!scorer_nospatial) {
    ScoreTrainConfig sc = cfg.score;
    sc.spatial = false;
    sc.layout.clear();
    sc.seed = derive_seed(cfg.master_seed, "score/nospatial");
    scorer_nospatial = train_scoring(ensure_bank(), sc);
  }
  return scorer_nospatial->model;
}

const DynamicsModel* Pipeline::ensure_dynamics() {
  if (!cfg.learned_dynamics) return nullptr;
  if (!dynamics) dynamics = train_dynamics(ensure_bank(), cfg.dyn);
  return &dynamics->model;
}

std::shared_ptr<const RolloutModel> Pipeline::rollout() {
  if (!rollout_) {
    const DynamicsModel* d = ensure_dynamics();
    if (d) rollout_ = std::make_shared<LearnedRollout>(*d);
    else rollout_ = std::make_shared<PerfectRollout>();
  }
  return rollout_;
}

std::unique_ptr<Policy> Pipeline::planner_policy(std::shared_ptr<const StepScorer> scorer, const PlannerConfig& pc,
                                                 bool perfect) {
  std::shared_ptr<const RolloutModel> model = perfect ? std::make_shared<PerfectRollout>() : rollout();
  return std::make_unique<PlannerPolicy>(std::move(scorer), std::move(model), pc);
}

const BcModel& Pipeline::bc_model(const std::string& key) {
  if (auto it = bc_cache_.find(key); it != bc_cache_.end()) return it->second;
  BcTrainConfig bc = cfg.bc;
  bc.seed = derive_seed(cfg.bc.seed, key);
  const std::string source = key.substr(0, key.find('/'));
  if (key.size() > source.size()) bc.features = parse_bc_features(key.substr(source.size() + 1));
  const auto spec = cfg.spec(cfg.train_config);
  env::TrajectoryBank data;
  if (source == "random") {
    data = ensure_bank();
  } else if (source == "sap") {
    auto pol = policy("sap");
    data = collect_policy_bank(spec, *pol, cfg.bc_sap_episodes, derive_seed(cfg.master_seed, "bc_sap"));
  } else if (source == "privileged") {
    auto pol = planner_policy(std::make_shared<TrueRewardScorer>(), cfg.planner, true);
    data = collect_policy_bank(spec, *pol, cfg.bc_sap_episodes, derive_seed(cfg.master_seed, "privileged_bc"));
  } else {
    throw ContractError("unknown BC data source '" + source + "'");
  }
  return bc_cache_.emplace(key, train_bc(data, bc).model).first->second;
}

std::unique_ptr<Policy> Pipeline::policy(const std::string& method) {
  if (method == "sap") return planner_policy(std::make_shared<LearnedScorer>(ensure_scorer()), cfg.planner);
  if (method == "sap_nospatial")
    return planner_policy(std::make_shared<LearnedScorer>(ensure_scorer_nospatial()), cfg.planner);
  if (method == "sap_perfect")
    return planner_policy(std::make_shared<LearnedScorer>(ensure_scorer()), cfg.planner, true);
  if (method == "mbhp") return planner_policy(std::make_shared<MbhpScorer>(cfg.env), cfg.planner);
  if (method == "greedy")
    return planner_policy(std::make_shared<LearnedScorer>(ensure_scorer()), greedy_config(cfg.planner));
  auto bc = [&](const std::string& key) { return std::make_unique<BcPolicy>(bc_model(key), BcMode::sample); };
  if (method == "bc_random") return bc("random/" + bc_features_name(cfg.bc.features));
  if (method == "bc_sap") return bc("sap/" + bc_features_name(cfg.bc.features));
  if (method == "privileged_bc") return bc("privileged/" + bc_features_name(cfg.bc.features));
  if (method == "bc_egocentric") return bc("sap/egocentric");
  if (method == "bc_global") return bc("sap/global");
  if (method.rfind("sap_H", 0) == 0) {
    PlannerConfig pc = cfg.planner;
    pc.horizon = std::stoul(method.substr(5));
    return planner_policy(std::make_shared<LearnedScorer>(ensure_scorer()), pc);
  }
  throw ConfigError("unknown method '" + method + "'");
}

std::vector<double> Pipeline::evaluate(Policy& pol, const std::string& env_config, std::size_t episodes) {
  const auto spec = cfg.spec(env_config);
  const std::uint64_t base = derive_seed(cfg.master_seed, "eval");
  const bool steps = cfg.metric() == "steps";
  std::vector<double> out;
  out.reserve(episodes);
  for (std::size_t i = 0; i < episodes; ++i) {
    const auto r = run_episode(spec, pol, derive_seed(base, i));
    out.push_back(steps ? double(r.steps) : r.ret);
  }
  return out;
}

std::vector<double> Pipeline::evaluate(const std::string& method, const std::string& env_config) {
  auto pol = policy(method);
  return evaluate(*pol, env_config, cfg.eval_episodes);
}

MetricsReport run_eval(Pipeline& p) {
  MetricsReport rep;
  rep.config_hash = p.hash;
  rep.seed = p.cfg.master_seed;
  for (const auto& c : p.cfg.test_configs)
    for (const auto& m : p.cfg.methods) rep.add(m, c, p.cfg.metric(), p.evaluate(m, c));
  return rep;
}

MetricsReport run_ablation(Pipeline& p, const std::string& which) {
  MetricsReport rep;
  rep.config_hash = p.hash;
  rep.seed = p.cfg.master_seed;
  std::vector<std::string> methods, configs = p.cfg.test_configs;
  if (which == "spatial") {
    methods = {"sap", "sap_nospatial"};
  } else if (which == "temporal") {
    if (p.cfg.env == EnvId::gridworld) throw UnsupportedEnvError("temporal ablation needs the hand-coded prior, which the gridworld lacks");
    methods = {"sap", "sap_nospatial", "mbhp"};
  } else if (which == "horizon") {
    for (auto h : p.cfg.horizon_sweep) methods.push_back("sap_H" + std::to_string(h));
  } else if (which == "egocentric-bc") {
    methods = {"bc_egocentric", "bc_global"};
    if (std::find(configs.begin(), configs.end(), p.cfg.train_config) == configs.end())
      configs.insert(configs.begin(), p.cfg.train_config);
  } else {
    throw ConfigError("unknown ablation '" + which + "' (spatial | temporal | horizon | egocentric-bc)");
  }
  for (const auto& c : configs)
    for (const auto& m : methods) rep.add(m, c, p.cfg.metric(), p.evaluate(m, c));
  return rep;
}

std::string greedy_map_csv(const ScoringModel& model, const env::Environment& level, const std::string& hash,
                           std::uint64_t seed) {
  std::string out = header_line(hash, seed) + "row,col,best_action\n";
  for (const auto& c : greedy_action_map(model, level)) {
    out += std::to_string(c.row) + "," + std::to_string(c.col) + "," + std::to_string(c.best_action) + "\n";
  }
  return out;
}

// ---- commands ---------------------------------------------------------------

ArtifactPaths::ArtifactPaths(const fs::path& out)
    : bank(out / "bank.jsonl"),
      scorer(out / "scorer.ckpt"),
      scorer_nospatial(out / "scorer_nospatial.ckpt"),
      score_log(out / "score_log.csv"),
      dynamics(out / "dynamics.ckpt"),
      dyn_log(out / "dyn_log.csv"),
      report(out / "report.csv") {}

ExperimentConfig resolve_config(const CommandOptions& opt) {
  ExperimentConfig c = load_config(opt.config);
  if (opt.seed) {
    c.master_seed = *opt.seed;
    c.apply_seeds();
  }
  if (opt.out) c.out_dir = opt.out->string();
  return c;
}

namespace {

std::map<std::string, std::string> provenance(const Pipeline& p) {
  return {{"config_hash", p.hash}, {"seed", std::to_string(p.cfg.master_seed)}};
}

void check_hash(const std::map<std::string, std::string>& meta, const Pipeline& p, const fs::path& path,
                bool force) {
  auto it = meta.find("config_hash");
  const std::string found = it == meta.end() ? "<none>" : it->second;
  if (found != p.hash && !force) {
    throw ConfigError(path.string() + " was produced by config " + found + " but the current config hashes to " +
                      p.hash + "; regenerate it or pass --force");
  }
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw ConfigError("missing artifact: expected " + path.string() + " (run `sap " + producer + "` with the same config first)");
  }
}

void load_bank(Pipeline& p, const ArtifactPaths& a, bool force) {
  require(a.bank, "gen-data");
  p.bank = env::read_bank(a.bank);
  check_hash(p.bank->meta, p, a.bank, force);
}

void load_scorers(Pipeline& p, const ArtifactPaths& a, bool force, bool nospatial) {
  require(a.scorer, "train-score");
  std::map<std::string, std::string> meta;
  p.scorer.emplace();
  p.scorer->model = load_scorer(a.scorer, &meta);
  check_hash(meta, p, a.scorer, force);
  if (nospatial) {
    require(a.scorer_nospatial, "train-score");
    p.scorer_nospatial.emplace();
    p.scorer_nospatial->model = load_scorer(a.scorer_nospatial, &meta);
    check_hash(meta, p, a.scorer_nospatial, force);
  }
}

void load_dyn(Pipeline& p, const ArtifactPaths& a, bool force) {
  if (!p.cfg.learned_dynamics) return;
  require(a.dynamics, "train-dyn");
  std::map<std::string, std::string> meta;
  p.dynamics.emplace();
  p.dynamics->model = load_dynamics(a.dynamics, &meta);
  check_hash(meta, p, a.dynamics, force);
}

bool uses(const std::vector<std::string>& methods, std::initializer_list<const char*> names) {
  for (const auto& m : methods)
    for (const char* n : names)
      if (m == n || (std::string(n) == "sap_H" && m.rfind("sap_H", 0) == 0)) return true;
  return false;
}

// Loads what the given methods need from disk.
void load_for(Pipeline& p, const ArtifactPaths& a, const std::vector<std::string>& methods, bool force) {
  load_bank(p, a, force);
  const bool learned_score =
      uses(methods, {"sap", "sap_nospatial", "sap_perfect", "greedy", "bc_sap", "bc_egocentric", "bc_global", "sap_H"});
  if (learned_score) load_scorers(p, a, force, uses(methods, {"sap_nospatial"}));
  const bool planned = learned_score || uses(methods, {"mbhp"});
  if (planned) load_dyn(p, a, force);
}

std::vector<std::string> ablation_methods(const ExperimentConfig& c, const std::string& which) {
  if (which == "spatial") return {"sap", "sap_nospatial"};
  if (which == "temporal") return {"sap", "sap_nospatial", "mbhp"};
  if (which == "horizon") return {"sap_H"};
  if (which == "egocentric-bc") return {"bc_egocentric"};
  (void)c;
  throw ConfigError("unknown ablation '" + which + "' (spatial | temporal | horizon | egocentric-bc)");
}

}  // namespace

fs::path cmd_gen_data(const CommandOptions& opt) {
  Pipeline p(resolve_config(opt));
  const ArtifactPaths a(p.cfg.out_dir);
  fs::create_directories(p.cfg.out_dir);
  env::write_bank(a.bank, p.ensure_bank());
  return a.bank;
}

fs::path cmd_train_score(const CommandOptions& opt) {
  Pipeline p(resolve_config(opt));
  const ArtifactPaths a(p.cfg.out_dir);
  load_bank(p, a, opt.force);
  save_scorer(a.scorer, p.ensure_scorer(), provenance(p));
  write_score_log(a.score_log, p.scorer->log, header_line(p.hash, p.cfg.master_seed));
  if (p.cfg.train_nospatial) save_scorer(a.scorer_nospatial, p.ensure_scorer_nospatial(), provenance(p));
  return a.scorer;
}

fs::path cmd_train_dyn(const CommandOptions& opt) {
  Pipeline p(resolve_config(opt));
  const ArtifactPaths a(p.cfg.out_dir);
  load_bank(p, a, opt.force);
  // Trained even when planning uses the simulator, so the model can be inspected.
  if (!p.dynamics) p.dynamics = train_dynamics(*p.bank, p.cfg.dyn);
  save_dynamics(a.dynamics, p.dynamics->model, provenance(p));
  write_dyn_log(a.dyn_log, p.dynamics->log, header_line(p.hash, p.cfg.master_seed));
  return a.dynamics;
}

fs::path cmd_eval(const CommandOptions& opt) {
  Pipeline p(resolve_config(opt));
  const ArtifactPaths a(p.cfg.out_dir);
  load_for(p, a, p.cfg.methods, opt.force);
  run_eval(p).write(a.report);
  return a.report;
}

fs::path cmd_ablate(const CommandOptions& opt, const std::string& which) {
  Pipeline p(resolve_config(opt));
  const ArtifactPaths a(p.cfg.out_dir);
  load_for(p, a, ablation_methods(p.cfg, which), opt.force);
  const fs::path out = fs::path(p.cfg.out_dir) / ("ablate_" + which + ".csv");
  run_ablation(p, which).write(out);
  return out;
}

fs::path cmd_viz(const CommandOptions& opt) {
  Pipeline p(resolve_config(opt));
  const ArtifactPaths a(p.cfg.out_dir);
  load_scorers(p, a, opt.force, false);
  fs::path first;
  for (const auto& c : p.cfg.test_configs) {
    auto level = env::make_env(p.cfg.spec(c));
    const fs::path out = fs::path(p.cfg.out_dir) / ("greedy_" + c + ".csv");
    write_text(out, greedy_map_csv(p.scorer->model, *level, p.hash, p.cfg.master_seed));
    if (first.empty()) first = out;
  }
  return first;
}

}  // namespace sap
