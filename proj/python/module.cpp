#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "sap/contingency.hpp"
#include "sap/env/bank.hpp"
#include "sap/error.hpp"
#include "sap/harness.hpp"
#include "sap/reward.hpp"

namespace py = pybind11;
using namespace sap;

namespace {

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

// Owning handle on one environment instance.
struct PyEnv {
  std::unique_ptr<env::Environment> e;

  PyEnv(const std::string& name, const std::string& config, std::uint64_t world_seed)
      : e(env::make_env(env::make_spec(env::parse_env_id(name), config, world_seed))) {}
};

}  // namespace

PYBIND11_MODULE(_sap, m) {
  m.doc() = "sap core bindings";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<UnsupportedEnvError>(m, "UnsupportedEnvError", PyExc_ValueError);

  py::class_<PyEnv>(m, "Environment")
      .def(py::init<const std::string&, const std::string&, std::uint64_t>(), py::arg("env"), py::arg("config"),
           py::arg("world_seed") = env::kDefaultWorldSeed)
      .def("reset", [](PyEnv& s, std::uint64_t seed) { s.e->reset(seed); }, py::arg("seed") = 0)
      .def("step", [](PyEnv& s, std::uint32_t a) {
        if (a >= s.e->action_count()) throw ContractError("invalid action " + std::to_string(a));
        s.e->step(a);
      })
      .def("snapshot", [](const PyEnv& s) { return s.e->snapshot(); })
      .def("restore", [](PyEnv& s, const env::Snapshot& x) { s.e->restore(x); })
      .def_property_readonly("position", [](const PyEnv& s) { return s.e->position(); })
      .def_property_readonly("action_count", [](const PyEnv& s) { return s.e->action_count(); })
      .def_property_readonly("step_count", [](const PyEnv& s) { return s.e->step_count(); })
      .def_property_readonly("terminal_reward", [](const PyEnv& s) { return s.e->terminal_reward(); })
      .def_property_readonly("done", [](const PyEnv& s) { return s.e->done(); })
      .def_property_readonly("at_goal", [](const PyEnv& s) { return s.e->at_goal(); })
      .def_property_readonly("terminated", [](const PyEnv& s) { return s.e->terminated(); });

  m.def("config_names", [](const std::string& name) { return env::config_names(env::parse_env_id(name)); });
  m.def("window_width", [](const std::string& name) { return window_spec(env::parse_env_id(name)).width(); });
  m.def("extract_window", [](const PyEnv& s) { return extract_window(*s.e); });

  m.def("aggregate", [](const std::vector<double>& xs, const std::string& g) { return aggregate(xs, parse_aggregator(g)); },
        py::arg("scores"), py::arg("aggregator") = "sum");
  m.def("compute_ci", [](const std::vector<double>& xs) {
    const auto ci = compute_ci(xs);
    return py::dict(py::arg("mean") = ci.mean, py::arg("half_width") = ci.half_width, py::arg("sd") = ci.sd);
  });

  m.def("exploration_bank",
        [](const std::string& name, const std::string& config, std::size_t n, std::uint64_t seed) {
          const auto id = env::parse_env_id(name);
          return env::bank_to_jsonl(env::generate_exploration_bank(env::make_spec(id, config),
                                                                   env::default_exploration(id), n, seed));
        },
        py::arg("env"), py::arg("config"), py::arg("n"), py::arg("seed") = 0,
        "Exploration bank with the env's default policy, as JSONL text.");
  m.def("replay_check", [](const std::string& jsonl) {
    const auto bank = env::bank_from_jsonl(jsonl);
    for (const auto& t : bank.trajectories)
      if (!env::replay_check(bank.spec, t)) return false;
    return true;
  });

  m.def("default_config", [](const std::string& name) {
    auto c = ExperimentConfig::defaults(env::parse_env_id(name));
    return to_py(c.to_json());
  });
  m.def("parse_config", [](const std::string& text) { return to_py(parse_config(text).to_json()); });
  m.def("load_config", [](const std::filesystem::path& p) { return to_py(load_config(p).to_json()); });
  m.def("config_hash", [](const std::string& text) { return config_hash(parse_config(text)); });

  m.def("run",
        [](const std::string& command, const std::filesystem::path& config, std::optional<std::uint64_t> seed,
           std::optional<std::filesystem::path> out, bool force, const std::string& which) {
          CommandOptions o{config, seed, out, force};
          py::gil_scoped_release release;
          if (command == "gen-data") return cmd_gen_data(o);
          if (command == "train-score") return cmd_train_score(o);
          if (command == "train-dyn") return cmd_train_dyn(o);
          if (command == "eval") return cmd_eval(o);
          if (command == "ablate") return cmd_ablate(o, which);
          if (command == "viz") return cmd_viz(o);
          throw ConfigError("unknown command '" + command + "'");
        },
        py::arg("command"), py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
        py::arg("force") = false, py::arg("which") = "spatial",
        "Runs one pipeline stage like the command-line tool; returns the main output path.");
}
