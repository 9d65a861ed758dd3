#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "sap/harness.hpp"

namespace {

void add_common(CLI::App* cmd, sap::CommandOptions& opt) {
  cmd->add_option("--config", opt.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", opt.seed, "master seed, overrides the config");
  cmd->add_option("--out", opt.out, "output directory, overrides the config");
  cmd->add_flag("--force", opt.force, "accept artifacts produced by a different config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAP: learn per-step scores from sparse returns, then plan with them"};
  app.require_subcommand(1);
  sap::CommandOptions opt;
  std::string which;

  auto* gen = app.add_subcommand("gen-data", "collect the exploration bank");
  auto* ts = app.add_subcommand("train-score", "fit the scoring model on the bank");
  auto* td = app.add_subcommand("train-dyn", "fit the dynamics model on the bank");
  auto* ev = app.add_subcommand("eval", "zero-shot evaluation on the test configs");
  auto* ab = app.add_subcommand("ablate", "run one ablation");
  auto* vz = app.add_subcommand("viz", "write greedy action maps");
  for (auto* c : {gen, ts, td, ev, ab, vz}) add_common(c, opt);
  ab->add_option("which", which, "spatial | temporal | horizon | egocentric-bc")
      ->required()
      ->check(CLI::IsMember({"spatial", "temporal", "horizon", "egocentric-bc"}));

  CLI11_PARSE(app, argc, argv);
  try {
    std::filesystem::path out;
    if (gen->parsed()) out = sap::cmd_gen_data(opt);
    else if (ts->parsed()) out = sap::cmd_train_score(opt);
    else if (td->parsed()) out = sap::cmd_train_dyn(opt);
    else if (ev->parsed()) out = sap::cmd_eval(opt);
    else if (ab->parsed()) out = sap::cmd_ablate(opt, which);
    else if (vz->parsed()) out = sap::cmd_viz(opt);
    std::printf("wrote %s\n", out.string().c_str());
    if (ev->parsed() || ab->parsed()) {
      auto txt = out;
      txt.replace_extension(".txt");
      if (std::FILE* f = std::fopen(txt.string().c_str(), "r")) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) std::fwrite(buf, 1, n, stdout);
        std::fclose(f);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
