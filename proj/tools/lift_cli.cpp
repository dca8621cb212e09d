// lift: dataset generation, shortcut extraction, LIFT collection,
// evaluation and verification from one config file.

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "lift/lift.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> n;
  std::optional<double> p;
  std::optional<double> C;
  std::optional<std::string> strategy;
  std::optional<std::size_t> cap;
  std::optional<std::string> data;
  std::optional<std::string> model;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "config file (key = value lines)");
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--out", f.out, "primary output path");
  cmd->add_option("--n", f.n, "number of episodes to collect");
  cmd->add_option("--p", f.p, "override probability");
  cmd->add_option("--C", f.C, "shortcut threshold");
  cmd->add_option("--strategy", f.strategy, "shortcut sampling strategy");
  cmd->add_option("--cap", f.cap, "per-episode override cap and per-trajectory shortcut cap");
}

lift::ExperimentConfig resolve(const Flags& f, const std::string& command) {
  lift::ExperimentConfig cfg;
  cfg.sync();
  if (!f.config.empty()) cfg = lift::load_config(f.config);

  std::vector<std::pair<std::string, std::string>> entries;
  const auto num = [](double x) { return lift::format_double(x); };
  if (f.seed) entries.emplace_back("seed", std::to_string(*f.seed));
  if (f.n) entries.emplace_back("collect.n", std::to_string(*f.n));
  if (f.p) entries.emplace_back("collect.p", num(*f.p));
  if (f.C) entries.emplace_back("shortcut.C", num(*f.C));
  if (f.strategy) entries.emplace_back("shortcut.strategy", *f.strategy);
  if (f.cap) {
    entries.emplace_back("collect.cap", std::to_string(*f.cap));
    entries.emplace_back("shortcut.cap", std::to_string(*f.cap));
  }
  if (f.data) entries.emplace_back("input.data", *f.data);
  if (f.model) entries.emplace_back("input.model", *f.model);
  if (f.out) {
    const char* key = command == "extract-shortcuts" ? "output.shortcuts"
                      : command == "evaluate"        ? "output.evaluation"
                      : command == "verify"          ? "output.report"
                                                     : "output.data";
    entries.emplace_back(key, *f.out);
  }
  return lift::apply_config_entries(cfg, entries);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LIFT data collection and shortcut tooling"};
  app.require_subcommand(1);
  Flags flags;

  auto* gen = app.add_subcommand("gen-data", "collect plain logging-policy trajectories");
  auto* extract = app.add_subcommand("extract-shortcuts", "emit shortcut tuples for a dataset");
  auto* lift_cmd = app.add_subcommand("collect-lift", "collect with the augmentor overriding actions");
  auto* eval = app.add_subcommand("evaluate", "median distance-to-target curve as CSV");
  auto* verify = app.add_subcommand("verify", "run the verification suite");
  for (auto* cmd : {gen, extract, lift_cmd, eval, verify}) add_common(cmd, flags);
  extract->add_option("--data", flags.data, "input dataset");
  eval->add_option("--model", flags.model, "trained model to evaluate instead of the logging policy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lift::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const lift::ExperimentConfig cfg = resolve(flags, command);
    if (command == "gen-data") return lift::cmd_gen_data(cfg, std::cout);
    if (command == "extract-shortcuts") return lift::cmd_extract_shortcuts(cfg, std::cout);
    if (command == "collect-lift") return lift::cmd_collect_lift(cfg, std::cout);
    if (command == "evaluate") return lift::cmd_evaluate(cfg, std::cout);
    return lift::cmd_verify(cfg, std::cout);
  } catch (const lift::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lift::kExitIo;
  } catch (const lift::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lift::kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lift::kExitUsage;
  }
}
