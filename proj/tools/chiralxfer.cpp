// Command-line front end: registry listing, configuration validation,
// experiment runs, and the acceptance suite.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chiralxfer/acceptance.hpp"
#include "chiralxfer/harness.hpp"

namespace {

using chiralxfer::Json;

Json build_user_config(const std::string& config_path,
                       const std::string& experiment,
                       const std::vector<std::string>& sets) {
  Json user = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot read config: " + config_path);
    in >> user;
  }
  if (!experiment.empty()) user["experiment"] = experiment;
  for (const auto& kv : sets) chiralxfer::apply_override(user, kv);
  return user;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chiralxfer: waveguide quantum state transfer experiments"};
  app.require_subcommand(1);

  std::string config_path, output_path, format, experiment;
  std::vector<std::string> sets;
  int jobs = 0;

  CLI::App* list = app.add_subcommand("list", "show the experiment registry");

  CLI::App* validate =
      app.add_subcommand("validate", "check a configuration without running");
  validate->add_option("experiment", experiment, "experiment name");
  validate->add_option("--config", config_path, "JSON configuration file");
  validate->add_option("--set", sets, "dotted-path overrides (key=value)");

  CLI::App* run = app.add_subcommand("run", "run an experiment sweep");
  run->add_option("experiment", experiment, "experiment name");
  run->add_option("--config", config_path, "JSON configuration file");
  run->add_option("--set", sets, "dotted-path overrides (key=value)");
  run->add_option("--output", output_path, "output file (default stdout)");
  run->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--jobs", jobs, "concurrent sweep points");

  std::vector<int> criteria;
  CLI::App* accept =
      app.add_subcommand("accept", "run the acceptance suite");
  accept->add_option("--criteria", criteria,
                     "criterion numbers to run (default: all)");
  accept->add_option("--jobs", jobs, "concurrent sweep points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& e : chiralxfer::experiment_registry())
        std::cout << e.name << " [" << e.engine << "]: " << e.reproduces
                  << "\n";
      return 0;
    }

    if (validate->parsed()) {
      Json user = build_user_config(config_path, experiment, sets);
      auto report = chiralxfer::validate_config(user);
      if (report.empty()) {
        std::cout << "ok\n";
        return 0;
      }
      for (const auto& e : report) std::cout << "error: " << e << "\n";
      return 1;
    }

    if (run->parsed()) {
      Json user = build_user_config(config_path, experiment, sets);
      Json cfg = chiralxfer::resolve_config(user);
      auto rows = chiralxfer::run_experiment(user, jobs);
      std::string fmt = !format.empty() ? format
                                        : cfg.value("format", "csv");
      std::string out = !output_path.empty()
                            ? output_path
                            : cfg.value("output_path", "");
      if (out.empty())
        chiralxfer::emit(rows, fmt, std::cout);
      else
        chiralxfer::emit_file(rows, fmt, out);
      return 0;
    }

    if (accept->parsed()) {
      auto outcomes = chiralxfer::run_acceptance(criteria, jobs, &std::cerr);
      bool all = true;
      for (const auto& oc : outcomes) {
        all = all && oc.pass;
        std::cout << "criterion " << oc.id << ": "
                  << (oc.pass ? "PASS" : "FAIL") << " - " << oc.title
                  << ": " << oc.detail << "\n";
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
