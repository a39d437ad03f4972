// Command-line driver: run, validate and summarize experiments.
//
// Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 usage or
// configuration error, 3 any other failure.

#include <iostream>

#include <CLI11.hpp>

#include "bec/errors.hpp"
#include "bec/experiments.hpp"
#include "bec/report.hpp"

namespace {

constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kError = 3;

std::string kinds_list() {
  std::string s;
  for (const auto& k : bec::experiment_kinds()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice mean-field boson experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, report_dir, kind;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "run an experiment and write report.json plus CSVs");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (default: config \"output\" or results/<experiment>)");
  run->add_option("--override", overrides, "key.path=value, repeatable")->take_all();

  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled in");
  validate->add_option("config", config_path, "experiment config (JSON)")->required();
  validate->add_option("--override", overrides, "key.path=value, repeatable")->take_all();

  auto* report = app.add_subcommand("report", "summarize a written report");
  report->add_option("dir", report_dir, "run directory or report.json")->required();

  auto* defaults = app.add_subcommand("defaults", "print the default config of an experiment kind");
  defaults->add_option("kind", kind, "one of: " + kinds_list())->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*run) {
      const auto cfg = bec::load_config(config_path, overrides);
      std::filesystem::path dir = !out_dir.empty() ? std::filesystem::path(out_dir)
                                                   : cfg.output().value_or("results/" + cfg.experiment);
      const auto rep = bec::run_experiment(cfg, dir);
      std::cout << bec::format_report(rep) << "report: " << (dir / "report.json").string() << '\n';
      return bec::report_passed(rep) ? 0 : kFail;
    }
    if (*validate) {
      const auto cfg = bec::load_config(config_path, overrides);
      std::cout << cfg.doc.dump(2) << '\n';
      return 0;
    }
    if (*report) {
      const auto rep = bec::read_report(report_dir);
      std::cout << bec::format_report(rep);
      return bec::report_passed(rep) ? 0 : kFail;
    }
    if (*defaults) {
      std::cout << bec::default_config(kind).dump(2) << '\n';
      return 0;
    }
  } catch (const bec::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kUsage;
}
