// Command-line front end: plan, sweep, gap, validate.
// Settings come from --config first; explicit flags override them.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "ipp/ipp.hpp"

using namespace ipp;

namespace {

struct Overrides {
  std::optional<std::string> grid, budget, objective, method, seeds, runtime_cap, agents, multimodal;
  std::vector<std::string> sets;  // free-form key=value
};

void add_common(CLI::App* cmd, std::string& config, Overrides& o) {
  cmd->add_option("--config", config, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--grid", o.grid, "grid side length");
  cmd->add_option("--budget", o.budget, "path budget (0 = budget_multiple times the shortest route)");
  cmd->add_option("--objective", o.objective, "A, B, D or EI");
  cmd->add_option("--method", o.method, "comma-separated methods");
  cmd->add_option("--seeds", o.seeds, "seed list, e.g. 0-9 or 1,4,7");
  cmd->add_option("--runtime-cap", o.runtime_cap, "per-run wall-clock cap in seconds");
  cmd->add_option("--agents", o.agents, "number of agents");
  cmd->add_option("--multimodal", o.multimodal, "sensor ladder, e.g. k=3,ladder=0.1;0.2;0.4");
  cmd->add_option("--set", o.sets, "extra key=value setting (repeatable)");
}

ExperimentConfig resolve(const std::string& config, const Overrides& o) {
  ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_config(config);
  const auto apply = [&](const char* key, const std::optional<std::string>& v) {
    if (v) apply_setting(cfg, key, *v);
  };
  apply("grid_side", o.grid);
  apply("budget", o.budget);
  apply("objective", o.objective);
  apply("methods", o.method);
  apply("seeds", o.seeds);
  apply("runtime_cap_s", o.runtime_cap);
  apply("agents", o.agents);
  apply("multimodal", o.multimodal);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got " + s);
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Informative path planning experiments"};
  app.require_subcommand(1);

  std::string config, out;
  Overrides o;
  std::vector<double> multiples;

  auto* plan = app.add_subcommand("plan", "run one seed of one method and print its report as JSON");
  add_common(plan, config, o);
  plan->add_option("--out", out, "also write results here");

  auto* sweep = app.add_subcommand("sweep", "run every method over every seed");
  add_common(sweep, config, o);
  sweep->add_option("--out", out, "output directory for results.csv, reports/ and instance/");

  auto* gap = app.add_subcommand("gap", "ASPO against the relaxation bound over budget multiples");
  add_common(gap, config, o);
  gap->add_option("--out", out, "output directory for gap.csv");
  gap->add_option("--multiples", multiples, "budget multiples (default: gap_budgets from config)");

  auto* validate = app.add_subcommand("validate", "re-check stored reports against their instances");
  validate->add_option("--out", out, "directory produced by sweep")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto r = validate_reports(out);
      std::cout << "checked " << r.checked << ", skipped " << r.skipped << ", failures " << r.failures.size() << "\n";
      for (const auto& f : r.failures) std::cout << "  " << f << "\n";
      return r.ok() ? 0 : 1;
    }
    ExperimentConfig cfg = resolve(config, o);
    if (*plan) {
      if (cfg.methods.size() != 1) cfg.methods.resize(1);
      if (cfg.seeds.size() != 1) cfg.seeds.resize(1);
      const auto summary = run_experiment(cfg, out);
      const auto& row = summary.rows.front();
      if (row.status != "ok") {
        std::cerr << row.method << " failed: " << row.error << "\n";
        return 1;
      }
      std::cout << to_json(summary.reports.front()).dump(2) << "\n";
      return 0;
    }
    if (*sweep) {
      const auto summary = run_experiment(cfg, out);
      print_summary(std::cout, summary);
      return 0;
    }
    if (*gap) {
      const auto study = gap_study(cfg, multiples.empty() ? cfg.gap_budgets : multiples, out);
      std::cout << "budget_multiple,mean_ratio,median_ratio\n";
      for (std::size_t q = 0; q < study.budgets.size(); ++q)
        std::cout << study.budgets[q] << "," << study.mean_ratio[q] << "," << study.median_ratio[q] << "\n";
      std::cout << "nonincreasing fraction " << study.nonincreasing_fraction << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
