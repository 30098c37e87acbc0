#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wlf/error.hpp"
#include "wlf/experiment.hpp"

namespace {

struct Overrides {
  std::optional<std::string> data_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::string> modes;
  std::vector<std::string> components;
  std::vector<double> lags;
  std::vector<double> preds;
};

void apply_overrides(wlf::ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.data_dir) cfg.data_dir = *ov.data_dir;
  if (ov.seed) {
    cfg.seed = *ov.seed;
    if (cfg.synth) cfg.synth->seed = *ov.seed;
  }
  if (ov.workers) cfg.workers = *ov.workers;
  if (!ov.modes.empty()) {
    cfg.modes.clear();
    for (const auto& m : ov.modes) cfg.modes.push_back(wlf::mode_kind_from_name(m));
  }
  if (!ov.components.empty()) {
    cfg.components.clear();
    for (const auto& c : ov.components) {
      cfg.components.push_back(wlf::component_from_name(c));
    }
  }
  if (!ov.lags.empty()) cfg.lag_grid_s = ov.lags;
  if (!ov.preds.empty()) cfg.pred_grid_s = ov.preds;
  cfg.validate();
}

void print_tables(const std::vector<wlf::CellResult>& cells,
                  const wlf::ExperimentConfig& cfg) {
  for (const auto kind : cfg.modes) {
    for (const auto component : cfg.components) {
      std::cout << wlf::render_table(cells, kind, component) << '\n';
    }
  }
}

int run_synth(const wlf::ExperimentConfig& cfg) {
  if (!cfg.synth) {
    throw wlf::Error(wlf::ErrorCode::InvalidConfig,
                     "config has no synth section; nothing to generate");
  }
  const auto cohort = wlf::synthesize_cohort(cfg.n_synth_subjects, *cfg.synth);
  wlf::write_cohort(cohort, cfg.data_dir);
  std::cout << "wrote " << cohort.size() << " series to " << cfg.data_dir << '\n';
  return 0;
}

int run_run(const wlf::ExperimentConfig& cfg, const std::string& out_path) {
  wlf::ExperimentResult result;
  result.cells = wlf::run_experiment(cfg, &result.audit);
  try {
    result.analyses = wlf::analyze_lag_horizons(result.cells);
  } catch (const wlf::Error& e) {
    if (e.code() != wlf::ErrorCode::InsufficientColumns) throw;
    std::cerr << "note: grid too small for the lag-horizon analysis\n";
  }
  wlf::write_results(cfg, result, out_path);
  std::cout << "wrote " << result.cells.size() << " cells to " << out_path << '\n';
  return 0;
}

int run_all_cmd(const wlf::ExperimentConfig& cfg, const std::string& out_path) {
  const wlf::ExperimentResult result = wlf::run_all(cfg);
  wlf::write_results(cfg, result, out_path);
  print_tables(result.cells, cfg);
  std::cout << wlf::render_lag_analyses(result.analyses);
  std::cout << "wrote results to " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"workload forecasting lag-horizon experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string results_path = "results.json";
  std::string out_path = "results.json";
  std::string table_mode = "univariate";
  std::string table_component = "overall";
  Overrides ov;

  auto add_config_flags = [&](CLI::App* cmd, bool with_grid) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--data-dir", ov.data_dir, "cohort directory override");
    cmd->add_option("--seed", ov.seed, "experiment seed override");
    if (with_grid) {
      cmd->add_option("--workers", ov.workers, "parallel worker count");
      cmd->add_option("--mode", ov.modes, "forecast mode(s): univariate, multivariate");
      cmd->add_option("--component", ov.components, "target component(s)");
      cmd->add_option("--lag", ov.lags, "lag horizon(s) in seconds");
      cmd->add_option("--pred", ov.preds, "prediction horizon(s) in seconds");
    }
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  add_config_flags(synth, false);

  CLI::App* run = app.add_subcommand("run", "run the full experiment grid");
  add_config_flags(run, true);
  run->add_option("--out", out_path, "results file path");

  CLI::App* table = app.add_subcommand("table", "render one mode/component table");
  table->add_option("--results", results_path, "results file from `run`")->required();
  table->add_option("--mode", table_mode, "univariate or multivariate");
  table->add_option("--component", table_component, "target component");

  CLI::App* stats = app.add_subcommand("stats", "lag-horizon statistical report");
  stats->add_option("--results", results_path, "results file from `run`")->required();

  CLI::App* all = app.add_subcommand("all", "synth + run + table + stats");
  add_config_flags(all, true);
  all->add_option("--out", out_path, "results file path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed() || run->parsed() || all->parsed()) {
      wlf::ExperimentConfig cfg = wlf::load_config(config_path);
      apply_overrides(cfg, ov);
      if (synth->parsed()) return run_synth(cfg);
      if (run->parsed()) return run_run(cfg, out_path);
      return run_all_cmd(cfg, out_path);
    }
    if (table->parsed()) {
      const auto cells = wlf::read_results_cells(results_path);
      std::cout << wlf::render_table(cells, wlf::mode_kind_from_name(table_mode),
                                     wlf::component_from_name(table_component));
      return 0;
    }
    if (stats->parsed()) {
      const auto cells = wlf::read_results_cells(results_path);
      std::cout << wlf::render_lag_analyses(wlf::analyze_lag_horizons(cells));
      return 0;
    }
  } catch (const wlf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == wlf::ErrorCode::IoFailure ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
