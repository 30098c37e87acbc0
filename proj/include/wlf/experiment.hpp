#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wlf/mlp.hpp"
#include "wlf/series.hpp"
#include "wlf/stats.hpp"
#include "wlf/synth.hpp"
#include "wlf/windowing.hpp"

namespace wlf {

inline constexpr std::size_t kFolds = 5;

struct ExperimentConfig {
  std::string data_dir;
  std::vector<ModeKind> modes;                // canonical order
  std::vector<WorkloadComponent> components;  // forecast targets
  std::vector<double> lag_grid_s;             // ascending
  std::vector<double> pred_grid_s;            // ascending
  TrainConfig train;
  std::optional<SynthParams> synth;
  std::size_t n_synth_subjects = 16;
  std::uint64_t seed = 0;
  std::size_t min_windows_per_fold = 24;
  std::size_t workers = 1;
  // The paper grid is lag {30,60,120,240} x pred {60,120,240}; other values
  // require this override.
  bool allow_custom_grid = false;

  void validate() const;  // throws InvalidConfig
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// Per-(mode, component, lag, pred) Spearman scores across subjects. A
// subject's score is the unweighted mean of its five per-fold correlations;
// folds where rank correlation is undefined are skipped, and a subject whose
// folds are all degenerate is dropped from the cell.
struct CellResult {
  ModeKind mode = ModeKind::Univariate;
  WorkloadComponent component = WorkloadComponent::Overall;
  double lag_s = 0.0;
  double pred_s = 0.0;
  std::map<std::string, double> per_subject_rho;
  std::map<std::string, std::size_t> folds_used;
  std::vector<std::string> dropped_subjects;
  double mean_rho = 0.0;
  double sd_rho = 0.0;  // sample sd (n - 1)
};

struct PairwiseWilcoxon {
  double lag_a_s = 0.0;
  double lag_b_s = 0.0;
  // Differences are rho(lag_b) - rho(lag_a), so positive d favors the longer lag.
  WilcoxonResult result;
  bool all_differences_zero = false;
};

struct LagAnalysis {
  ModeKind mode = ModeKind::Univariate;
  WorkloadComponent component = WorkloadComponent::Overall;
  double pred_s = 0.0;
  std::vector<double> lags;               // columns of the Friedman matrix
  std::vector<std::string> subjects;      // present in every lag column
  FriedmanResult friedman;
  std::vector<PairwiseWilcoxon> pairwise;
};

struct AuditCounters {
  std::size_t train_windows_checked = 0;
  std::size_t train_leaks = 0;
  std::size_t eval_windows_checked = 0;
  std::size_t fold_straddles = 0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<LagAnalysis> analyses;
  AuditCounters audit;
};

std::vector<SubjectSeries> load_cohort(const std::string& dir);
void write_cohort(const std::vector<SubjectSeries>& cohort, const std::string& dir);

// Full grid over the cohort: LOSO training, blocked-fold evaluation, one
// CellResult per (mode, component, lag, pred). Deterministic for a fixed
// seed under any worker count.
std::vector<CellResult> run_experiment(const ExperimentConfig& cfg,
                                       const std::vector<SubjectSeries>& cohort,
                                       AuditCounters* audit = nullptr);
// Loads the cohort from cfg.data_dir first.
std::vector<CellResult> run_experiment(const ExperimentConfig& cfg,
                                       AuditCounters* audit = nullptr);

// Friedman across lag columns plus all pairwise Wilcoxon tests for every
// (mode, component, pred) with >= 3 lag columns over >= 2 common subjects.
// Throws InsufficientColumns when no group qualifies.
std::vector<LagAnalysis> analyze_lag_horizons(const std::vector<CellResult>& results);

// Plain-text table, rows = prediction horizons, columns = lag horizons,
// cells "mean (sd)" at two decimals. Throws IncompleteGrid.
std::string render_table(const std::vector<CellResult>& results, ModeKind mode,
                         WorkloadComponent component);
std::string render_lag_analyses(const std::vector<LagAnalysis>& analyses);

// Deterministic JSON: config echo (without the worker count), per-subject
// scores, aggregates, statistics and the leakage audit, in stable key order.
std::string results_to_json_text(const ExperimentConfig& cfg,
                                 const ExperimentResult& result);
void write_results(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::string& path);
std::vector<CellResult> read_results_cells(const std::string& path);

// synth (when the data directory is absent and synth params exist) + run +
// analyze; the `all` subcommand and the acceptance suite share this path.
ExperimentResult run_all(const ExperimentConfig& cfg);

std::string cell_name(const CellResult& cell);

}  // namespace wlf
