#include "wlf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wlf/error.hpp"
#include "wlf/rng.hpp"

namespace wlf {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::vector<double> kPaperLagGrid = {30, 60, 120, 240};
const std::vector<double> kPaperPredGrid = {60, 120, 240};

// Runs fn(0..n) across a fixed-size pool. Each job owns its output slot, so
// results are identical for any worker count.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<double> sorted_unique(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

bool subset_of(const std::vector<double>& values, const std::vector<double>& allowed) {
  return std::all_of(values.begin(), values.end(), [&](double v) {
    return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
  });
}

std::vector<ModeKind> canonical_modes(const std::vector<ModeKind>& modes) {
  std::vector<ModeKind> out;
  for (ModeKind kind : {ModeKind::Univariate, ModeKind::Multivariate}) {
    if (std::find(modes.begin(), modes.end(), kind) != modes.end()) out.push_back(kind);
  }
  return out;
}

std::vector<WorkloadComponent> canonical_components(
    const std::vector<WorkloadComponent>& components) {
  std::vector<WorkloadComponent> out;
  for (WorkloadComponent c : all_channels()) {
    if (std::find(components.begin(), components.end(), c) != components.end()) {
      out.push_back(c);
    }
  }
  return out;
}

std::string seconds_label(double s) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%g", s);
  return buffer;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig t;
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.val_fraction = j.value("val_fraction", t.val_fraction);
  t.adam_beta1 = j.value("adam_beta1", t.adam_beta1);
  t.adam_beta2 = j.value("adam_beta2", t.adam_beta2);
  t.adam_eps = j.value("adam_eps", t.adam_eps);
  return t;
}

ordered_json train_config_to_json(const TrainConfig& t) {
  ordered_json j;
  j["learning_rate"] = t.learning_rate;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["val_fraction"] = t.val_fraction;
  j["adam_beta1"] = t.adam_beta1;
  j["adam_beta2"] = t.adam_beta2;
  j["adam_eps"] = t.adam_eps;
  return j;
}

SynthParams synth_params_from_json(const ordered_json& j) {
  SynthParams p;
  p.segment_duration_s = j.value("segment_duration_s", p.segment_duration_s);
  p.sample_period_s = j.value("sample_period_s", p.sample_period_s);
  p.ar1_coefficient = j.value("ar1_coefficient", p.ar1_coefficient);
  p.noise_sd = j.value("noise_sd", p.noise_sd);
  p.transition_ramp_s = j.value("transition_ramp_s", p.transition_ramp_s);
  p.seed = j.value("seed", p.seed);
  if (!j.contains("base_levels")) {
    throw Error(ErrorCode::InvalidConfig, "synth config requires base_levels");
  }
  const auto& levels = j.at("base_levels");
  for (std::size_t lv = 0; lv < kNumLevels; ++lv) {
    const auto level = static_cast<WorkloadLevel>(lv);
    if (!levels.contains(level_name(level))) {
      throw Error(ErrorCode::InvalidConfig,
                  std::string("base_levels lacks '") + level_name(level) + "'");
    }
    const auto& per_component = levels.at(level_name(level));
    for (std::size_t c = 0; c < kNumComponents; ++c) {
      const char* name = component_name(static_cast<WorkloadComponent>(c));
      if (!per_component.contains(name)) {
        throw Error(ErrorCode::InvalidConfig,
                    std::string("base_levels['") + level_name(level) +
                        "'] lacks component '" + name + "'");
      }
      p.base_levels[lv][c] = per_component.at(name).get<double>();
    }
  }
  return p;
}

ordered_json synth_params_to_json(const SynthParams& p, std::size_t n_subjects) {
  ordered_json j;
  j["n_subjects"] = n_subjects;
  j["segment_duration_s"] = p.segment_duration_s;
  j["sample_period_s"] = p.sample_period_s;
  j["ar1_coefficient"] = p.ar1_coefficient;
  j["noise_sd"] = p.noise_sd;
  j["transition_ramp_s"] = p.transition_ramp_s;
  j["seed"] = p.seed;
  ordered_json levels;
  for (std::size_t lv = 0; lv < kNumLevels; ++lv) {
    ordered_json per_component;
    for (std::size_t c = 0; c < kNumComponents; ++c) {
      per_component[component_name(static_cast<WorkloadComponent>(c))] =
          p.base_levels[lv][c];
    }
    levels[level_name(static_cast<WorkloadLevel>(lv))] = per_component;
  }
  j["base_levels"] = levels;
  return j;
}

struct TaskOutcome {
  std::string subject;
  double rho = 0.0;
  std::size_t folds_used = 0;
  bool dropped = false;
  AuditCounters audit;
};

struct CellPlan {
  ModeKind mode;
  WorkloadComponent component;
  double lag_s;
  double pred_s;
  std::vector<CvTask> tasks;
};

void aggregate_cell(CellResult& cell) {
  const std::size_t n = cell.per_subject_rho.size();
  if (n == 0) {
    cell.mean_rho = 0.0;
    cell.sd_rho = 0.0;
    return;
  }
  double sum = 0.0;
  for (const auto& [subject, rho] : cell.per_subject_rho) sum += rho;
  cell.mean_rho = sum / double(n);
  if (n < 2) {
    cell.sd_rho = 0.0;
    return;
  }
  double ss = 0.0;
  for (const auto& [subject, rho] : cell.per_subject_rho) {
    ss += (rho - cell.mean_rho) * (rho - cell.mean_rho);
  }
  cell.sd_rho = std::sqrt(ss / double(n - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (modes.empty()) throw Error(ErrorCode::InvalidConfig, "no forecast modes selected");
  if (components.empty()) throw Error(ErrorCode::InvalidConfig, "no components selected");
  if (lag_grid_s.empty() || pred_grid_s.empty()) {
    throw Error(ErrorCode::InvalidConfig, "lag and pred grids must be non-empty");
  }
  if (!allow_custom_grid) {
    if (!subset_of(lag_grid_s, kPaperLagGrid)) {
      throw Error(ErrorCode::InvalidConfig,
                  "lag grid outside {30,60,120,240}; set allow_custom_grid to override");
    }
    if (!subset_of(pred_grid_s, kPaperPredGrid)) {
      throw Error(ErrorCode::InvalidConfig,
                  "pred grid outside {60,120,240}; set allow_custom_grid to override");
    }
  }
  for (double lag : lag_grid_s) {
    for (double pred : pred_grid_s) {
      HorizonConfig probe(lag, pred);  // validates multiples and the 600 s span
      (void)probe;
    }
  }
  if (min_windows_per_fold < 1) {
    throw Error(ErrorCode::InvalidConfig, "min_windows_per_fold must be at least 1");
  }
  if (workers < 1) throw Error(ErrorCode::InvalidConfig, "workers must be at least 1");
  train.validate();
  if (synth) synth->validate();
}

ExperimentConfig parse_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.data_dir = j.value("data_dir", cfg.data_dir);
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : j.at("modes")) {
        cfg.modes.push_back(mode_kind_from_name(m.get<std::string>()));
      }
    } else {
      cfg.modes = {ModeKind::Univariate, ModeKind::Multivariate};
    }
    if (j.contains("components")) {
      cfg.components.clear();
      for (const auto& c : j.at("components")) {
        cfg.components.push_back(component_from_name(c.get<std::string>()));
      }
    } else {
      cfg.components = {WorkloadComponent::Overall};
    }
    cfg.lag_grid_s = j.contains("lag_grid_s")
                         ? j.at("lag_grid_s").get<std::vector<double>>()
                         : kPaperLagGrid;
    cfg.pred_grid_s = j.contains("pred_grid_s")
                          ? j.at("pred_grid_s").get<std::vector<double>>()
                          : kPaperPredGrid;
    cfg.lag_grid_s = sorted_unique(cfg.lag_grid_s);
    cfg.pred_grid_s = sorted_unique(cfg.pred_grid_s);
    cfg.modes = canonical_modes(cfg.modes);
    cfg.components = canonical_components(cfg.components);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.min_windows_per_fold = j.value("min_windows_per_fold", cfg.min_windows_per_fold);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.allow_custom_grid = j.value("allow_custom_grid", cfg.allow_custom_grid);
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
    if (j.contains("synth")) {
      cfg.synth = synth_params_from_json(j.at("synth"));
      cfg.n_synth_subjects = j.at("synth").value("n_subjects", cfg.n_synth_subjects);
      if (!j.at("synth").contains("seed")) cfg.synth->seed = cfg.seed;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad config field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::vector<SubjectSeries> load_cohort(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoFailure, "cohort directory '" + dir + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SubjectSeries> cohort;
  cohort.reserve(files.size());
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read '" + path.string() + "'");
    SubjectSeries series = parse_series_csv(in, path.stem().string());
    // finer uniform grids are mean-binned onto the 5 s base step before use
    cohort.push_back(rebin_series(series, 5.0));
  }
  return cohort;
}

void write_cohort(const std::vector<SubjectSeries>& cohort, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create '" + dir + "': " + ec.message());
  for (const auto& series : cohort) {
    const fs::path path = fs::path(dir) / (series.subject_id + ".csv");
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
    out << serialize_series_csv(series);
    if (!out.good()) throw Error(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
  }
}

std::string cell_name(const CellResult& cell) {
  return std::string(mode_kind_name(cell.mode)) + "/" + component_name(cell.component) +
         "/lag" + seconds_label(cell.lag_s) + "/pred" + seconds_label(cell.pred_s);
}

std::vector<CellResult> run_experiment(const ExperimentConfig& cfg,
                                       const std::vector<SubjectSeries>& cohort,
                                       AuditCounters* audit_out) {
  cfg.validate();

  std::map<std::string, const SubjectSeries*> by_subject;
  std::vector<SeriesMeta> metas;
  for (const auto& series : cohort) {
    metas.push_back(validate_series(series));
    if (!by_subject.emplace(series.subject_id, &series).second) {
      throw Error(ErrorCode::InvalidConfig,
                  "duplicate subject id '" + series.subject_id + "'");
    }
  }

  // canonical cell order regardless of config listing order
  const auto modes = canonical_modes(cfg.modes);
  const auto components = canonical_components(cfg.components);
  const auto lags = sorted_unique(cfg.lag_grid_s);
  const auto preds = sorted_unique(cfg.pred_grid_s);

  std::vector<CellPlan> cells;
  for (const ModeKind kind : modes) {
    for (const WorkloadComponent component : components) {
      for (const double lag : lags) {
        for (const double pred : preds) {
          const HorizonConfig horizon(lag, pred);
          const ForecastMode mode{kind, component};
          CellPlan plan{kind, component, lag, pred,
                        plan_loso_cv(metas, horizon, mode, kFolds,
                                     cfg.min_windows_per_fold)};
          cells.push_back(std::move(plan));
        }
      }
    }
  }

  struct Job {
    std::size_t cell;
    std::size_t task;
  };
  std::vector<Job> jobs;
  std::vector<std::vector<TaskOutcome>> outcomes(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    outcomes[c].resize(cells[c].tasks.size());
    for (std::size_t t = 0; t < cells[c].tasks.size(); ++t) jobs.push_back({c, t});
  }

  parallel_for(jobs.size(), cfg.workers, [&](std::size_t job_index) {
    const Job job = jobs[job_index];
    const CellPlan& cell = cells[job.cell];
    const CvTask& task = cell.tasks[job.task];
    TaskOutcome& outcome = outcomes[job.cell][job.task];
    outcome.subject = task.test_subject;

    const HorizonConfig& horizon = task.config;
    const ForecastMode& mode = task.mode;
    const std::set<std::string> train_set(task.train_subjects.begin(),
                                          task.train_subjects.end());

    std::vector<WindowSample> train_windows;
    for (const std::string& subject : task.train_subjects) {
      const auto windows = build_windows(*by_subject.at(subject), horizon, mode);
      train_windows.insert(train_windows.end(), windows.begin(), windows.end());
    }
    for (const WindowSample& w : train_windows) {
      ++outcome.audit.train_windows_checked;
      if (w.subject_id == task.test_subject || !train_set.count(w.subject_id)) {
        ++outcome.audit.train_leaks;
      }
    }

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = mix_seed({cfg.seed, std::uint64_t(cell.mode),
                               std::uint64_t(cell.component),
                               std::uint64_t(std::llround(cell.lag_s)),
                               std::uint64_t(std::llround(cell.pred_s)),
                               fnv1a_hash(task.test_subject)});
    const std::size_t d_in = horizon.lag_samples() * mode.n_input_channels();
    auto [model, report] = train_early_stopping(train_windows, train_cfg, d_in);

    const SubjectSeries& test_series = *by_subject.at(task.test_subject);
    double rho_sum = 0.0;
    std::size_t folds_used = 0;
    for (std::size_t fold = 0; fold < task.fold_plan.k; ++fold) {
      const SampleRange block = task.fold_plan.block(fold);
      const auto eval_windows = build_windows(test_series, horizon, mode, block);
      const std::size_t span = horizon.lag_samples() + horizon.pred_samples() - 1;
      for (const WindowSample& w : eval_windows) {
        ++outcome.audit.eval_windows_checked;
        const std::size_t start = w.target_index - span;
        if (start < block.begin || w.target_index >= block.end) {
          ++outcome.audit.fold_straddles;
        }
      }
      const auto predictions = predict_block(model, test_series, horizon, mode, block);
      std::vector<double> predicted(predictions.size()), truth(predictions.size());
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        predicted[i] = predictions[i].prediction;
        truth[i] = predictions[i].truth;
      }
      try {
        rho_sum += spearman_rho(predicted, truth).rho;
        ++folds_used;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ConstantInput) throw;
        // rank correlation undefined on a flat fold; skip it
      }
    }
    if (folds_used == 0) {
      outcome.dropped = true;
    } else {
      outcome.rho = rho_sum / double(folds_used);
      outcome.folds_used = folds_used;
    }
  });

  AuditCounters audit;
  std::vector<CellResult> results;
  results.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult cell;
    cell.mode = cells[c].mode;
    cell.component = cells[c].component;
    cell.lag_s = cells[c].lag_s;
    cell.pred_s = cells[c].pred_s;
    for (const TaskOutcome& outcome : outcomes[c]) {
      audit.train_windows_checked += outcome.audit.train_windows_checked;
      audit.train_leaks += outcome.audit.train_leaks;
      audit.eval_windows_checked += outcome.audit.eval_windows_checked;
      audit.fold_straddles += outcome.audit.fold_straddles;
      if (outcome.dropped) {
        cell.dropped_subjects.push_back(outcome.subject);
      } else {
        cell.per_subject_rho[outcome.subject] = outcome.rho;
        cell.folds_used[outcome.subject] = outcome.folds_used;
      }
    }
    aggregate_cell(cell);
    results.push_back(std::move(cell));
  }
  if (audit_out) *audit_out = audit;
  return results;
}

std::vector<CellResult> run_experiment(const ExperimentConfig& cfg,
                                       AuditCounters* audit_out) {
  return run_experiment(cfg, load_cohort(cfg.data_dir), audit_out);
}

std::vector<LagAnalysis> analyze_lag_horizons(const std::vector<CellResult>& results) {
  // group cells by (mode, component, pred); columns are the lag horizons
  std::map<std::tuple<int, int, double>, std::map<double, const CellResult*>> groups;
  for (const auto& cell : results) {
    groups[{int(cell.mode), int(cell.component), cell.pred_s}][cell.lag_s] = &cell;
  }

  std::vector<LagAnalysis> analyses;
  for (const auto& [key, columns] : groups) {
    if (columns.size() < 3) continue;

    std::vector<std::string> common;
    bool first = true;
    for (const auto& [lag, cell] : columns) {
      std::vector<std::string> subjects;
      for (const auto& [subject, rho] : cell->per_subject_rho) subjects.push_back(subject);
      if (first) {
        common = subjects;
        first = false;
      } else {
        std::vector<std::string> kept;
        std::set_intersection(common.begin(), common.end(), subjects.begin(),
                              subjects.end(), std::back_inserter(kept));
        common = std::move(kept);
      }
    }
    if (common.size() < 2) continue;

    LagAnalysis analysis;
    analysis.mode = static_cast<ModeKind>(std::get<0>(key));
    analysis.component = static_cast<WorkloadComponent>(std::get<1>(key));
    analysis.pred_s = std::get<2>(key);
    analysis.subjects = common;
    for (const auto& [lag, cell] : columns) analysis.lags.push_back(lag);

    std::vector<std::vector<double>> matrix(common.size());
    for (std::size_t i = 0; i < common.size(); ++i) {
      for (const auto& [lag, cell] : columns) {
        matrix[i].push_back(cell->per_subject_rho.at(common[i]));
      }
    }
    analysis.friedman = friedman_test(matrix);

    const auto& lags = analysis.lags;
    for (std::size_t a = 0; a < lags.size(); ++a) {
      for (std::size_t b = a + 1; b < lags.size(); ++b) {
        PairwiseWilcoxon pair;
        pair.lag_a_s = lags[a];
        pair.lag_b_s = lags[b];
        std::vector<double> col_a, col_b;
        for (std::size_t i = 0; i < common.size(); ++i) {
          col_a.push_back(matrix[i][a]);
          col_b.push_back(matrix[i][b]);
        }
        try {
          pair.result = wilcoxon_signed_rank(col_b, col_a);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::AllZeroDifferences) throw;
          pair.all_differences_zero = true;
          pair.result = WilcoxonResult{0.0, 0, 1.0, WilcoxonMethod::Exact, 0.0};
        }
        analysis.pairwise.push_back(std::move(pair));
      }
    }
    analyses.push_back(std::move(analysis));
  }
  if (analyses.empty()) {
    throw Error(ErrorCode::InsufficientColumns,
                "no (mode, component, pred) group has >= 3 lag columns over >= 2 "
                "common subjects");
  }
  return analyses;
}

std::string render_table(const std::vector<CellResult>& results, ModeKind mode,
                         WorkloadComponent component) {
  std::map<std::pair<double, double>, const CellResult*> grid;  // (pred, lag)
  std::set<double> lag_set, pred_set;
  for (const auto& cell : results) {
    if (cell.mode != mode || cell.component != component) continue;
    grid[{cell.pred_s, cell.lag_s}] = &cell;
    lag_set.insert(cell.lag_s);
    pred_set.insert(cell.pred_s);
  }
  if (grid.empty()) {
    throw Error(ErrorCode::IncompleteGrid,
                std::string("no cells for ") + mode_kind_name(mode) + " " +
                    component_name(component));
  }
  for (double pred : pred_set) {
    for (double lag : lag_set) {
      if (!grid.count({pred, lag})) {
        throw Error(ErrorCode::IncompleteGrid,
                    "missing cell lag " + seconds_label(lag) + " s / pred " +
                        seconds_label(pred) + " s");
      }
    }
  }

  constexpr int kColWidth = 14;
  std::ostringstream out;
  out << mode_kind_name(mode) << ' ' << component_name(component)
      << ": Spearman correlation [mean (sd)] by prediction and lag horizon\n";
  out << std::string(12, ' ');
  char buffer[64];
  for (double lag : lag_set) {
    std::snprintf(buffer, sizeof(buffer), "%-*s", kColWidth,
                  (seconds_label(lag) + "s Lag").c_str());
    out << buffer;
  }
  out << '\n';
  for (double pred : pred_set) {
    std::snprintf(buffer, sizeof(buffer), "%-12s", (seconds_label(pred) + "s Pred.").c_str());
    out << buffer;
    for (double lag : lag_set) {
      const CellResult* cell = grid.at({pred, lag});
      char value[32];
      std::snprintf(value, sizeof(value), "%.2f (%.2f)", cell->mean_rho, cell->sd_rho);
      std::snprintf(buffer, sizeof(buffer), "%-*s", kColWidth, value);
      out << buffer;
    }
    out << '\n';
  }
  return out.str();
}

std::string render_lag_analyses(const std::vector<LagAnalysis>& analyses) {
  std::ostringstream out;
  for (const auto& analysis : analyses) {
    out << mode_kind_name(analysis.mode) << ' ' << component_name(analysis.component)
        << ", " << seconds_label(analysis.pred_s)
        << "s pred: " << format_friedman(analysis.friedman) << '\n';
    for (const auto& pair : analysis.pairwise) {
      out << "  " << seconds_label(pair.lag_a_s) << "s vs " << seconds_label(pair.lag_b_s)
          << "s lag: ";
      if (pair.all_differences_zero) {
        out << "all differences zero (tie)\n";
        continue;
      }
      char buffer[128];
      const char* method =
          pair.result.method == WilcoxonMethod::Exact ? "exact" : "normal approx";
      if (pair.result.p < 0.001) {
        std::snprintf(buffer, sizeof(buffer), "W = %.1f, n = %zu, p < 0.001 (%s), d = %.2f",
                      pair.result.w_statistic, pair.result.n_effective, method,
                      pair.result.cohens_d);
      } else {
        std::snprintf(buffer, sizeof(buffer), "W = %.1f, n = %zu, p = %.3f (%s), d = %.2f",
                      pair.result.w_statistic, pair.result.n_effective, pair.result.p,
                      method, pair.result.cohens_d);
      }
      out << buffer << '\n';
    }
  }
  return out.str();
}

std::string results_to_json_text(const ExperimentConfig& cfg,
                                 const ExperimentResult& result) {
  ordered_json root;
  root["schema_version"] = 1;

  // config echo: everything that defines the run; the worker count is
  // execution detail and deliberately left out so results stay byte-identical
  // across parallelism levels
  ordered_json config;
  config["data_dir"] = cfg.data_dir;
  ordered_json modes = ordered_json::array();
  for (ModeKind kind : canonical_modes(cfg.modes)) modes.push_back(mode_kind_name(kind));
  config["modes"] = modes;
  ordered_json components = ordered_json::array();
  for (WorkloadComponent c : canonical_components(cfg.components)) {
    components.push_back(component_name(c));
  }
  config["components"] = components;
  config["lag_grid_s"] = sorted_unique(cfg.lag_grid_s);
  config["pred_grid_s"] = sorted_unique(cfg.pred_grid_s);
  config["seed"] = cfg.seed;
  config["min_windows_per_fold"] = cfg.min_windows_per_fold;
  config["allow_custom_grid"] = cfg.allow_custom_grid;
  config["train"] = train_config_to_json(cfg.train);
  if (cfg.synth) {
    config["synth"] = synth_params_to_json(*cfg.synth, cfg.n_synth_subjects);
  } else {
    config["synth"] = nullptr;
  }
  root["config"] = config;

  ordered_json cells = ordered_json::array();
  for (const auto& cell : result.cells) {
    ordered_json c;
    c["mode"] = mode_kind_name(cell.mode);
    c["component"] = component_name(cell.component);
    c["lag_s"] = cell.lag_s;
    c["pred_s"] = cell.pred_s;
    c["n_subjects"] = cell.per_subject_rho.size();
    c["mean_rho"] = cell.mean_rho;
    c["sd_rho"] = cell.sd_rho;
    ordered_json rhos;
    for (const auto& [subject, rho] : cell.per_subject_rho) rhos[subject] = rho;
    c["per_subject_rho"] = rhos;
    ordered_json folds;
    for (const auto& [subject, used] : cell.folds_used) folds[subject] = used;
    c["folds_used"] = folds;
    c["dropped_subjects"] = cell.dropped_subjects;
    cells.push_back(std::move(c));
  }
  root["cells"] = cells;

  ordered_json analyses = ordered_json::array();
  for (const auto& analysis : result.analyses) {
    ordered_json a;
    a["mode"] = mode_kind_name(analysis.mode);
    a["component"] = component_name(analysis.component);
    a["pred_s"] = analysis.pred_s;
    a["lags_s"] = analysis.lags;
    a["subjects"] = analysis.subjects;
    ordered_json f;
    f["chi2"] = analysis.friedman.chi2;
    f["df"] = analysis.friedman.df;
    f["n_subjects"] = analysis.friedman.n_subjects;
    f["p"] = analysis.friedman.p;
    f["kendalls_w"] = analysis.friedman.kendalls_w;
    a["friedman"] = f;
    ordered_json pairs = ordered_json::array();
    for (const auto& pair : analysis.pairwise) {
      ordered_json p;
      p["lag_a_s"] = pair.lag_a_s;
      p["lag_b_s"] = pair.lag_b_s;
      p["w_statistic"] = pair.result.w_statistic;
      p["n_effective"] = pair.result.n_effective;
      p["p"] = pair.result.p;
      p["method"] = pair.result.method == WilcoxonMethod::Exact ? "exact" : "normal_approx";
      p["cohens_d"] = pair.result.cohens_d;
      p["all_differences_zero"] = pair.all_differences_zero;
      pairs.push_back(std::move(p));
    }
    a["pairwise"] = pairs;
    analyses.push_back(std::move(a));
  }
  root["lag_analyses"] = analyses;

  ordered_json audit;
  audit["train_windows_checked"] = result.audit.train_windows_checked;
  audit["train_leaks"] = result.audit.train_leaks;
  audit["eval_windows_checked"] = result.audit.eval_windows_checked;
  audit["fold_straddles"] = result.audit.fold_straddles;
  root["audit"] = audit;

  return root.dump(2) + "\n";
}

void write_results(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  out << results_to_json_text(cfg, result);
  out.flush();
  if (!out.good()) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

std::vector<CellResult> read_results_cells(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read '" + path + "'");
  ordered_json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput,
                std::string("results file is not valid JSON: ") + e.what());
  }
  std::vector<CellResult> cells;
  try {
    for (const auto& c : root.at("cells")) {
      CellResult cell;
      cell.mode = mode_kind_from_name(c.at("mode").get<std::string>());
      cell.component = component_from_name(c.at("component").get<std::string>());
      cell.lag_s = c.at("lag_s").get<double>();
      cell.pred_s = c.at("pred_s").get<double>();
      cell.mean_rho = c.at("mean_rho").get<double>();
      cell.sd_rho = c.at("sd_rho").get<double>();
      for (const auto& [subject, rho] : c.at("per_subject_rho").items()) {
        cell.per_subject_rho[subject] = rho.get<double>();
      }
      for (const auto& [subject, used] : c.at("folds_used").items()) {
        cell.folds_used[subject] = used.get<std::size_t>();
      }
      cell.dropped_subjects = c.at("dropped_subjects").get<std::vector<std::string>>();
      cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("bad results field: ") + e.what());
  }
  return cells;
}

ExperimentResult run_all(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.synth && !fs::is_directory(cfg.data_dir)) {
    write_cohort(synthesize_cohort(cfg.n_synth_subjects, *cfg.synth), cfg.data_dir);
  }
  ExperimentResult result;
  result.cells = run_experiment(cfg, load_cohort(cfg.data_dir), &result.audit);
  try {
    result.analyses = analyze_lag_horizons(result.cells);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientColumns) throw;
    // a reduced grid cannot support the lag analysis; the results file
    // simply carries no analyses
  }
  return result;
}

}  // namespace wlf
