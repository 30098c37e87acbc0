#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "wlf/error.hpp"
#include "wlf/experiment.hpp"

using namespace wlf;
namespace fs = std::filesystem;

namespace {

SynthParams small_synth(std::uint64_t seed) {
  SynthParams p;
  for (std::size_t c = 0; c < kNumComponents; ++c) {
    p.base_levels[0][c] = 1.0 + 0.1 * double(c);
    p.base_levels[1][c] = 3.0 + 0.15 * double(c);
    p.base_levels[2][c] = 5.0 + 0.2 * double(c);
  }
  p.noise_sd = 0.35;
  p.seed = seed;
  return p;
}

ExperimentConfig small_config(const std::string& data_dir) {
  ExperimentConfig cfg;
  cfg.data_dir = data_dir;
  cfg.modes = {ModeKind::Univariate, ModeKind::Multivariate};
  cfg.components = {WorkloadComponent::Overall};
  cfg.lag_grid_s = {30};
  cfg.pred_grid_s = {60};
  cfg.train.max_epochs = 4;
  cfg.train.patience = 2;
  cfg.train.learning_rate = 1e-3;
  cfg.seed = 77;
  cfg.synth = small_synth(77);
  cfg.n_synth_subjects = 3;
  cfg.workers = 2;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

CellResult fake_cell(ModeKind mode, double lag, double pred, double mean, double sd) {
  CellResult cell;
  cell.mode = mode;
  cell.component = WorkloadComponent::Overall;
  cell.lag_s = lag;
  cell.pred_s = pred;
  cell.mean_rho = mean;
  cell.sd_rho = sd;
  return cell;
}

}  // namespace

TEST_CASE("config: defaults, paper-grid guard and the override flag") {
  const ExperimentConfig cfg = parse_config("{}");
  CHECK(cfg.modes.size() == 2);
  CHECK(cfg.components == std::vector<WorkloadComponent>{WorkloadComponent::Overall});
  CHECK(cfg.lag_grid_s == std::vector<double>{30, 60, 120, 240});
  CHECK(cfg.pred_grid_s == std::vector<double>{60, 120, 240});
  CHECK(cfg.min_windows_per_fold == 24);

  try {
    parse_config(R"({"lag_grid_s": [45]})");
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  const ExperimentConfig custom =
      parse_config(R"({"lag_grid_s": [45], "allow_custom_grid": true})");
  CHECK(custom.lag_grid_s == std::vector<double>{45});

  CHECK_THROWS_AS(parse_config("{not json"), Error);
  CHECK_THROWS_AS(parse_config(R"({"synth": {"noise_sd": 0.1}})"), Error);  // no levels
}

TEST_CASE("cohort: write then load round-trips, finer grids are rebinned") {
  const fs::path dir = fresh_dir("wlf_cohort_rt");
  const auto cohort = synthesize_cohort(3, small_synth(5));
  write_cohort(cohort, dir.string());
  const auto back = load_cohort(dir.string());
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].subject_id == cohort[i].subject_id);
    CHECK(back[i].channels == cohort[i].channels);  // exact round-trip
  }

  // a 1 s series lands on the 5 s grid at load time
  SubjectSeries fine = cohort[0];
  fine.subject_id = "zfine";
  fine.sample_period_s = 1.0;
  {
    std::ofstream out(dir / "zfine.csv");
    out << serialize_series_csv(fine);
  }
  const auto mixed = load_cohort(dir.string());
  REQUIRE(mixed.size() == 4);
  CHECK(mixed.back().subject_id == "zfine");
  CHECK(mixed.back().sample_period_s == 5.0);
  CHECK(mixed.back().n_samples() == fine.n_samples() / 5);

  CHECK_THROWS_AS(load_cohort((dir / "missing").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: grid completeness, aggregates, audit, eligibility") {
  const fs::path dir = fresh_dir("wlf_run_small");
  ExperimentConfig cfg = small_config(dir.string());
  cfg.lag_grid_s = {30, 60};

  auto cohort = synthesize_cohort(cfg.n_synth_subjects, *cfg.synth);
  // an ineligible subject: too short for any cell at k = 5
  SubjectSeries runt = cohort[0];
  runt.subject_id = "zrunt";
  for (auto& channel : runt.channels) channel.resize(60);
  cohort.push_back(runt);

  AuditCounters audit;
  const auto cells = run_experiment(cfg, cohort, &audit);

  CHECK(cells.size() == 2 * 1 * 2 * 1);  // modes x components x lags x preds
  for (const auto& cell : cells) {
    CHECK(cell.per_subject_rho.size() == 3);
    CHECK(cell.per_subject_rho.count("zrunt") == 0);  // eligibility filter
    double mean = 0.0;
    for (const auto& [subject, rho] : cell.per_subject_rho) {
      CHECK(rho >= -1.0);
      CHECK(rho <= 1.0);
      mean += rho;
    }
    mean /= double(cell.per_subject_rho.size());
    CHECK(std::abs(mean - cell.mean_rho) < 1e-12);
    double ss = 0.0;
    for (const auto& [subject, rho] : cell.per_subject_rho) {
      ss += (rho - cell.mean_rho) * (rho - cell.mean_rho);
    }
    const double sd = std::sqrt(ss / double(cell.per_subject_rho.size() - 1));
    CHECK(std::abs(sd - cell.sd_rho) < 1e-12);
  }

  CHECK(audit.train_windows_checked > 0);
  CHECK(audit.train_leaks == 0);
  CHECK(audit.eval_windows_checked > 0);
  CHECK(audit.fold_straddles == 0);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment: deterministic across worker counts") {
  const fs::path dir = fresh_dir("wlf_run_det");
  ExperimentConfig cfg = small_config(dir.string());
  const auto cohort = synthesize_cohort(cfg.n_synth_subjects, *cfg.synth);

  cfg.workers = 1;
  ExperimentResult a;
  a.cells = run_experiment(cfg, cohort, &a.audit);
  cfg.workers = 2;
  ExperimentResult b;
  b.cells = run_experiment(cfg, cohort, &b.audit);

  CHECK(results_to_json_text(cfg, a) == results_to_json_text(cfg, b));
  fs::remove_all(dir);
}

TEST_CASE("analyze_lag_horizons: pairwise count, degenerate and monotone cases") {
  // hand-built cells: 4 lag columns, rho strictly increasing with lag
  std::vector<CellResult> cells;
  const std::vector<double> lags = {30, 60, 120, 240};
  for (std::size_t j = 0; j < lags.size(); ++j) {
    CellResult cell = fake_cell(ModeKind::Univariate, lags[j], 60, 0, 0);
    for (int s = 0; s < 6; ++s) {
      cell.per_subject_rho["s" + std::to_string(s)] =
          0.3 + 0.1 * double(j) + 0.01 * double(s);
    }
    cells.push_back(cell);
  }
  const auto analyses = analyze_lag_horizons(cells);
  REQUIRE(analyses.size() == 1);
  CHECK(analyses[0].pairwise.size() == 6);  // C(4, 2)
  CHECK(analyses[0].friedman.kendalls_w == doctest::Approx(1.0));  // monotone matrix
  CHECK(analyses[0].subjects.size() == 6);
  for (const auto& pair : analyses[0].pairwise) {
    CHECK(pair.result.cohens_d > 0.0);  // longer lag minus shorter lag
  }

  // identical columns: Friedman degenerate, pairwise surfaced as ties
  std::vector<CellResult> tied;
  for (double lag : {30.0, 60.0, 120.0}) {
    CellResult cell = fake_cell(ModeKind::Univariate, lag, 60, 0, 0);
    for (int s = 0; s < 4; ++s) cell.per_subject_rho["s" + std::to_string(s)] = 0.5;
    tied.push_back(cell);
  }
  const auto tied_analyses = analyze_lag_horizons(tied);
  REQUIRE(tied_analyses.size() == 1);
  CHECK(tied_analyses[0].friedman.chi2 == 0.0);
  CHECK(tied_analyses[0].friedman.p == 1.0);
  for (const auto& pair : tied_analyses[0].pairwise) {
    CHECK(pair.all_differences_zero);
    CHECK(pair.result.p == 1.0);
  }

  // two lag columns cannot be analyzed
  std::vector<CellResult> narrow(cells.begin(), cells.begin() + 2);
  try {
    analyze_lag_horizons(narrow);
    FAIL("expected InsufficientColumns");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientColumns);
  }
}

TEST_CASE("render_table: two-decimal mean (sd) cells and grid checks") {
  std::vector<CellResult> cells;
  for (double lag : {30.0, 60.0}) {
    for (double pred : {60.0, 120.0}) {
      cells.push_back(fake_cell(ModeKind::Univariate, lag, pred,
                                lag == 240 ? 0.7 : 0.68, 0.09));
    }
  }
  cells[0].mean_rho = 0.68;
  cells[0].sd_rho = 0.09;
  cells[1].mean_rho = 0.7;
  cells[1].sd_rho = 0.05;

  const std::string table = render_table(cells, ModeKind::Univariate,
                                         WorkloadComponent::Overall);
  CHECK(table.find("0.68 (0.09)") != std::string::npos);
  CHECK(table.find("0.70 (0.05)") != std::string::npos);
  CHECK(table.find("30s Lag") != std::string::npos);
  CHECK(table.find("60s Pred.") != std::string::npos);

  cells.pop_back();  // break the rectangle
  try {
    render_table(cells, ModeKind::Univariate, WorkloadComponent::Overall);
    FAIL("expected IncompleteGrid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompleteGrid);
  }
  CHECK_THROWS_AS(render_table({}, ModeKind::Univariate, WorkloadComponent::Overall),
                  Error);
}

TEST_CASE("results file: round trip, byte determinism and io failure") {
  const fs::path dir = fresh_dir("wlf_results_rt");
  fs::create_directories(dir);
  ExperimentConfig cfg = small_config((dir / "cohort").string());

  ExperimentResult result;
  for (double lag : {30.0, 60.0, 120.0}) {
    CellResult cell = fake_cell(ModeKind::Multivariate, lag, 60, 0.55, 0.08);
    for (int s = 0; s < 5; ++s) {
      cell.per_subject_rho["s" + std::to_string(s)] = 0.5 + 0.02 * double(s);
      cell.folds_used["s" + std::to_string(s)] = 5;
    }
    result.cells.push_back(cell);
  }
  result.analyses = analyze_lag_horizons(result.cells);
  result.audit = {100, 0, 50, 0};

  const fs::path path = dir / "results.json";
  write_results(cfg, result, path.string());
  const auto cells = read_results_cells(path.string());
  REQUIRE(cells.size() == result.cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].mode == result.cells[i].mode);
    CHECK(cells[i].lag_s == result.cells[i].lag_s);
    CHECK(cells[i].per_subject_rho == result.cells[i].per_subject_rho);
    CHECK(cells[i].mean_rho == result.cells[i].mean_rho);
  }

  const fs::path path2 = dir / "results2.json";
  write_results(cfg, result, path2.string());
  std::ifstream f1(path), f2(path2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());

  try {
    write_results(cfg, result, (dir / "no_such_dir" / "x.json").string());
    FAIL("expected IoFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
  fs::remove_all(dir);
}

TEST_CASE("run_all: synthesizes a cohort when missing and analyzes when possible") {
  const fs::path dir = fresh_dir("wlf_run_all");
  ExperimentConfig cfg = small_config((dir / "cohort").string());
  cfg.lag_grid_s = {30, 60, 120};  // three columns: analyses possible
  cfg.n_synth_subjects = 3;

  const ExperimentResult result = run_all(cfg);
  CHECK(result.cells.size() == 2 * 3);
  CHECK(!result.analyses.empty());
  CHECK(result.audit.train_leaks == 0);
  CHECK(result.audit.fold_straddles == 0);
  CHECK(fs::is_directory(dir / "cohort"));

  // the cell name is stable and path-like
  CHECK(cell_name(result.cells[0]) == "univariate/overall/lag30/pred60");
  fs::remove_all(dir);
}
