#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "wlf/series.hpp"

namespace wlf {

// Longest window-to-target span the five blocked folds support.
inline constexpr double kMaxHorizonSpanS = 600.0;

// Window geometry: lag_s of history feeds the model, the target lies pred_s
// ahead. Both must be positive integer multiples of the 5 s base step.
struct HorizonConfig {
  double lag_s = 0.0;
  double pred_s = 0.0;
  double step_s = 5.0;

  HorizonConfig(double lag, double pred, double step = 5.0);

  std::size_t lag_samples() const { return lag_samples_; }
  std::size_t pred_samples() const { return pred_samples_; }

 private:
  std::size_t lag_samples_ = 0;
  std::size_t pred_samples_ = 0;
};

enum class ModeKind { Univariate, Multivariate };

const char* mode_kind_name(ModeKind kind);
ModeKind mode_kind_from_name(std::string_view name);

// Univariate: the target channel's own history is the only input.
// Multivariate: the seven components' histories are the inputs (overall is
// never an input, even when it is the target).
struct ForecastMode {
  ModeKind kind = ModeKind::Univariate;
  WorkloadComponent target = WorkloadComponent::Overall;

  std::size_t n_input_channels() const {
    return kind == ModeKind::Univariate ? 1 : kNumComponents;
  }
  std::vector<WorkloadComponent> input_channels() const;
};

// One supervised example. Features are channel-major, time ascending within
// each channel; target_index = window_start + lag_samples - 1 + pred_samples.
struct WindowSample {
  std::vector<double> features;
  double target = 0.0;
  std::size_t target_index = 0;  // sample index into the source series
  std::string subject_id;
};

// Half-open sample interval [begin, end).
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
};

// Builds every direct-forecast window that fits in `range` (defaults to the
// full series). Emits exactly range.size() - lag - pred + 1 windows; no
// window reaches outside the range. Throws InsufficientData when none fit.
std::vector<WindowSample> build_windows(const SubjectSeries& s,
                                        const HorizonConfig& cfg,
                                        const ForecastMode& mode,
                                        std::optional<SampleRange> range = std::nullopt);

// Contiguous near-equal blocks over [0, n); remainder goes to the front.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> boundaries;  // k + 1 ascending indices

  SampleRange block(std::size_t fold) const {
    return {boundaries[fold], boundaries[fold + 1]};
  }
};

FoldPlan partition_blocked_folds(std::size_t n_samples, std::size_t k);

// True iff every fold block of the subject holds at least
// min_windows_per_fold windows under cfg:
//   floor(n / k) >= lag_samples + pred_samples - 1 + min_windows_per_fold
bool check_eligibility(const SeriesMeta& meta, const HorizonConfig& cfg,
                       std::size_t k, std::size_t min_windows_per_fold);

struct CvTask {
  std::string test_subject;
  std::vector<std::string> train_subjects;  // sorted, never contains test_subject
  FoldPlan fold_plan;                       // over the test subject's samples
  HorizonConfig config;
  ForecastMode mode;
};

// Leave-one-subject-out: one task per eligible subject, trained on all other
// eligible subjects, ordered by subject_id. Throws NoTrainingSubjects when
// fewer than two subjects are eligible.
std::vector<CvTask> plan_loso_cv(const std::vector<SeriesMeta>& cohort,
                                 const HorizonConfig& cfg, const ForecastMode& mode,
                                 std::size_t k = 5,
                                 std::size_t min_windows_per_fold = 24);

}  // namespace wlf
