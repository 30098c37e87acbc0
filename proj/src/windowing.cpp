#include "wlf/windowing.hpp"

#include <algorithm>
#include <cmath>

#include "wlf/error.hpp"

namespace wlf {

namespace {

std::size_t samples_for(double horizon_s, double step_s, const char* what) {
  if (horizon_s <= 0.0) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be positive");
  }
  const double ratio = horizon_s / step_s;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  if (n < 1 || std::abs(double(n) * step_s - horizon_s) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig,
                std::string(what) + " (" + format_double(horizon_s) +
                    " s) is not a positive integer multiple of the " +
                    format_double(step_s) + " s step");
  }
  return n;
}

}  // namespace

HorizonConfig::HorizonConfig(double lag, double pred, double step)
    : lag_s(lag), pred_s(pred), step_s(step) {
  if (step_s <= 0.0) {
    throw Error(ErrorCode::InvalidConfig, "step_s must be positive");
  }
  lag_samples_ = samples_for(lag_s, step_s, "lag_s");
  pred_samples_ = samples_for(pred_s, step_s, "pred_s");
  if (lag_s + pred_s > kMaxHorizonSpanS) {
    throw Error(ErrorCode::InvalidConfig,
                "lag_s + pred_s = " + format_double(lag_s + pred_s) +
                    " exceeds the " + format_double(kMaxHorizonSpanS) +
                    " s span the folds support");
  }
}

const char* mode_kind_name(ModeKind kind) {
  return kind == ModeKind::Univariate ? "univariate" : "multivariate";
}

ModeKind mode_kind_from_name(std::string_view name) {
  if (name == "univariate") return ModeKind::Univariate;
  if (name == "multivariate") return ModeKind::Multivariate;
  throw Error(ErrorCode::MalformedInput,
              "unknown forecast mode '" + std::string(name) + "'");
}

std::vector<WorkloadComponent> ForecastMode::input_channels() const {
  if (kind == ModeKind::Univariate) return {target};
  const auto components = component_channels();
  return {components.begin(), components.end()};
}

std::vector<WindowSample> build_windows(const SubjectSeries& s,
                                        const HorizonConfig& cfg,
                                        const ForecastMode& mode,
                                        std::optional<SampleRange> range) {
  const std::size_t n = s.n_samples();
  SampleRange r = range.value_or(SampleRange{0, n});
  if (r.begin > r.end || r.end > n) {
    throw Error(ErrorCode::InsufficientData, "sample range outside the series");
  }
  const std::size_t lag = cfg.lag_samples();
  const std::size_t pred = cfg.pred_samples();
  const std::size_t span = lag + pred;
  if (r.size() < span) {
    throw Error(ErrorCode::InsufficientData,
                "range of " + std::to_string(r.size()) +
                    " samples cannot fit a window spanning " + std::to_string(span));
  }
  const std::size_t n_windows = r.size() - span + 1;
  const auto inputs = mode.input_channels();
  const std::vector<double>& target_channel = s.channel(mode.target);

  std::vector<WindowSample> windows(n_windows);
  for (std::size_t i = 0; i < n_windows; ++i) {
    WindowSample& w = windows[i];
    const std::size_t start = r.begin + i;
    w.features.reserve(lag * inputs.size());
    for (const WorkloadComponent c : inputs) {
      const std::vector<double>& channel = s.channel(c);
      w.features.insert(w.features.end(), channel.begin() + start,
                        channel.begin() + start + lag);
    }
    w.target_index = start + lag - 1 + pred;
    w.target = target_channel[w.target_index];
    w.subject_id = s.subject_id;
  }
  return windows;
}

FoldPlan partition_blocked_folds(std::size_t n_samples, std::size_t k) {
  if (k < 1) {
    throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  }
  if (n_samples < k) {
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(n_samples) + " samples cannot form " +
                    std::to_string(k) + " blocks");
  }
  FoldPlan plan;
  plan.k = k;
  plan.boundaries.resize(k + 1);
  const std::size_t base = n_samples / k;
  const std::size_t remainder = n_samples % k;
  plan.boundaries[0] = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < remainder ? 1 : 0);
    plan.boundaries[f + 1] = plan.boundaries[f] + size;
  }
  return plan;
}

bool check_eligibility(const SeriesMeta& meta, const HorizonConfig& cfg,
                       std::size_t k, std::size_t min_windows_per_fold) {
  if (k < 1 || meta.n_samples < k) return false;
  const std::size_t smallest_block = meta.n_samples / k;
  const std::size_t needed =
      cfg.lag_samples() + cfg.pred_samples() - 1 + min_windows_per_fold;
  return smallest_block >= needed;
}

std::vector<CvTask> plan_loso_cv(const std::vector<SeriesMeta>& cohort,
                                 const HorizonConfig& cfg, const ForecastMode& mode,
                                 std::size_t k, std::size_t min_windows_per_fold) {
  std::vector<const SeriesMeta*> eligible;
  for (const auto& meta : cohort) {
    if (check_eligibility(meta, cfg, k, min_windows_per_fold)) {
      eligible.push_back(&meta);
    }
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const SeriesMeta* a, const SeriesMeta* b) {
              return a->subject_id < b->subject_id;
            });
  if (eligible.size() < 2) {
    throw Error(ErrorCode::NoTrainingSubjects,
                std::to_string(eligible.size()) +
                    " eligible subject(s); leave-one-subject-out needs at least 2");
  }
  std::vector<CvTask> tasks;
  tasks.reserve(eligible.size());
  for (const SeriesMeta* test : eligible) {
    CvTask task{test->subject_id, {}, partition_blocked_folds(test->n_samples, k),
                cfg, mode};
    for (const SeriesMeta* other : eligible) {
      if (other != test) task.train_subjects.push_back(other->subject_id);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace wlf
