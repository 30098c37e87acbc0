#include "wlf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "wlf/error.hpp"
#include "wlf/rng.hpp"

namespace wlf {

namespace {

constexpr const char* kLevelNames[kNumLevels] = {"underload", "normal_load", "overload"};

// ordered pair index for a transition a -> b, a != b
int transition_slot(WorkloadLevel a, WorkloadLevel b) {
  const int ia = static_cast<int>(a);
  const int ib = static_cast<int>(b);
  int slot = ia * 2 + ib;
  if (ib > ia) --slot;
  return slot;  // 0..5
}

void enumerate_rec(Ordering& prefix, std::size_t depth, std::array<bool, 6>& used,
                   std::vector<Ordering>& out) {
  if (depth == kNumSegments) {
    out.push_back(prefix);
    return;
  }
  for (std::size_t level = 0; level < kNumLevels; ++level) {
    const auto next = static_cast<WorkloadLevel>(level);
    if (next == prefix[depth - 1]) continue;
    const int slot = transition_slot(prefix[depth - 1], next);
    if (used[slot]) continue;
    used[slot] = true;
    prefix[depth] = next;
    enumerate_rec(prefix, depth + 1, used, out);
    used[slot] = false;
  }
}

}  // namespace

const char* level_name(WorkloadLevel level) {
  return kLevelNames[static_cast<std::size_t>(level)];
}

WorkloadLevel level_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumLevels; ++i) {
    if (name == kLevelNames[i]) return static_cast<WorkloadLevel>(i);
  }
  throw Error(ErrorCode::MalformedInput,
              "unknown workload level '" + std::string(name) + "'");
}

bool ordering_satisfies_transition_constraint(const Ordering& o) {
  std::array<bool, 6> seen{};
  for (std::size_t i = 0; i + 1 < kNumSegments; ++i) {
    if (o[i] == o[i + 1]) return false;
    const int slot = transition_slot(o[i], o[i + 1]);
    if (seen[slot]) return false;
    seen[slot] = true;
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

std::vector<Ordering> enumerate_orderings() {
  std::vector<Ordering> out;
  for (std::size_t first = 0; first < kNumLevels; ++first) {
    Ordering prefix{};
    prefix[0] = static_cast<WorkloadLevel>(first);
    std::array<bool, 6> used{};
    enumerate_rec(prefix, 1, used, out);
  }
  // recursion explores levels in ascending order, so `out` is already
  // lexicographic; keep the sort as the documented canonical guarantee
  std::sort(out.begin(), out.end());
  return out;
}

void SynthParams::validate() const {
  if (segment_duration_s <= 0.0 || sample_period_s <= 0.0) {
    throw Error(ErrorCode::InvalidConfig, "durations must be positive");
  }
  if (ar1_coefficient < 0.0 || ar1_coefficient >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "ar1_coefficient must lie in [0, 1)");
  }
  if (noise_sd < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "noise_sd must be nonnegative");
  }
  if (transition_ramp_s < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "transition_ramp_s must be nonnegative");
  }
  const double n_per_segment = segment_duration_s / sample_period_s;
  if (std::abs(n_per_segment - std::round(n_per_segment)) > 1e-9) {
    throw Error(ErrorCode::InvalidConfig,
                "segment duration must be an integer number of samples");
  }
}

SubjectSeries synthesize_subject(const Ordering& ordering, const SynthParams& p,
                                 const std::string& subject_id) {
  p.validate();
  if (!ordering_satisfies_transition_constraint(ordering)) {
    throw Error(ErrorCode::InvalidConfig,
                "ordering violates the transition constraint");
  }
  const auto per_segment =
      static_cast<std::size_t>(std::llround(p.segment_duration_s / p.sample_period_s));
  const std::size_t n = per_segment * kNumSegments;

  SubjectSeries series;
  series.subject_id = subject_id;
  series.sample_period_s = p.sample_period_s;
  series.start_time_s = 0.0;

  const std::uint64_t subject_seed = mix_seed({p.seed, fnv1a_hash(subject_id)});
  const double stationary_scale =
      p.ar1_coefficient > 0.0
          ? 1.0 / std::sqrt(1.0 - p.ar1_coefficient * p.ar1_coefficient)
          : 1.0;

  auto& overall = series.channel(WorkloadComponent::Overall);
  overall.assign(n, 0.0);

  for (std::size_t c = 0; c < kNumComponents; ++c) {
    Rng rng(mix_seed({subject_seed, c + 1}));
    auto& channel = series.channels[c];
    channel.resize(n);
    double noise = rng.gaussian() * p.noise_sd * stationary_scale;  // stationary start
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t segment = i / per_segment;
      double base = p.base_levels[static_cast<std::size_t>(ordering[segment])][c];
      if (p.transition_ramp_s > 0.0 && segment > 0) {
        // segments ramp in linearly over transition_ramp_s after each boundary
        const double since_boundary =
            double(i - segment * per_segment) * p.sample_period_s;
        if (since_boundary < p.transition_ramp_s) {
          const double prev =
              p.base_levels[static_cast<std::size_t>(ordering[segment - 1])][c];
          base = prev + (base - prev) * (since_boundary / p.transition_ramp_s);
        }
      }
      if (i > 0) noise = p.ar1_coefficient * noise + rng.gaussian() * p.noise_sd;
      channel[i] = base + noise;
      overall[i] += channel[i];
    }
  }
  validate_series(series);
  return series;
}

std::vector<SubjectSeries> synthesize_cohort(std::size_t n_subjects,
                                             const SynthParams& p) {
  if (n_subjects < 1) {
    throw Error(ErrorCode::InvalidConfig, "need at least one subject");
  }
  const auto orderings = enumerate_orderings();
  std::vector<SubjectSeries> cohort;
  cohort.reserve(n_subjects);
  int width = 2;
  for (std::size_t v = n_subjects; v >= 100 && width < 9; v /= 10) ++width;
  for (std::size_t i = 0; i < n_subjects; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "s%0*zu", width, i + 1);
    cohort.push_back(
        synthesize_subject(orderings[i % orderings.size()], p, id));
  }
  return cohort;
}

}  // namespace wlf
