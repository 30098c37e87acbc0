#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wlf/series.hpp"

namespace wlf {

enum class WorkloadLevel { Underload = 0, NormalLoad, Overload };

inline constexpr std::size_t kNumLevels = 3;
inline constexpr std::size_t kNumSegments = 7;

const char* level_name(WorkloadLevel level);
WorkloadLevel level_from_name(std::string_view name);

// Seven consecutive task-density segments whose six adjacent transitions
// cover each ordered level pair exactly once.
using Ordering = std::array<WorkloadLevel, kNumSegments>;

bool ordering_satisfies_transition_constraint(const Ordering& o);

// All valid orderings, lexicographic in (Underload, NormalLoad, Overload).
std::vector<Ordering> enumerate_orderings();

struct SynthParams {
  double segment_duration_s = 450.0;  // 7.5 min
  double sample_period_s = 5.0;
  // base_levels[level][component]: mean workload of each of the 7 components
  // under each task-density level
  std::array<std::array<double, kNumComponents>, kNumLevels> base_levels{};
  double ar1_coefficient = 0.9;
  double noise_sd = 0.35;            // innovation sd of the AR(1) noise
  double transition_ramp_s = 0.0;    // linear ramp-in after each boundary
  std::uint64_t seed = 0;

  void validate() const;
};

// Pseudo-ground-truth trace for one subject: per component, the segment base
// level (ramped over transition_ramp_s after each boundary) plus AR(1) noise
// with a per-(subject, component) stream; overall is the exact sum of the
// seven components at every sample. 7 x 450 s at 5 s gives N = 630.
SubjectSeries synthesize_subject(const Ordering& ordering, const SynthParams& p,
                                 const std::string& subject_id);

// n_subjects series cycling round-robin through enumerate_orderings().
// Subject ids are s01, s02, ... and seed the per-subject noise streams.
std::vector<SubjectSeries> synthesize_cohort(std::size_t n_subjects,
                                             const SynthParams& p);

}  // namespace wlf
