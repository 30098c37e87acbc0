#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace wlf {

// The seven workload channels plus their composite. The declaration order is
// canonical: it fixes CSV column order and feature flattening.
enum class WorkloadComponent {
  Cognitive = 0,
  Visual,
  Auditory,
  Speech,
  GrossMotor,
  FineMotor,
  Tactile,
  Overall,
};

inline constexpr std::size_t kNumChannels = 8;    // 7 components + overall
inline constexpr std::size_t kNumComponents = 7;  // excludes overall

constexpr std::array<WorkloadComponent, kNumChannels> all_channels() {
  return {WorkloadComponent::Cognitive,  WorkloadComponent::Visual,
          WorkloadComponent::Auditory,   WorkloadComponent::Speech,
          WorkloadComponent::GrossMotor, WorkloadComponent::FineMotor,
          WorkloadComponent::Tactile,    WorkloadComponent::Overall};
}

// The seven components in canonical order, without the overall composite.
constexpr std::array<WorkloadComponent, kNumComponents> component_channels() {
  return {WorkloadComponent::Cognitive,  WorkloadComponent::Visual,
          WorkloadComponent::Auditory,   WorkloadComponent::Speech,
          WorkloadComponent::GrossMotor, WorkloadComponent::FineMotor,
          WorkloadComponent::Tactile};
}

const char* component_name(WorkloadComponent c);
WorkloadComponent component_from_name(std::string_view name);

// One subject's uniformly sampled workload-estimate trace. Immutable once
// built; all eight channels share the same grid start_time_s + i * period.
struct SubjectSeries {
  std::string subject_id;
  double sample_period_s = 5.0;
  double start_time_s = 0.0;
  std::array<std::vector<double>, kNumChannels> channels;

  const std::vector<double>& channel(WorkloadComponent c) const {
    return channels[static_cast<std::size_t>(c)];
  }
  std::vector<double>& channel(WorkloadComponent c) {
    return channels[static_cast<std::size_t>(c)];
  }
  std::size_t n_samples() const { return channels[0].size(); }
  double time_at(std::size_t i) const {
    return start_time_s + double(i) * sample_period_s;
  }
};

struct SeriesMeta {
  std::string subject_id;
  double duration_s = 0.0;
  std::size_t n_samples = 0;
};

inline constexpr char kSeriesCsvHeader[] =
    "time_s,cognitive,visual,auditory,speech,gross_motor,fine_motor,tactile,overall";

// Parses the cohort CSV format (see kSeriesCsvHeader). The time column must
// be strictly increasing and uniformly spaced within 1e-6 s. Throws
// MissingColumn, MalformedInput, NonUniformGrid, NonFiniteValue, EmptySeries.
SubjectSeries parse_series_csv(std::istream& in, std::string subject_id = "");
SubjectSeries parse_series_csv(const std::string& text, std::string subject_id = "");

std::string serialize_series_csv(const SubjectSeries& s);

// Checks every SubjectSeries invariant and returns the series metadata.
// Throws ChannelLengthMismatch, NonFiniteValue, EmptySeries.
SeriesMeta validate_series(const SubjectSeries& s);

// Mean-bins a finer uniform grid down to target_period_s, which must be an
// integer multiple of the input period. A series already on the target grid
// is returned unchanged; a trailing partial bin is dropped.
SubjectSeries rebin_series(const SubjectSeries& s, double target_period_s = 5.0);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

}  // namespace wlf
