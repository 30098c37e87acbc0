#include "wlf/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <sstream>

#include "wlf/error.hpp"

namespace wlf {

namespace {

constexpr const char* kChannelNames[kNumChannels] = {
    "cognitive", "visual",     "auditory", "speech",
    "gross_motor", "fine_motor", "tactile",  "overall"};

constexpr double kGridToleranceS = 1e-6;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string strip_cr(std::string line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
    line.pop_back();
  return line;
}

double parse_field(const std::string& field, std::size_t row) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc{} || result.ptr != last) {
    throw Error(ErrorCode::MalformedInput,
                "row " + std::to_string(row) + ": cannot parse value '" + field + "'");
  }
  return value;
}

}  // namespace

const char* component_name(WorkloadComponent c) {
  return kChannelNames[static_cast<std::size_t>(c)];
}

WorkloadComponent component_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    if (name == kChannelNames[i]) return static_cast<WorkloadComponent>(i);
  }
  throw Error(ErrorCode::MalformedInput,
              "unknown workload component '" + std::string(name) + "'");
}

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

SubjectSeries parse_series_csv(std::istream& in, std::string subject_id) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::EmptySeries, "input has no header line");
  }
  line = strip_cr(line);
  if (line != kSeriesCsvHeader) {
    const auto got = split_csv_line(line);
    for (std::size_t i = 0; i < kNumChannels; ++i) {
      bool present = false;
      for (const auto& name : got) {
        if (name == kChannelNames[i]) present = true;
      }
      if (!present) {
        throw Error(ErrorCode::MissingColumn,
                    std::string("header lacks column '") + kChannelNames[i] + "'");
      }
    }
    if (got.empty() || got[0] != "time_s") {
      throw Error(ErrorCode::MissingColumn, "header lacks column 'time_s'");
    }
    throw Error(ErrorCode::MalformedInput,
                "header columns out of canonical order: '" + line + "'");
  }

  SubjectSeries series;
  series.subject_id = std::move(subject_id);

  std::vector<double> times;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != kNumChannels + 1) {
      throw Error(ErrorCode::MalformedInput,
                  "row " + std::to_string(row) + ": expected " +
                      std::to_string(kNumChannels + 1) + " fields, got " +
                      std::to_string(fields.size()));
    }
    times.push_back(parse_field(fields[0], row));
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const double value = parse_field(fields[c + 1], row);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::NonFiniteValue,
                    "row " + std::to_string(row) + ", channel '" +
                        kChannelNames[c] + "'");
      }
      series.channels[c].push_back(value);
    }
  }
  if (times.empty()) {
    throw Error(ErrorCode::EmptySeries, "no data rows");
  }

  series.start_time_s = times.front();
  if (times.size() >= 2) {
    const double period = times[1] - times[0];
    if (period <= 0.0) {
      throw Error(ErrorCode::NonUniformGrid, "time column is not strictly increasing");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double delta = times[i] - times[i - 1];
      if (std::abs(delta - period) > kGridToleranceS) {
        throw Error(ErrorCode::NonUniformGrid,
                    "time delta at row " + std::to_string(i + 1) + " is " +
                        format_double(delta) + ", expected " + format_double(period));
      }
    }
    series.sample_period_s = period;
  }
  validate_series(series);
  return series;
}

SubjectSeries parse_series_csv(const std::string& text, std::string subject_id) {
  std::istringstream in(text);
  return parse_series_csv(in, std::move(subject_id));
}

std::string serialize_series_csv(const SubjectSeries& s) {
  std::string out = kSeriesCsvHeader;
  out.push_back('\n');
  const std::size_t n = s.n_samples();
  for (std::size_t i = 0; i < n; ++i) {
    out += format_double(s.time_at(i));
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      out.push_back(',');
      out += format_double(s.channels[c][i]);
    }
    out.push_back('\n');
  }
  return out;
}

SeriesMeta validate_series(const SubjectSeries& s) {
  if (s.sample_period_s <= 0.0) {
    throw Error(ErrorCode::MalformedInput, "sample_period_s must be positive");
  }
  const std::size_t n = s.channels[0].size();
  if (n == 0) {
    throw Error(ErrorCode::EmptySeries, "subject '" + s.subject_id + "' has no samples");
  }
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (s.channels[c].size() != n) {
      throw Error(ErrorCode::ChannelLengthMismatch,
                  "channel '" + std::string(kChannelNames[c]) + "' has " +
                      std::to_string(s.channels[c].size()) + " samples, expected " +
                      std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.channels[c][i])) {
        throw Error(ErrorCode::NonFiniteValue,
                    "channel '" + std::string(kChannelNames[c]) + "', sample " +
                        std::to_string(i));
      }
    }
  }
  SeriesMeta meta;
  meta.subject_id = s.subject_id;
  meta.n_samples = n;
  meta.duration_s = double(n) * s.sample_period_s;
  return meta;
}

SubjectSeries rebin_series(const SubjectSeries& s, double target_period_s) {
  validate_series(s);
  if (std::abs(s.sample_period_s - target_period_s) <= 1e-9) {
    return s;
  }
  if (s.sample_period_s > target_period_s) {
    throw Error(ErrorCode::NonUniformGrid,
                "cannot rebin: sample period " + format_double(s.sample_period_s) +
                    " s is coarser than the target " + format_double(target_period_s) + " s");
  }
  const double ratio = target_period_s / s.sample_period_s;
  const auto factor = static_cast<std::size_t>(std::llround(ratio));
  if (factor < 1 || std::abs(double(factor) * s.sample_period_s - target_period_s) > 1e-9) {
    throw Error(ErrorCode::NonUniformGrid,
                "target period " + format_double(target_period_s) +
                    " s is not an integer multiple of the sample period " +
                    format_double(s.sample_period_s) + " s");
  }
  const std::size_t n_out = s.n_samples() / factor;
  if (n_out == 0) {
    throw Error(ErrorCode::InsufficientData, "series shorter than one target bin");
  }
  SubjectSeries out;
  out.subject_id = s.subject_id;
  out.sample_period_s = target_period_s;
  out.start_time_s = s.start_time_s;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    out.channels[c].resize(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < factor; ++j) sum += s.channels[c][i * factor + j];
      out.channels[c][i] = sum / double(factor);
    }
  }
  return out;
}

}  // namespace wlf
