#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "wlf/error.hpp"
#include "wlf/series.hpp"
#include "wlf/synth.hpp"

using namespace wlf;

namespace {

SynthParams test_params(std::uint64_t seed = 17) {
  SynthParams p;
  for (std::size_t c = 0; c < kNumComponents; ++c) {
    p.base_levels[0][c] = 1.0 + 0.1 * double(c);
    p.base_levels[1][c] = 3.0 + 0.15 * double(c);
    p.base_levels[2][c] = 5.0 + 0.2 * double(c);
  }
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("enumerate_orderings equals the brute-force filter") {
  const auto enumerated = enumerate_orderings();
  const auto brute = oracle::brute_force_orderings();
  REQUIRE(!enumerated.empty());
  CHECK(enumerated == brute);  // element for element, canonical order
}

TEST_CASE("every ordering avoids self-transitions and uses all levels") {
  for (const Ordering& o : enumerate_orderings()) {
    std::set<WorkloadLevel> seen;
    for (std::size_t i = 0; i < o.size(); ++i) {
      seen.insert(o[i]);
      if (i + 1 < o.size()) CHECK(o[i] != o[i + 1]);
    }
    CHECK(seen.size() == kNumLevels);
    CHECK(ordering_satisfies_transition_constraint(o));
  }
}

TEST_CASE("noiseless synthesis is piecewise constant at the base levels") {
  SynthParams p = test_params();
  p.noise_sd = 0.0;
  const Ordering o = enumerate_orderings()[0];
  const SubjectSeries s = synthesize_subject(o, p, "quiet");
  REQUIRE(s.n_samples() == 630);

  for (std::size_t c = 0; c < kNumComponents; ++c) {
    for (std::size_t i = 0; i < 630; ++i) {
      const std::size_t segment = i / 90;  // boundaries at samples 90, 180, ...
      CHECK(s.channels[c][i] ==
            doctest::Approx(p.base_levels[std::size_t(o[segment])][c]).epsilon(1e-14));
    }
  }
}

TEST_CASE("transition ramp interpolates linearly after each boundary") {
  SynthParams p = test_params();
  p.noise_sd = 0.0;
  p.transition_ramp_s = 30.0;  // 6 samples
  const Ordering o = enumerate_orderings()[0];
  const SubjectSeries s = synthesize_subject(o, p, "ramped");
  const double prev = p.base_levels[std::size_t(o[0])][0];
  const double next = p.base_levels[std::size_t(o[1])][0];
  const auto& cognitive = s.channel(WorkloadComponent::Cognitive);
  CHECK(cognitive[89] == doctest::Approx(prev));
  CHECK(cognitive[90] == doctest::Approx(prev));  // ramp starts at the boundary
  CHECK(cognitive[93] == doctest::Approx(prev + (next - prev) * 0.5));
  CHECK(cognitive[96] == doctest::Approx(next));
}

TEST_CASE("overall equals the component sum at every sample") {
  const SubjectSeries s =
      synthesize_subject(enumerate_orderings()[3], test_params(), "sum");
  for (std::size_t i = 0; i < s.n_samples(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumComponents; ++c) sum += s.channels[c][i];
    CHECK(s.channel(WorkloadComponent::Overall)[i] == sum);  // exact, same fp order
  }
}

TEST_CASE("synthesis is deterministic per (ordering, params, subject)") {
  const Ordering o = enumerate_orderings()[5];
  const SubjectSeries a = synthesize_subject(o, test_params(), "twin");
  const SubjectSeries b = synthesize_subject(o, test_params(), "twin");
  CHECK(a.channels == b.channels);

  const SubjectSeries other = synthesize_subject(o, test_params(), "sibling");
  CHECK(a.channel(WorkloadComponent::Cognitive) !=
        other.channel(WorkloadComponent::Cognitive));
}

TEST_CASE("noise residual lag-1 autocorrelation approaches the AR coefficient") {
  SynthParams p = test_params(40);
  p.ar1_coefficient = 0.9;
  p.noise_sd = 0.5;
  const Ordering o = enumerate_orderings()[0];

  SynthParams quiet = p;
  quiet.noise_sd = 0.0;
  const SubjectSeries noisy = synthesize_subject(o, p, "ar");
  const SubjectSeries base = synthesize_subject(o, quiet, "ar");

  // average the per-channel estimate over the 7 components
  double mean_autocorr = 0.0;
  for (std::size_t c = 0; c < kNumComponents; ++c) {
    std::vector<double> residual(noisy.n_samples());
    for (std::size_t i = 0; i < residual.size(); ++i) {
      residual[i] = noisy.channels[c][i] - base.channels[c][i];
    }
    double mean = 0.0;
    for (double r : residual) mean += r;
    mean /= double(residual.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < residual.size(); ++i) {
      num += (residual[i] - mean) * (residual[i + 1] - mean);
    }
    for (double r : residual) den += (r - mean) * (r - mean);
    mean_autocorr += num / den;
  }
  mean_autocorr /= double(kNumComponents);
  CHECK(std::abs(mean_autocorr - 0.9) < 0.05);
}

TEST_CASE("cohort: round-robin orderings, valid series, seed isolation") {
  const auto cohort = synthesize_cohort(16, test_params(100));
  REQUIRE(cohort.size() == 16);
  const auto orderings = enumerate_orderings();
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const SeriesMeta meta = validate_series(cohort[i]);
    CHECK(meta.duration_s == doctest::Approx(3150.0));
    CHECK(cohort[i].subject_id == (i < 9 ? "s0" + std::to_string(i + 1)
                                         : "s" + std::to_string(i + 1)));
  }

  const auto recohort = synthesize_cohort(16, test_params(100));
  CHECK(recohort[4].channels == cohort[4].channels);

  const auto reseeded = synthesize_cohort(16, test_params(101));
  CHECK(reseeded[4].channels != cohort[4].channels);

  // more subjects than orderings: the cycle repeats, constraint still holds
  const auto big = synthesize_cohort(orderings.size() + 3, test_params(7));
  CHECK(big.size() == orderings.size() + 3);
}

TEST_CASE("segment mean equals the base level away from ramps when noiseless") {
  SynthParams p = test_params();
  p.noise_sd = 0.0;
  p.transition_ramp_s = 20.0;
  const Ordering o = enumerate_orderings()[7];
  const SubjectSeries s = synthesize_subject(o, p, "means");
  for (std::size_t segment = 0; segment < kNumSegments; ++segment) {
    const std::size_t ramp_samples = 4;  // 20 s at 5 s
    const std::size_t from = segment * 90 + (segment > 0 ? ramp_samples : 0);
    double mean = 0.0;
    for (std::size_t i = from; i < (segment + 1) * 90; ++i) {
      mean += s.channels[2][i];
    }
    mean /= double((segment + 1) * 90 - from);
    CHECK(mean == doctest::Approx(p.base_levels[std::size_t(o[segment])][2]).epsilon(1e-12));
  }
}

TEST_CASE("invalid parameters are rejected") {
  SynthParams p = test_params();
  p.ar1_coefficient = 1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  SynthParams q = test_params();
  q.segment_duration_s = 449.0;  // not an integer number of samples
  CHECK_THROWS_AS(q.validate(), Error);
  CHECK_THROWS_AS(synthesize_cohort(0, test_params()), Error);

  Ordering bad{};  // all underload: violates the constraint
  CHECK_THROWS_AS(synthesize_subject(bad, test_params(), "bad"), Error);
}
