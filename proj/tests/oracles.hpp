// Independent reference implementations used only by the test suites. Each
// oracle deliberately takes a different algorithmic route from the library
// code it checks.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "wlf/mlp.hpp"
#include "wlf/synth.hpp"
#include "wlf/windowing.hpp"

namespace oracle {

// Ranks by counting comparisons instead of sorting: rank_i = (#smaller) +
// (#equal + 1) / 2. O(n^2), fine for test sizes.
inline std::vector<double> counting_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t smaller = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (values[j] < values[i]) ++smaller;
      if (values[j] == values[i]) ++equal;
    }
    ranks[i] = double(smaller) + 0.5 * double(equal + 1);
  }
  return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= double(n);
  mean_b /= double(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - mean_a) * (b[i] - mean_b);
    var_a += (a[i] - mean_a) * (a[i] - mean_a);
    var_b += (b[i] - mean_b) * (b[i] - mean_b);
  }
  return cov / std::sqrt(var_a * var_b);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(counting_ranks(a), counting_ranks(b));
}

// Exact two-sided Wilcoxon p via the distribution of W+ built by dynamic
// programming over doubled (integral) ranks.
inline double wilcoxon_exact_p(const std::vector<double>& diffs) {
  std::vector<double> abs_diffs;
  for (double d : diffs) {
    if (d != 0.0) abs_diffs.push_back(std::abs(d));
  }
  const std::size_t n = abs_diffs.size();
  const auto ranks = counting_ranks(abs_diffs);
  std::vector<long long> ranks2(n);
  long long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ranks2[i] = llround(2.0 * ranks[i]);
    total2 += ranks2[i];
  }
  long long observed2 = 0;
  std::size_t j = 0;
  for (double d : diffs) {
    if (d == 0.0) continue;
    if (d > 0.0) observed2 += ranks2[j];
    ++j;
  }
  // counts[s] = number of sign assignments with doubled W+ equal to s
  std::vector<double> counts(std::size_t(total2) + 1, 0.0);
  counts[0] = 1.0;
  long long reach = 0;
  for (std::size_t i = 0; i < n; ++i) {
    reach += ranks2[i];
    for (long long s = reach; s >= ranks2[i]; --s) {
      counts[std::size_t(s)] += counts[std::size_t(s - ranks2[i])];
    }
  }
  double below = 0.0, above = 0.0, total = 0.0;
  for (long long s = 0; s <= total2; ++s) {
    total += counts[std::size_t(s)];
    if (s <= observed2) below += counts[std::size_t(s)];
    if (s >= observed2) above += counts[std::size_t(s)];
  }
  const double one_sided = std::min(below, above) / total;
  return std::min(1.0, 2.0 * one_sided);
}

// Forward pass written against plain loops; no Eigen, no shared code with
// the library evaluation path.
inline double plain_forward(const wlf::MlpModel& m, const std::vector<double>& input) {
  std::vector<double> activation = input;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const auto rows = std::size_t(m.weights[l].rows());
    const auto cols = std::size_t(m.weights[l].cols());
    std::vector<double> next(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double z = m.biases[l](Eigen::Index(r));
      for (std::size_t c = 0; c < cols; ++c) {
        z += m.weights[l](Eigen::Index(r), Eigen::Index(c)) * activation[c];
      }
      next[r] = (l + 1 < m.weights.size()) ? std::max(0.0, z) : z;
    }
    activation = std::move(next);
  }
  return activation[0];
}

// Independent predicate: tally adjacent transitions into a 3x3 matrix and
// require every off-diagonal cell to be hit exactly once.
inline bool covers_each_transition_once(const wlf::Ordering& seq) {
  int tally[3][3] = {};
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    ++tally[int(seq[i])][int(seq[i + 1])];
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b ? tally[a][b] != 0 : tally[a][b] != 1) return false;
    }
  }
  return true;
}

// All length-7 level sequences filtered by the transition constraint; the
// brute-force counterpart of enumerate_orderings().
inline std::vector<wlf::Ordering> brute_force_orderings() {
  std::vector<wlf::Ordering> out;
  for (int code = 0; code < 2187; ++code) {  // 3^7 candidates
    wlf::Ordering seq{};
    int rest = code;
    for (std::size_t i = 0; i < 7; ++i) {  // big-endian digits: lexicographic order
      seq[6 - i] = static_cast<wlf::WorkloadLevel>(rest % 3);
      rest /= 3;
    }
    if (covers_each_transition_once(seq)) out.push_back(seq);
  }
  return out;
}

// Smallest |pre-activation| over both hidden layers and all batch rows.
// Finite-difference checks resample batches whose relu inputs sit within
// reach of the h = 1e-5 perturbation, where the kink would corrupt the
// difference quotient.
inline double min_preactivation_margin(const wlf::MlpModel& m,
                                       const std::vector<wlf::WindowSample>& batch) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& sample : batch) {
    std::vector<double> activation = sample.features;
    for (std::size_t l = 0; l + 1 < m.weights.size(); ++l) {
      std::vector<double> next(std::size_t(m.weights[l].rows()));
      for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
        double z = m.biases[l](r);
        for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) {
          z += m.weights[l](r, c) * activation[std::size_t(c)];
        }
        margin = std::min(margin, std::abs(z));
        next[std::size_t(r)] = std::max(0.0, z);
      }
      activation = std::move(next);
    }
  }
  return margin;
}

// Central finite differences of the batch MSE with respect to every
// parameter. h = 1e-5 matches the documented gradient-check contract.
struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t n_checked = 0;
};

inline FiniteDiffReport finite_difference_check(wlf::MlpModel& m,
                                                const std::vector<wlf::WindowSample>& batch,
                                                const wlf::MlpGradients& analytic,
                                                double h = 1e-5) {
  FiniteDiffReport report;
  auto check_one = [&](double& param, double grad) {
    const double saved = param;
    param = saved + h;
    const double up = wlf::mse_loss(m, batch);
    param = saved - h;
    const double down = wlf::mse_loss(m, batch);
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad), 1e-6});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(fd - grad) / denom);
    ++report.n_checked;
  };
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) {
        check_one(m.weights[l](r, c), analytic.weights[l](r, c));
      }
    }
    for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) {
      check_one(m.biases[l](r), analytic.biases[l](r));
    }
  }
  return report;
}

}  // namespace oracle
