#include "wlf/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>

#include "wlf/error.hpp"

namespace wlf {

namespace {

// Regularized lower incomplete gamma by series expansion; valid for x < a + 1.
double gamma_p_series(double a, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * eps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by continued fraction; valid for x >= a + 1.
double gamma_q_cont_fraction(double a, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double fpmin = std::numeric_limits<double>::min() / eps;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) <= eps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double sample_sd(const std::vector<double>& values) {
  const std::size_t n = values.size();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / double(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / double(n - 1));
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * double(i + j) + 1.0;  // mean of ranks i+1 .. j+1
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const std::size_t n = a.size();
  if (n < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least 2 pairs");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * double(n + 1);  // mean rank is (n+1)/2 for both
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw Error(ErrorCode::ConstantInput,
                var_a == 0.0 ? "first sequence is constant" : "second sequence is constant");
  }
  double rho = cov / std::sqrt(var_a * var_b);
  rho = std::clamp(rho, -1.0, 1.0);
  return {rho, n};
}

FriedmanResult friedman_test(const std::vector<std::vector<double>>& scores) {
  const std::size_t n = scores.size();
  if (n < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least 2 subjects");
  }
  const std::size_t k = scores[0].size();
  if (k < 3) {
    throw Error(ErrorCode::InsufficientData, "need at least 3 conditions");
  }
  for (const auto& row : scores) {
    if (row.size() != k) {
      throw Error(ErrorCode::IncompleteMatrix, "rows differ in length");
    }
  }

  std::vector<double> rank_sums(k, 0.0);
  double tie_term = 0.0;  // sum over rows of sum_t (t^3 - t)
  for (const auto& row : scores) {
    const auto ranks = average_ranks(row);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
    std::vector<double> sorted(row);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < k) {
      std::size_t j = i;
      while (j + 1 < k && sorted[j + 1] == sorted[i]) ++j;
      const double t = double(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }

  FriedmanResult result;
  result.df = k - 1;
  result.n_subjects = n;

  const double nk = double(n) * double(k);
  double sum_sq = 0.0;
  for (double rj : rank_sums) sum_sq += rj * rj;
  // multiply before dividing: an untied, perfectly ordered matrix then yields
  // chi2 = n(k-1) without rounding
  const double uncorrected =
      (12.0 * sum_sq) / (nk * double(k + 1)) - 3.0 * double(n) * double(k + 1);
  const double correction =
      1.0 - tie_term / (double(n) * (double(k) * double(k) * double(k) - double(k)));
  if (correction <= 0.0) {
    // every row fully tied: no information, not an error
    result.chi2 = 0.0;
    result.kendalls_w = 0.0;
    result.p = 1.0;
    return result;
  }
  result.chi2 = std::max(0.0, uncorrected / correction);
  result.kendalls_w =
      std::clamp(result.chi2 / (double(n) * double(k - 1)), 0.0, 1.0);
  result.p = chi_square_upper_tail(result.chi2, result.df);
  return result;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.size() < 2) {
    throw Error(ErrorCode::InsufficientData, "need at least 2 pairs");
  }
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) {
    throw Error(ErrorCode::AllZeroDifferences, "every pair is tied");
  }
  const std::size_t n = diffs.size();

  std::vector<double> abs_diffs(n);
  for (std::size_t i = 0; i < n; ++i) abs_diffs[i] = std::abs(diffs[i]);
  const auto ranks = average_ranks(abs_diffs);

  double w_pos = 0.0, w_neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (diffs[i] > 0.0 ? w_pos : w_neg) += ranks[i];
  }

  WilcoxonResult result;
  result.n_effective = n;
  result.w_statistic = std::min(w_pos, w_neg);

  const double mean_d = std::accumulate(diffs.begin(), diffs.end(), 0.0) / double(n);
  if (n >= 2) {
    const double sd = sample_sd(diffs);
    result.cohens_d = sd > 0.0 ? mean_d / sd
                               : std::numeric_limits<double>::infinity() *
                                     (mean_d > 0.0 ? 1.0 : -1.0);
  } else {
    result.cohens_d = std::numeric_limits<double>::quiet_NaN();
  }

  if (n <= 20) {
    result.method = WilcoxonMethod::Exact;
    // ranks are multiples of 1/2; doubling them makes every sum integral
    std::vector<long long> ranks2(n);
    for (std::size_t i = 0; i < n; ++i) ranks2[i] = llround(2.0 * ranks[i]);
    const long long observed2 = llround(2.0 * w_pos);
    const std::uint64_t total = 1ull << n;
    std::uint64_t count_le = 0, count_ge = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      long long sum2 = 0;
      std::uint64_t bits = mask;
      while (bits) {
        sum2 += ranks2[std::countr_zero(bits)];
        bits &= bits - 1;
      }
      if (sum2 <= observed2) ++count_le;
      if (sum2 >= observed2) ++count_ge;
    }
    const double one_sided = double(std::min(count_le, count_ge)) / double(total);
    result.p = std::min(1.0, 2.0 * one_sided);
  } else {
    result.method = WilcoxonMethod::NormalApprox;
    const double nn = double(n);
    const double mean_w = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted(abs_diffs);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = double(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    const double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (variance <= 0.0) {
      result.p = 1.0;
    } else {
      const double centered = w_pos - mean_w;
      const double continuity = centered > 0.0 ? -0.5 : (centered < 0.0 ? 0.5 : 0.0);
      const double z = (centered + continuity) / std::sqrt(variance);
      result.p = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::abs(z))));
    }
  }
  return result;
}

CorrelationBand classify_band(double rho) {
  if (rho >= 0.70) return CorrelationBand::High;
  if (rho >= 0.50) return CorrelationBand::Moderate;
  if (rho >= 0.30) return CorrelationBand::Low;
  return CorrelationBand::Negligible;
}

const char* band_name(CorrelationBand band) {
  switch (band) {
    case CorrelationBand::High: return "high";
    case CorrelationBand::Moderate: return "moderate";
    case CorrelationBand::Low: return "low";
    case CorrelationBand::Negligible: return "negligible";
  }
  return "negligible";
}

double chi_square_upper_tail(double x, std::size_t df) {
  if (x < 0.0 || df < 1) {
    throw Error(ErrorCode::InvalidConfig, "need x >= 0 and df >= 1");
  }
  if (x == 0.0) return 1.0;
  const double a = 0.5 * double(df);
  const double xx = 0.5 * x;
  if (xx < a + 1.0) {
    return 1.0 - gamma_p_series(a, xx);
  }
  return gamma_q_cont_fraction(a, xx);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::string format_friedman(const FriedmanResult& r) {
  char buffer[128];
  if (r.p < 0.001) {
    std::snprintf(buffer, sizeof(buffer), "χ²(%zu, %zu) = %.2f, p < 0.001, W = %.2f",
                  r.df, r.n_subjects, r.chi2, r.kendalls_w);
  } else {
    std::snprintf(buffer, sizeof(buffer), "χ²(%zu, %zu) = %.2f, p = %.3f, W = %.2f",
                  r.df, r.n_subjects, r.chi2, r.p, r.kendalls_w);
  }
  return buffer;
}

}  // namespace wlf
