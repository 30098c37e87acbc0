#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace wlf {

struct SpearmanResult {
  double rho = 0.0;
  std::size_t n = 0;
};

struct FriedmanResult {
  double chi2 = 0.0;
  std::size_t df = 0;          // k - 1
  std::size_t n_subjects = 0;
  double p = 1.0;
  double kendalls_w = 0.0;     // chi2 / (n * (k - 1))
};

enum class WilcoxonMethod { Exact, NormalApprox };

struct WilcoxonResult {
  double w_statistic = 0.0;    // min of positive/negative rank sums
  std::size_t n_effective = 0; // pairs left after dropping zero differences
  double p = 1.0;
  WilcoxonMethod method = WilcoxonMethod::Exact;
  double cohens_d = 0.0;       // mean(d) / sample sd(d) over non-dropped pairs
};

enum class CorrelationBand { Negligible = 0, Low, Moderate, High };

// Fractional (average) ranks, 1-based; ties share the mean of their ranks.
std::vector<double> average_ranks(const std::vector<double>& values);

// Pearson correlation of the average-ranked sequences. Throws LengthMismatch,
// InsufficientData (n < 2) and ConstantInput.
SpearmanResult spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// Friedman test over an n_subjects x k matrix, tie-corrected with the
// row-wise (t^3 - t) divisor; p from the chi-square upper tail at k - 1
// degrees of freedom. A fully tied matrix yields chi2 = 0, W = 0, p = 1.
FriedmanResult friedman_test(const std::vector<std::vector<double>>& scores);

// Paired signed-rank test, differences a - b, zeros dropped, average ranks.
// Exact two-sided p by full sign enumeration for n_effective <= 20, normal
// approximation with continuity and tie correction beyond. Throws
// LengthMismatch, InsufficientData, AllZeroDifferences.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

// High: rho >= 0.70; Moderate: [0.50, 0.70); Low: [0.30, 0.50); else
// Negligible. Applied to the signed value.
CorrelationBand classify_band(double rho);
const char* band_name(CorrelationBand band);

// Upper tail of the chi-square distribution via the regularized incomplete
// gamma function; absolute error < 1e-10 for df <= 50, x <= 200.
double chi_square_upper_tail(double x, std::size_t df);

double normal_cdf(double z);

// Renders like the report convention: "χ²(3, 21) = 39.17, p < 0.001, W = 0.49".
// p below 0.001 prints as "p < 0.001", otherwise "p = 0.xxx".
std::string format_friedman(const FriedmanResult& r);

}  // namespace wlf
