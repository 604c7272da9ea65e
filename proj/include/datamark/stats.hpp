#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace datamark {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df = 0.0;  // NaN for exact tests
  std::string null_hypothesis;
  std::string alternative;
};

/// Survival function of Student's t distribution, P[T > t], via the
/// regularized incomplete beta function evaluated in extended precision.
/// Requires df >= 1.
double student_t_sf(double t, double df);

/// log C(n, k); requires 0 <= k <= n.
double ln_binom(std::int64_t n, std::int64_t k);

/// Exact one-sided binomial tail P[X >= successes] for X ~ Bin(trials, p0),
/// summed term by term in extended precision.
double binomial_tail_geq(int trials, int successes, double p0);

/// Index-aligned probabilities at the target label: benign[i] and
/// watermarked[i] come from the same underlying sample.
struct PairedSamples {
  std::vector<double> benign;
  std::vector<double> watermarked;
  void validate() const;  // equal length >= 2, entries finite in [0,1]
};

/// One-tailed paired t-test of H0: benign + tau = watermarked against
/// H1: benign + tau < watermarked. With d = watermarked - benign:
/// t = (mean(d) - tau) * sqrt(m) / sd(d), p = P[T_{m-1} > t].
/// Zero-variance d degenerates to p = 0 when mean(d) > tau, else p = 1.
TestResult paired_t_test_shifted(const PairedSamples& s, double tau);

/// Mean of watermarked[i] - benign[i]; the confidence score.
double delta_p(const PairedSamples& s);

enum class LabelTestMethod { ExactBinomial, WilcoxonSignedRank };

/// Tests whether labels hit target_label more often than the null rate p0
/// (default 1/num_classes). The default is the exact one-sided binomial
/// test; the Wilcoxon variant runs a signed-rank test on the 0/1 hit
/// indicators shifted by p0, normal approximation with continuity
/// correction, zeros dropped.
TestResult label_only_test(const std::vector<int>& labels, int target_label,
                           int num_classes,
                           LabelTestMethod method = LabelTestMethod::ExactBinomial,
                           std::optional<double> p0 = std::nullopt);

}  // namespace datamark
