#include "datamark/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace datamark {

namespace {

#if defined(__SIZEOF_FLOAT128__)
using wide_float = __float128;
#else
using wide_float = long double;
#endif

// Modified Lentz evaluation of the incomplete beta continued fraction.
long double beta_continued_fraction(long double x, long double a, long double b) {
  const long double tiny = 1e-300L;
  auto numer = [&](int n) -> long double {
    if (n % 2 == 0) {
      long double m = n / 2;
      return m * (b - m) * x / ((a + 2 * m - 1) * (a + 2 * m));
    }
    long double m = (n - 1) / 2;
    return -(a + m) * (a + b + m) * x / ((a + 2 * m) * (a + 2 * m + 1));
  };
  long double c = 1.0L;
  long double d = 0.0L;
  long double f = 1.0L;
  for (int n = 1; n < 200000; ++n) {
    long double an = numer(n);
    d = 1.0L + an * d;
    if (d == 0.0L) d = tiny;
    c = 1.0L + an / c;
    if (c == 0.0L) c = tiny;
    d = 1.0L / d;
    long double mult = c * d;
    f *= mult;
    if (std::fabs(static_cast<double>(mult - 1.0L)) <= 1e-18) break;
  }
  return f;
}

long double log_beta(long double a, long double b) {
  return lgammal(a) + lgammal(b) - lgammal(a + b);
}

long double regularized_incomplete_beta(long double x, long double a, long double b) {
  if (x <= 0.0L) return 0.0L;
  if (x >= 1.0L) return 1.0L;
  long double front = expl(a * logl(x) + b * logl(1.0L - x) - log_beta(a, b));
  if (x < (a + 1.0L) / (a + b + 2.0L))
    return front / (a * beta_continued_fraction(x, a, b));
  return 1.0L - expl(b * logl(1.0L - x) + a * logl(x) - log_beta(b, a)) /
                    (b * beta_continued_fraction(1.0L - x, b, a));
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

double student_t_sf(double t, double df) {
  if (!(df >= 1.0)) throw std::invalid_argument("df must be >= 1");
  if (std::isnan(t)) throw std::invalid_argument("t statistic must not be NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  long double v = df;
  long double x = v / (static_cast<long double>(t) * t + v);
  long double half_tail = 0.5L * regularized_incomplete_beta(x, v / 2.0L, 0.5L);
  long double sf = t >= 0 ? half_tail : 1.0L - half_tail;
  return std::clamp(static_cast<double>(sf), 0.0, 1.0);
}

double ln_binom(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) throw std::invalid_argument("ln_binom needs 0 <= k <= n");
  return static_cast<double>(lgammal(static_cast<long double>(n) + 1.0L) -
                             lgammal(static_cast<long double>(k) + 1.0L) -
                             lgammal(static_cast<long double>(n - k) + 1.0L));
}

double binomial_tail_geq(int trials, int successes, double p0) {
  if (trials < 0) throw std::invalid_argument("trials must be >= 0");
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must lie in (0,1)");
  if (successes <= 0) return 1.0;
  if (successes > trials) return 0.0;

  const wide_float p = static_cast<wide_float>(p0);
  const wide_float q = static_cast<wide_float>(1.0) - p;

  // pmf(successes) built as interleaved C(m,s) * p^s so intermediate values
  // stay in range, then the remaining q^(m-s) factors.
  wide_float term = 1;
  for (int i = 1; i <= successes; ++i) {
    term *= p * static_cast<wide_float>(trials - successes + i) /
            static_cast<wide_float>(i);
  }
  for (int i = 0; i < trials - successes; ++i) term *= q;

  wide_float sum = term;
  for (int j = successes; j < trials; ++j) {
    term *= (static_cast<wide_float>(trials - j) / static_cast<wide_float>(j + 1)) *
            (p / q);
    sum += term;
  }
  double out = static_cast<double>(sum);
  return std::clamp(out, 0.0, 1.0);
}

void PairedSamples::validate() const {
  if (benign.size() != watermarked.size())
    throw std::invalid_argument("paired lists must have equal length");
  if (benign.size() < 2)
    throw std::invalid_argument("paired test needs at least 2 samples");
  for (std::size_t i = 0; i < benign.size(); ++i) {
    for (double v : {benign[i], watermarked[i]}) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw std::invalid_argument("paired probabilities must be finite in [0,1]");
    }
  }
}

TestResult paired_t_test_shifted(const PairedSamples& s, double tau) {
  s.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0,1]");

  const auto m = s.benign.size();
  std::vector<double> d(m);
  for (std::size_t i = 0; i < m; ++i) d[i] = s.watermarked[i] - s.benign[i];
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(m - 1));

  TestResult r;
  r.df = static_cast<double>(m - 1);
  r.null_hypothesis = "mean(watermarked - benign) = tau";
  r.alternative = "mean(watermarked - benign) > tau";
  if (sd == 0.0) {
    r.statistic = mean > tau ? std::numeric_limits<double>::infinity()
                 : mean < tau ? -std::numeric_limits<double>::infinity()
                              : 0.0;
    r.p_value = mean > tau ? 0.0 : 1.0;
    return r;
  }
  r.statistic = (mean - tau) * std::sqrt(static_cast<double>(m)) / sd;
  r.p_value = student_t_sf(r.statistic, r.df);
  return r;
}

double delta_p(const PairedSamples& s) {
  s.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < s.benign.size(); ++i)
    sum += s.watermarked[i] - s.benign[i];
  return sum / static_cast<double>(s.benign.size());
}

namespace {

TestResult wilcoxon_hit_rate_test(int m, int hits, double p0) {
  // Indicators shifted by p0 give exactly two tie groups of |d|: p0 for
  // misses and 1-p0 for hits. No zeros can occur for p0 in (0,1).
  const int misses = m - hits;
  const double n = m;
  double rank_hits;
  if (p0 < 0.5) {
    rank_hits = misses + (hits + 1) / 2.0;  // hits carry the larger |d|
  } else if (p0 > 0.5) {
    rank_hits = (hits + 1) / 2.0;
  } else {
    rank_hits = (n + 1) / 2.0;  // all |d| tie
  }
  double w_plus = hits * rank_hits;
  double mean = n * (n + 1) / 4.0;
  double var = n * (n + 1) * (2 * n + 1) / 24.0;
  auto tie_adjust = [](double t) { return (t * t * t - t) / 48.0; };
  if (p0 == 0.5) {
    var -= tie_adjust(n);
  } else {
    var -= tie_adjust(static_cast<double>(hits)) +
           tie_adjust(static_cast<double>(misses));
  }
  TestResult r;
  r.df = std::numeric_limits<double>::quiet_NaN();
  if (var <= 0.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  r.statistic = (w_plus - mean - 0.5) / std::sqrt(var);
  r.p_value = normal_sf(r.statistic);
  return r;
}

}  // namespace

TestResult label_only_test(const std::vector<int>& labels, int target_label,
                           int num_classes, LabelTestMethod method,
                           std::optional<double> p0_opt) {
  if (labels.empty()) throw std::invalid_argument("label list must be non-empty");
  if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
  if (target_label < 0 || target_label >= num_classes)
    throw std::invalid_argument("target label out of range");
  double p0 = p0_opt.value_or(1.0 / static_cast<double>(num_classes));
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("p0 must lie in (0,1)");

  const int m = static_cast<int>(labels.size());
  int hits = 0;
  for (int l : labels) {
    if (l < 0 || l >= num_classes)
      throw std::invalid_argument("predicted label out of range");
    if (l == target_label) ++hits;
  }

  TestResult r;
  r.null_hypothesis = "P[label == target] = " + std::to_string(p0);
  r.alternative = "P[label == target] > " + std::to_string(p0);
  if (method == LabelTestMethod::ExactBinomial) {
    r.statistic = static_cast<double>(hits);
    r.df = std::numeric_limits<double>::quiet_NaN();
    r.p_value = binomial_tail_geq(m, hits, p0);
    return r;
  }
  TestResult w = wilcoxon_hit_rate_test(m, hits, p0);
  w.null_hypothesis = r.null_hypothesis;
  w.alternative = r.alternative;
  return w;
}

}  // namespace datamark
