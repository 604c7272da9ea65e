// Independent reference implementations used only by tests. These deliberately
// avoid the code paths in src/: the t survival function comes from closed
// forms and adaptive quadrature of the density, the binomial tail from a
// Pascal-triangle brute force in extended precision.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

#if defined(__SIZEOF_FLOAT128__)
using big_float = __float128;
#else
using big_float = long double;
#endif

inline long double t_log_pdf_const(long double v) {
  const long double pi = 3.14159265358979323846264338327950288L;
  return lgammal((v + 1) / 2) - lgammal(v / 2) - 0.5L * logl(v * pi);
}

inline long double t_pdf(long double x, long double v) {
  return expl(t_log_pdf_const(v) - (v + 1) / 2 * logl(1 + x * x / v));
}

inline long double adaptive_simpson(const std::function<long double(long double)>& f,
                                    long double a, long double b, long double fa,
                                    long double fm, long double fb,
                                    long double whole, long double eps, int depth) {
  long double m = (a + b) / 2;
  long double lm = (a + m) / 2;
  long double rm = (m + b) / 2;
  long double flm = f(lm);
  long double frm = f(rm);
  long double left = (m - a) / 6 * (fa + 4 * flm + fm);
  long double right = (b - m) / 6 * (fm + 4 * frm + fb);
  long double delta = left + right - whole;
  if (depth <= 0 || fabsl(delta) <= 15 * eps) return left + right + delta / 15;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

inline long double integrate(const std::function<long double(long double)>& f,
                             long double a, long double b, long double rel_eps) {
  long double fa = f(a);
  long double fb = f(b);
  long double fm = f((a + b) / 2);
  long double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  if (whole == 0.0L) return 0.0L;
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, rel_eps * fabsl(whole), 24);
}

/// P[T > t] for Student's t with df degrees of freedom. Closed forms for
/// df 1 and 2; for df >= 3, quadrature of the density over the substitution
/// x = sqrt(df) * tan(u), which maps the infinite tail to a finite interval.
inline double t_sf_reference(double t, double df) {
  const long double pi = 3.14159265358979323846264338327950288L;
  long double v = df;
  long double x = t;
  if (df == 1.0) return static_cast<double>(0.5L - atanl(x) / pi);
  if (df == 2.0) return static_cast<double>(0.5L * (1.0L - x / sqrtl(x * x + 2.0L)));
  if (t < 0) return 1.0 - t_sf_reference(-t, df);

  long double lo = atanl(x / sqrtl(v));
  long double hi = pi / 2;
  auto integrand = [v](long double u) -> long double {
    long double cu = cosl(u);
    if (cu < 1e-18L) return 0.0L;  // limit is 0 for v > 1
    long double xx = sqrtl(v) * tanl(u);
    return t_pdf(xx, v) * sqrtl(v) / (cu * cu);
  };
  long double result = integrate(integrand, lo, hi, 1e-14L);
  return static_cast<double>(result);
}

/// Brute-force P[X >= s] for X ~ Bin(m, p): full Pascal triangle row plus
/// explicit power products, summed from the top term down.
inline double binomial_tail_reference(int m, int s, double p) {
  if (s <= 0) return 1.0;
  if (s > m) return 0.0;
  std::vector<big_float> row(static_cast<std::size_t>(m) + 1, big_float(0));
  row[0] = 1;
  for (int n = 1; n <= m; ++n) {
    for (int k = n; k >= 1; --k) row[static_cast<std::size_t>(k)] += row[static_cast<std::size_t>(k) - 1];
  }
  std::vector<big_float> p_pow(static_cast<std::size_t>(m) + 1);
  std::vector<big_float> q_pow(static_cast<std::size_t>(m) + 1);
  p_pow[0] = 1;
  q_pow[0] = 1;
  big_float bp = static_cast<big_float>(p);
  big_float bq = static_cast<big_float>(1.0) - bp;
  for (int i = 1; i <= m; ++i) {
    p_pow[static_cast<std::size_t>(i)] = p_pow[static_cast<std::size_t>(i) - 1] * bp;
    q_pow[static_cast<std::size_t>(i)] = q_pow[static_cast<std::size_t>(i) - 1] * bq;
  }
  big_float sum = 0;
  for (int j = m; j >= s; --j) {
    sum += row[static_cast<std::size_t>(j)] * p_pow[static_cast<std::size_t>(j)] *
           q_pow[static_cast<std::size_t>(m - j)];
  }
  double out = static_cast<double>(sum);
  if (out < 0.0) return 0.0;
  if (out > 1.0) return 1.0;
  return out;
}

}  // namespace oracles
