#pragma once

// Distribution functions and sample diagnostics.
//
// normal_cdf goes through the complementary error function (absolute error
// well under 1e-12). chi2_upper_tail is the regularized upper incomplete
// gamma Q(df/2, x/2), computed with the usual split: power series for
// x < a+1, Lentz continued fraction otherwise (absolute error <= 1e-10 over
// the df range used here). Quantiles are found by bisection on the CDF, so
// there is no external quantile dependency to disagree with.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "panelsphere/common.hpp"

namespace panelsphere {

namespace detail {
// Test hook: additive corruption for negative-control checks of the
// validation suite. Always 0.0 outside those tests.
inline std::atomic<double>& normal_cdf_bias() {
  static std::atomic<double> bias{0.0};
  return bias;
}
}  // namespace detail

inline double normal_cdf(double x) {
  double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
  const double bias = detail::normal_cdf_bias().load(std::memory_order_relaxed);
  if (bias != 0.0) p = std::clamp(p + bias, 0.0, 1.0);
  return p;
}

// P(N(0,1) > x) without the 1 - Phi(x) cancellation, so one-sided p-values
// stay strictly decreasing far into the tail.
inline double normal_upper_tail(double x) {
  double p = 0.5 * std::erfc(x / std::sqrt(2.0));
  const double bias = detail::normal_cdf_bias().load(std::memory_order_relaxed);
  if (bias != 0.0) p = std::clamp(p - bias, 0.0, 1.0);
  return p;
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::acos(-1.0));
}

// Upper alpha-quantile z with P(N(0,1) > z) = alpha, by bisection to 1e-10.
inline double normal_upper_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("normal_upper_quantile: alpha outside (0,1)");
  double lo = -40.0, hi = 40.0;
  const double target = 1.0 - alpha;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series.
inline double gamma_p_series(double a, double x) {
  const double lg = std::lgamma(a);
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 10000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - lg);
}

// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction.
inline double gamma_q_cf(double a, double x) {
  const double lg = std::lgamma(a);
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 10000; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - lg) * h;
}

}  // namespace detail

// Q(a,x) = 1 - P(a,x), regularized.
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DomainError("gamma_q: shape must be positive");
  if (x < 0.0) throw DomainError("gamma_q: x must be nonnegative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

inline double gamma_p(double a, double x) { return 1.0 - gamma_q(a, x); }

// P(chi^2_df > x).
inline double chi2_upper_tail(double x, double df) {
  if (!(df > 0.0)) throw DomainError("chi2_upper_tail: df must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

struct SampleMoments {
  double mean = 0.0;
  double var = 0.0;   // unbiased
  double skew = 0.0;  // m3 / m2^{3/2}
  std::size_t n = 0;
  bool degenerate = false;  // var == 0 (constant samples)
};

inline SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments m;
  m.n = xs.size();
  if (m.n == 0) return m;
  NeumaierSum s;
  for (double x : xs) s.add(x);
  m.mean = s.value() / double(m.n);
  NeumaierSum s2, s3;
  for (double x : xs) {
    const double d = x - m.mean;
    s2.add(d * d);
    s3.add(d * d * d);
  }
  const double m2 = s2.value() / double(m.n);
  m.var = m.n > 1 ? s2.value() / double(m.n - 1) : 0.0;
  if (m2 > 0.0) {
    m.skew = (s3.value() / double(m.n)) / std::pow(m2, 1.5);
  } else {
    m.degenerate = true;
  }
  return m;
}

// Two-sided Kolmogorov-Smirnov statistic against a reference CDF.
inline double ks_statistic(std::span<const double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw DiagnosticError("ks_statistic: no samples");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = double(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max(d, std::abs(double(i + 1) / n - f));
    d = std::max(d, std::abs(f - double(i) / n));
  }
  return d;
}

inline double ks_vs_standard_normal(std::span<const double> xs) {
  return ks_statistic(xs, [](double x) { return normal_cdf(x); });
}

}  // namespace panelsphere
