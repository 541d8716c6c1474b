#pragma once

// Sphericity test statistics and p-values.
//
// Three calibrations of the same scale-invariant statistic
//   U = (tr S / n)^{-2} (tr S^2 / n) - 1:
//
//  * classic:  n fixed, T large; T U calibrated against (2/n) chi^2.
//  * raw:      large-panel normal limit for observed disturbances,
//              T U - n centered at gamma4 - 2, variance 4. The same formula
//              holds whether n/T stays bounded or diverges, which is what
//              makes the test usable without choosing a regime first.
//  * grj:      residual-based variant after within estimation; the residual
//              noise shifts the centering by c_T = n/T and the fourth moment
//              is estimated from the residuals themselves.
//
// All variants reject one-sided for large U.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "panelsphere/common.hpp"
#include "panelsphere/spectra.hpp"
#include "panelsphere/stats.hpp"
#include "panelsphere/within.hpp"

namespace panelsphere {

enum class TestVariant { classic_chi2, raw_lpa_ulpa, grj };

inline const char* variant_name(TestVariant v) {
  switch (v) {
    case TestVariant::classic_chi2: return "classic-chi2";
    case TestVariant::raw_lpa_ulpa: return "raw-lpa-ulpa";
    case TestVariant::grj: return "grj";
  }
  return "?";
}

struct TestReport {
  double u = 0.0;             // U or U_hat
  double standardized = 0.0;  // centered/scaled statistic
  double p_value = 1.0;
  TestVariant variant = TestVariant::grj;
  std::size_t n = 0, T = 0;
  double c_T = 0.0;
  std::optional<double> gamma4_hat;
  std::string notes;
};

// U from the trace pair. Scale-invariant; errors on all-zero data.
inline double john_u(const SampleTracePair& tp) {
  if (!(tp.tr_s > 0.0)) throw DomainError("john_u: tr S must be positive (all-zero data?)");
  const double m1 = tp.tr_s / double(tp.n);
  const double m2 = tp.tr_s2 / double(tp.n);
  const double u = m2 / (m1 * m1) - 1.0;
  return u < 0.0 ? 0.0 : u;  // clamp FP dust; U >= 0 by Cauchy-Schwarz
}

// Fixed-n calibration: T U ~ (2/n) chi^2_df with df = n(n+1)/2 - 1, so the
// p-value is the chi^2 upper tail at n T U / 2.
inline TestReport classic_john_test(double u, std::size_t n, std::size_t T) {
  if (n < 2 || T < 2) throw InputError("classic_john_test: need n >= 2, T >= 2");
  const double df = 0.5 * double(n) * double(n + 1) - 1.0;
  if (df > 1e8)
    throw DomainError(
        "classic_john_test: chi-square df too large; use the raw-lpa-ulpa normal-limit variant");
  TestReport r;
  r.variant = TestVariant::classic_chi2;
  r.u = u;
  r.n = n;
  r.T = T;
  r.c_T = double(n) / double(T);
  const double x = 0.5 * double(n) * double(T) * u;
  r.standardized = x;  // the chi^2-distributed quantity
  r.p_value = chi2_upper_tail(x, df);
  r.notes = "df=" + std::to_string(std::size_t(df));
  return r;
}

// Normal-limit calibration for observed disturbances:
//   (T U - n - (gamma4 - 2)) / 2 ~ N(0,1),
// identical formula for bounded and diverging n/T.
inline TestReport raw_panel_test(double u, double gamma4, std::size_t n, std::size_t T) {
  if (n < 2 || T < 2) throw InputError("raw_panel_test: need n >= 2, T >= 2");
  TestReport r;
  r.variant = TestVariant::raw_lpa_ulpa;
  r.u = u;
  r.n = n;
  r.T = T;
  r.c_T = double(n) / double(T);
  r.gamma4_hat = gamma4;
  r.standardized = (double(T) * u - double(n) - (gamma4 - 2.0)) / 2.0;
  r.p_value = normal_upper_tail(r.standardized);
  return r;
}

// Centering options for the residual-based statistic: the general form uses
// c_T = n/T; the Gaussian-theory drift n/(T-1) is kept as a reporting
// comparison.
inline double residual_drift(std::size_t n, std::size_t T) { return double(n) / double(T); }
inline double residual_drift_gaussian(std::size_t n, std::size_t T) {
  return double(n) / double(T - 1);
}

// Residual-based test:
//   J = T U_hat - n - (gamma4_hat + c_T - 2),  J/2 ~ N(0,1).
// gamma4_hat is the residual fourth moment standardized by the squared
// residual second moment, so the whole statistic is invariant to rescaling
// the data.
inline TestReport grj_test(const WithinFit& fit, int threads = 1) {
  if (fit.n < 2 || fit.T < 2) throw InputError("grj_test: need n >= 2, T >= 2");
  if (fit.ss_demeaned_y > 0.0 && fit.ss_residual <= 1e-20 * fit.ss_demeaned_y)
    throw DomainError("grj_test: residuals are numerically zero (perfect fit)");
  const DisturbanceMatrix resid(fit.residuals);
  const SampleTracePair tp = sample_traces(resid, threads);
  if (!(tp.tr_s > 0.0)) throw DomainError("grj_test: zero residuals");

  const double u_hat = john_u(tp);
  const double m2 = tp.tr_s / double(fit.n);  // (nT)^{-1} sum resid^2
  const double m4 = gamma4_hat(fit.residuals);
  const double g4 = m4 / (m2 * m2);

  TestReport r;
  r.variant = TestVariant::grj;
  r.u = u_hat;
  r.n = fit.n;
  r.T = fit.T;
  r.c_T = double(fit.n) / double(fit.T);
  r.gamma4_hat = g4;
  const double j = double(fit.T) * u_hat - double(fit.n) - (g4 + r.c_T - 2.0);
  r.standardized = j / 2.0;
  r.p_value = normal_upper_tail(r.standardized);
  r.notes = "gamma4 standardized by residual second moment; centering drift n/T";
  return r;
}

}  // namespace panelsphere
