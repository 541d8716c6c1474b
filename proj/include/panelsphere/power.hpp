#pragma once

// Closed-form asymptotic power of the sphericity tests under factor-model
// and general-covariance alternatives, plus the mean/variance of the raw
// statistic under grouped-spike alternatives (bounded or growing spikes).
//
// Conventions:
//  * Z_alpha is the upper alpha-quantile of N(0,1), found by bisection.
//  * All functions evaluate at finite (n, T) traces; nothing substitutes
//    limits for computable finite-size quantities.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "panelsphere/common.hpp"
#include "panelsphere/spectra.hpp"
#include "panelsphere/stats.hpp"

namespace panelsphere {

struct PowerResult {
  double power = 0.0;
  double alpha = 0.0;
  std::string scenario;
  std::vector<std::pair<std::string, double>> inputs;  // echo for auditability
};

// Weak spikes, bounded n/T: power = 1 - Phi(Z_alpha - sum h_j^2 / (2 c_T)).
// Increasing in every spike, decreasing in c_T.
inline PowerResult power_weak_lpa(std::span<const double> h, double c_T, double alpha) {
  if (!(c_T > 0.0)) throw DomainError("power_weak_lpa: c_T must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("power_weak_lpa: alpha outside (0,1)");
  double shift = 0.0;
  for (double hj : h) {
    if (!(hj >= 0.0)) throw DomainError("power_weak_lpa: spikes must be nonnegative");
    shift += hj * hj;
  }
  shift /= 2.0 * c_T;
  const double za = normal_upper_quantile(alpha);
  PowerResult r;
  r.power = normal_upper_tail(za - shift);
  r.alpha = alpha;
  r.scenario = "weak-lpa";
  r.inputs = {{"c_T", c_T}, {"shift", shift}, {"Z_alpha", za}};
  for (std::size_t j = 0; j < h.size(); ++j) r.inputs.emplace_back("h" + std::to_string(j + 1), h[j]);
  return r;
}

// Weak spikes, n/T diverging: argument built from the trace limits
// eta1 = tr Sigma/n, eta2 = tr Sigma^2/n, eta3 = n^{-1} sum Sigma_ii^2.
// Tends to 1 as T grows whenever eta1^2 < eta2 (any non-spherical spectrum).
inline PowerResult power_weak_ulpa(const std::array<double, 3>& eta, double gamma4, std::size_t T,
                                   double alpha) {
  const double e1 = eta[0], e2 = eta[1], e3 = eta[2];
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("power_weak_ulpa: alpha outside (0,1)");
  if (!(e1 > 0.0)) throw DomainError("power_weak_ulpa: eta1 must be positive");
  const double e1sq = e1 * e1;
  if (e2 < e1sq * (1.0 - 1e-12))
    throw DomainError("power_weak_ulpa: eta2 < eta1^2 is an impossible spectrum");
  const double za = normal_upper_quantile(alpha);
  const double arg = (e1sq / e2) * za + (e1sq * (gamma4 - 2.0) - e2 - e3 * (gamma4 - 3.0)) / (2.0 * e2) +
                     (e1sq - e2) * double(T) / (2.0 * e2);
  PowerResult r;
  r.power = normal_upper_tail(arg);
  r.alpha = alpha;
  r.scenario = "weak-ulpa";
  r.inputs = {{"eta1", e1}, {"eta2", e2}, {"eta3", e3}, {"gamma4", gamma4},
              {"T", double(T)}, {"Z_alpha", za}, {"argument", arg}};
  return r;
}

// Mean and variance of T U for grouped-spike alternatives, from the finite-n
// trace functionals of Sigma. The variance assembles the delta method from
// the covariance structure of (tr S^2, tr S):
//   omega1 ~ Var(tr S), omega2 ~ Cov(tr S^2, tr S), omega3 ~ Var(tr S^2),
// and reduces to exactly 4 under Sigma = s^2 I for every c_T and gamma4.
struct SpikedAltMoments {
  double mu = 0.0;      // asymptotic mean of U
  double sigma2 = 0.0;  // asymptotic variance of T U
  // intermediates (trace scale, not ESD scale)
  double theta1 = 0.0, theta2 = 0.0;
  double omega1 = 0.0, omega2 = 0.0, omega3 = 0.0;
  double c_T = 0.0;
};

inline SpikedAltMoments spiked_alt_moments(const SigmaTraces& st, double gamma4, std::size_t n,
                                           std::size_t T) {
  if (!(st.tr1 > 0.0)) throw DomainError("spiked_alt_moments: tr Sigma must be positive");
  if (n < 2 || T < 2) throw InputError("spiked_alt_moments: need n >= 2, T >= 2");
  const double dn = double(n), dT = double(T);
  const double g3 = gamma4 - 3.0;
  const double c_T = dn / dT;
  const double tr1 = st.tr1, tr2 = st.tr2, tr3 = st.tr3, tr4 = st.tr4;
  const double tr1sq = tr1 * tr1;

  SpikedAltMoments m;
  m.c_T = c_T;
  m.mu = c_T * (g3 * st.had11 + (dT + 1.0) * tr2) / tr1sq + c_T - 1.0;
  m.theta1 = tr1;
  m.theta2 = (g3 * st.had11 + tr1sq + (dT + 1.0) * tr2) / dT;
  m.omega1 = (g3 * st.had11 + 2.0 * tr2) / dT;
  m.omega2 = (4.0 * tr2 * tr1 + 2.0 * g3 * st.had11 * tr1 + 2.0 * dT * g3 * st.had12 +
              4.0 * dT * tr3) / (dT * dT);
  m.omega3 = (8.0 * tr2 * tr1sq + 4.0 * g3 * tr1sq * st.had11 + 16.0 * dT * tr1 * tr3 +
              4.0 * dT * tr2 * tr2 + 8.0 * dT * g3 * st.had12 * tr1 +
              4.0 * dT * dT * g3 * st.had22 + 8.0 * dT * dT * tr4) / (dT * dT * dT);

  const double t4 = dT * dT * dT * dT;
  const double th2 = m.theta2;
  const double p4 = tr1sq * tr1sq;
  const double p5 = p4 * tr1;
  const double p6 = p5 * tr1;
  m.sigma2 = c_T * c_T *
             (4.0 * t4 * th2 * th2 * m.omega1 / p6 - 4.0 * t4 * th2 * m.omega2 / p5 +
              t4 * m.omega3 / p4);
  return m;
}

// Divergent number of bounded spikes: B1 = tr Sigma / n, B2 = tr Sigma^2 / n,
// tau = limiting fraction of spiked directions, nu4 defaults to gamma4 - 3.
// sigma comes from spiked_alt_moments at the same spectrum.
inline PowerResult power_divergent_weak(double B1, double B2, std::size_t n, double tau,
                                        double gamma4, double sigma, double alpha,
                                        std::optional<double> nu4_opt = std::nullopt) {
  if (!(tau > 0.0))
    throw DomainError("power_divergent_weak: tau must be positive (use the growing-spike power for tau = 0)");
  if (!(tau < 1.0)) throw DomainError("power_divergent_weak: tau must be < 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("power_divergent_weak: alpha outside (0,1)");
  if (!(sigma > 0.0)) throw DomainError("power_divergent_weak: sigma must be positive");
  if (B2 < B1 * B1 * (1.0 - 1e-12))
    throw DomainError("power_divergent_weak: B2 < B1^2 is an impossible spectrum");
  const double nu4 = nu4_opt.value_or(gamma4 - 3.0);
  const double za = normal_upper_quantile(alpha);
  const double arg =
      (2.0 * za + (1.0 + nu4) * (1.0 - 1.0 / tau) + double(n) * (1.0 - B2 / (B1 * B1))) / sigma;
  PowerResult r;
  r.power = normal_upper_tail(arg);
  r.alpha = alpha;
  r.scenario = "divergent-weak";
  r.inputs = {{"B1", B1},   {"B2", B2},     {"n", double(n)}, {"tau", tau},
              {"nu4", nu4}, {"sigma", sigma}, {"Z_alpha", za},  {"argument", arg}};
  return r;
}

// Fixed number of growing spikes: power of the residual-based test using the
// mean/variance of T U from spiked_alt_moments.
inline PowerResult power_growing_spikes(double mu, double sigma, std::size_t n, std::size_t T,
                                        double gamma4, double alpha) {
  if (!(sigma > 0.0)) throw DomainError("power_growing_spikes: sigma must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("power_growing_spikes: alpha outside (0,1)");
  const double za = normal_upper_quantile(alpha);
  const double arg = (2.0 * za + double(n) + (gamma4 - 2.0) - double(T) * mu) / sigma;
  PowerResult r;
  r.power = normal_upper_tail(arg);
  r.alpha = alpha;
  r.scenario = "growing-spikes";
  r.inputs = {{"mu", mu},         {"T_mu", double(T) * mu}, {"sigma", sigma},
              {"n", double(n)},   {"T", double(T)},         {"gamma4", gamma4},
              {"Z_alpha", za},    {"argument", arg}};
  return r;
}

// Limit of the raw statistic under a general bounded-spectrum covariance,
// expressed through the ESD moments theta_1..theta_4 of Sigma and the MP
// moments (vartheta_1, vartheta_2) of the sample spectrum. Two branches:
// gamma4 = 3 (any Sigma) or diagonal Sigma (any gamma4); outside those the
// limit depends on the eigenvectors of Sigma and is not computed here.
struct GeneralCovLimit {
  double s2 = 0.0;      // asymptotic variance of T U
  double center = 0.0;  // centering of T U
  double power = 0.0;
  std::string branch;   // "gamma4=3" or "diagonal"
  std::string note;
};

inline GeneralCovLimit general_cov_limit(const std::array<double, 4>& theta,
                                         const std::array<double, 2>& vartheta, double c,
                                         std::size_t T, double gamma4, bool diagonal,
                                         double alpha) {
  if (!(c > 0.0)) throw DomainError("general_cov_limit: c must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("general_cov_limit: alpha outside (0,1)");
  const double t1 = theta[0], t2 = theta[1], t3 = theta[2], t4 = theta[3];
  const double v1 = vartheta[0], v2 = vartheta[1];
  if (!(v1 > 0.0)) throw DomainError("general_cov_limit: vartheta_1 must be positive");
  const bool gamma4_is_3 = std::abs(gamma4 - 3.0) <= 1e-9;
  if (!diagonal && !gamma4_is_3)
    throw DomainError(
        "general_cov_limit: unsupported case; with gamma4 != 3 and non-diagonal Sigma the "
        "limiting distribution depends on the eigenvectors of Sigma. Supported branches: "
        "gamma4 = 3, or diagonal Sigma");

  const double v1p4 = v1 * v1 * v1 * v1;
  const double v1p5 = v1p4 * v1;
  const double v1p6 = v1p5 * v1;
  const double za = normal_upper_quantile(alpha);

  GeneralCovLimit out;
  out.note =
      "vartheta uses the standard MP moments (m1=theta1, m2=theta2+c*theta1^2); with this "
      "convention the centering does not reduce to the spherical-case centering at Sigma=I - "
      "compare against simulation before trusting absolute levels";

  if (diagonal) {
    const double q = v2 + t2 + gamma4 - 3.0;
    out.branch = "diagonal";
    out.s2 = (gamma4 - 1.0) *
             ((4.0 * t4 / c + 2.0 * t2 * t2 + 4.0 * c * t1 * t1 * t2 + 8.0 * t1 * t3) / v1p4 +
              4.0 * t2 * q * q / (c * v1p6) - (8.0 * t3 / c + 8.0 * t1 * t2) * q / v1p5);
    out.center = double(T) * (q / (v1 * v1) - 1.0);
    const double s = std::sqrt(out.s2);
    const double arg = (2.0 * za + gamma4 - 2.0 + double(T) * (c + 1.0 - q / (v1 * v1))) / s;
    out.power = normal_upper_tail(arg);
  } else {
    const double q = v2 + t2;
    out.branch = "gamma4=3";
    out.s2 = (8.0 * t4 / c + 4.0 * t2 * t2 + 8.0 * c * t1 * t1 * t2 + 16.0 * t1 * t3) / v1p4 -
             (16.0 * t3 / c + 16.0 * t1 * t2) * q / v1p5 + 8.0 * t2 * q * q / (c * v1p6);
    out.center = double(T) * (q / (v1 * v1) - 1.0);
    const double s = std::sqrt(out.s2);
    const double arg = (2.0 * za + 1.0 + double(T) * (c + 1.0 - q / (v1 * v1))) / s;
    out.power = normal_upper_tail(arg);
  }
  return out;
}

}  // namespace panelsphere
