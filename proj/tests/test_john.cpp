#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "panelsphere/simulate.hpp"
#include "panelsphere/sphericity.hpp"
#include "panelsphere/stats.hpp"
#include "panelsphere/within.hpp"

using namespace panelsphere;

TEST_CASE("john_u examples") {
  CHECK(john_u({1.0, 0.5, 2, 2}) == doctest::Approx(0.0));
  CHECK(john_u({1.5, 1.75, 2, 2}) == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK_THROWS_AS(john_u({0.0, 0.0, 4, 10}), DomainError);

  // scale invariance: (c^2 tr_s, c^4 tr_s2) leaves U unchanged
  const double c = 2.7;
  const double u1 = john_u({1.5, 1.75, 2, 2});
  const double u2 = john_u({c * c * 1.5, c * c * c * c * 1.75, 2, 2});
  CHECK(u1 == doctest::Approx(u2).epsilon(1e-12));
}

TEST_CASE("classic test calibration") {
  // n=2, T U = 5.99146 -> chi2_2 value 5.99146 -> p ~ 0.05
  const double u = 5.99146 / 100.0;
  const auto r = classic_john_test(u, 2, 100);
  CHECK(std::abs(r.p_value - 0.05) < 1e-4);

  // T U = 0 -> p = 1
  CHECK(classic_john_test(0.0, 5, 50).p_value == 1.0);

  // T U huge -> p -> 0
  CHECK(classic_john_test(1e4, 2, 100).p_value < 1e-12);

  // p strictly decreasing in U
  double prev = 1.1;
  for (double tu : {0.0, 1.0, 3.0, 6.0, 12.0}) {
    const double p = classic_john_test(tu / 80.0, 4, 80).p_value;
    CHECK(p < prev);
    prev = p;
  }

  // df overflow for huge n points at the normal-limit variant
  bool threw = false;
  try {
    classic_john_test(0.5, 20000, 100);
  } catch (const DomainError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("normal-limit") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("raw panel test centering and tails") {
  const std::size_t n = 50, T = 100;
  // T U = n + gamma4 - 2 -> standardized 0, p = 0.5
  const double g4 = 3.0;
  const double u = (double(n) + g4 - 2.0) / double(T);
  const auto r = raw_panel_test(u, g4, n, T);
  CHECK(r.standardized == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.5).epsilon(1e-12));

  // gaussian case reduces to N(1,4) centering: same report for gamma4 = 3
  const auto r2 = raw_panel_test(u, 3.0, n, T);
  CHECK(r2.standardized == doctest::Approx((double(T) * u - double(n) - 1.0) / 2.0));

  // p decreasing in U for fixed (n, T, gamma4)
  double prev = 1.1;
  for (double uu : {0.3, 0.5, 0.7, 0.9}) {
    const double p = raw_panel_test(uu, 3.0, n, T).p_value;
    CHECK(p < prev);
    prev = p;
  }
}

namespace {

WithinFit fit_from_residuals(Matrix resid) {
  WithinFit fit;
  fit.n = resid.rows();
  fit.T = resid.cols();
  fit.k = 0;
  NeumaierSum ss;
  for (double v : resid.flat()) ss.add(v * v);
  fit.ss_demeaned_y = ss.value();
  fit.ss_residual = ss.value();
  fit.residuals = std::move(resid);
  return fit;
}

}  // namespace

TEST_CASE("grj statistic: constructed residuals hitting the exact centering") {
  // two-value residual matrix tuned so that T U_hat = n + gamma4_hat + c_T - 2
  // cannot be built by hand easily, so instead check the identity directly:
  // feed residuals, recompute the pieces independently, and match J.
  const auto v = gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), 30,
                                  40, Seed{70, 0});
  const auto fit = fit_from_residuals(v.values());
  const auto rep = grj_test(fit);

  const auto tp = sample_traces(v);
  const double u = john_u(tp);
  const double m2 = tp.tr_s / 30.0;
  const double g4 = gamma4_hat(v.values()) / (m2 * m2);
  const double j = 40.0 * u - 30.0 - (g4 + 30.0 / 40.0 - 2.0);
  CHECK(rep.u == doctest::Approx(u).epsilon(1e-14));
  CHECK(2.0 * rep.standardized == doctest::Approx(j).epsilon(1e-12));
  CHECK(rep.p_value == doctest::Approx(1.0 - normal_cdf(j / 2.0)).epsilon(1e-12));
  // when J = 0 the p-value is exactly one half
  CHECK(raw_panel_test((30.0 + g4 - 2.0) / 40.0, g4, 30, 40).p_value == doctest::Approx(0.5));
}

TEST_CASE("grj rejects degenerate perfect-fit residuals") {
  WithinFit fit;
  fit.n = 10;
  fit.T = 10;
  fit.k = 1;
  fit.residuals = Matrix(10, 10, 0.0);
  fit.ss_demeaned_y = 1.0;
  fit.ss_residual = 0.0;
  CHECK_THROWS_AS(grj_test(fit), DomainError);
}

TEST_CASE("full-pipeline scale invariance of the grj statistic") {
  const auto v = gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), 50,
                                  60, Seed{71, 0});
  const auto p = gen_panel({1.0, -0.5}, v, Seed{71, 0});
  const auto r1 = grj_test(within_ols(p));

  PanelData p4 = p;
  for (double& y : p4.y.flat()) y *= 4.0;  // exact in floating point
  const auto r4 = grj_test(within_ols(p4));
  CHECK(r4.u == r1.u);
  CHECK(r4.standardized == r1.standardized);
  CHECK(r4.p_value == r1.p_value);

  PanelData p3 = p;
  for (double& y : p3.y.flat()) y *= 3.0;
  const auto r3 = grj_test(within_ols(p3));
  CHECK(r3.u == doctest::Approx(r1.u).epsilon(1e-12));
  CHECK(r3.standardized == doctest::Approx(r1.standardized).epsilon(1e-9));
}

TEST_CASE("grj vs gaussian-theory residual centering: small paired difference") {
  // paired comparison of the general centering (n/T, estimated gamma4) and
  // the gaussian-theory one (n/(T-1), gamma4 fixed at 3)
  std::vector<double> diffs;
  const std::size_t n = 200, T = 200;
  for (std::uint32_t rep = 0; rep < 60; ++rep) {
    const auto v =
        gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), n, T, Seed{72, rep});
    const auto p = gen_panel({1.0, -0.5}, v, Seed{72, rep});
    const auto r = grj_test(within_ols(p));
    const double j_grj = 2.0 * r.standardized;
    const double j_rj = double(T) * r.u - double(n) - residual_drift_gaussian(n, T) * 1.0 - 1.0;
    diffs.push_back(std::abs(j_grj - j_rj));
  }
  std::sort(diffs.begin(), diffs.end());
  CHECK(diffs[diffs.size() / 2] < 0.2);
}

TEST_CASE("null distribution smoke check: J/2 roughly standard normal") {
  std::vector<double> j_half;
  const std::size_t n = 60, T = 60;
  for (std::uint32_t rep = 0; rep < 300; ++rep) {
    const auto v =
        gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), n, T, Seed{73, rep});
    const auto p = gen_panel({1.0, -0.5}, v, Seed{73, rep});
    j_half.push_back(grj_test(within_ols(p)).standardized);
  }
  CHECK(ks_vs_standard_normal(j_half) < 0.1);
}
