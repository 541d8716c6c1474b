#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "panelsphere/power.hpp"
#include "panelsphere/spectra.hpp"

using namespace panelsphere;

TEST_CASE("weak-spike power, bounded n/T") {
  // no spikes: power equals size
  const std::vector<double> h0 = {0.0};
  CHECK(power_weak_lpa(h0, 1.0, 0.05).power == doctest::Approx(0.05).epsilon(1e-10));

  // h = 2, c_T = 1, alpha = 0.05
  const std::vector<double> h2 = {2.0};
  CHECK(power_weak_lpa(h2, 1.0, 0.05).power == doctest::Approx(0.6388).epsilon(2e-4));

  // monotone: increasing in h, decreasing in c_T
  double prev = 0.0;
  for (double h : {0.5, 1.0, 1.5, 2.0, 3.0}) {
    const std::vector<double> hv = {h};
    const double p = power_weak_lpa(hv, 1.0, 0.05).power;
    CHECK(p > prev);
    prev = p;
  }
  prev = 1.0;
  for (double c : {0.5, 1.0, 2.0, 4.0}) {
    const double p = power_weak_lpa(h2, c, 0.05).power;
    CHECK(p < prev);
    prev = p;
  }
  CHECK_THROWS_AS(power_weak_lpa(h2, 0.0, 0.05), DomainError);
}

TEST_CASE("weak-spike power, n >> T") {
  // spherical spectrum: power = alpha
  CHECK(power_weak_ulpa({1, 1, 1}, 3.0, 100, 0.05).power == doctest::Approx(0.05).epsilon(1e-9));

  // diagonal {2,1,1,1} spectrum at T = 100
  const auto r = power_weak_ulpa({1.25, 1.75, 1.75}, 3.0, 100, 0.05);
  CHECK(r.power == doctest::Approx(0.99996).epsilon(2e-5));

  // doubling T strictly increases power when eta1^2 < eta2
  const double p1 = power_weak_ulpa({1.25, 1.75, 1.75}, 3.0, 50, 0.05).power;
  const double p2 = power_weak_ulpa({1.25, 1.75, 1.75}, 3.0, 100, 0.05).power;
  CHECK(p2 > p1);

  CHECK_THROWS_AS(power_weak_ulpa({2.0, 1.0, 1.0}, 3.0, 100, 0.05), DomainError);
}

TEST_CASE("grouped-spike moments: null reduction of the mean is exact") {
  for (const auto& [n, T, g4] : std::vector<std::tuple<std::size_t, std::size_t, double>>{
           {50, 100, 3.0}, {123, 77, 4.5}, {200, 200, 1.8}}) {
    const auto st = sigma_traces(CovarianceSpec::identity(1.0), n);
    const auto m = spiked_alt_moments(st, g4, n, T);
    CHECK(double(T) * m.mu == doctest::Approx(double(n) + g4 - 2.0).epsilon(1e-13));
  }
}

TEST_CASE("grouped-spike moments: variance tends to 4 under the null") {
  for (const auto& [n, T] : std::vector<std::pair<std::size_t, std::size_t>>{
           {400, 400}, {600, 300}, {300, 600}}) {
    const auto st = sigma_traces(CovarianceSpec::identity(1.0), n);
    for (double g4 : {3.0, 4.5}) {
      const auto m = spiked_alt_moments(st, g4, n, T);
      CHECK(std::abs(m.sigma2 - 4.0) < 0.35);  // 4 + O(1/min(n,T))
    }
  }
}

TEST_CASE("grouped-spike moments: invariant under Sigma -> c Sigma") {
  std::vector<double> lam(60, 1.0);
  lam[0] = 4.0;
  lam[1] = 2.2;
  const std::size_t n = lam.size(), T = 90;
  const auto base = spiked_alt_moments(sigma_traces(CovarianceSpec::diagonal(lam), n), 3.4, n, T);
  for (double c : {0.5, 2.0, 10.0}) {
    auto lam2 = lam;
    for (double& l : lam2) l *= c;
    const auto m = spiked_alt_moments(sigma_traces(CovarianceSpec::diagonal(lam2), n), 3.4, n, T);
    CHECK(m.mu == doctest::Approx(base.mu).epsilon(1e-12));
    CHECK(m.sigma2 == doctest::Approx(base.sigma2).epsilon(1e-12));
  }
}

TEST_CASE("divergent-weak power formula") {
  // B2 = B1^2 (all eigenvalues equal): the n(1 - B2/B1^2) signal term
  // vanishes, so the power is bounded and does not grow with n
  const auto r0 = power_divergent_weak(1.5, 2.25, 400, 0.25, 3.0, 4.0, 0.05);
  const auto r0big = power_divergent_weak(1.5, 2.25, 4000, 0.25, 3.0, 4.0, 0.05);
  CHECK(r0.power == doctest::Approx(r0big.power).epsilon(1e-12));
  CHECK(r0.power < 0.6);

  // genuine dispersion drives the argument negative and the power high
  const auto st = sigma_traces(CovarianceSpec::spiked(1.0, std::vector<double>(100, 3.0)), 400);
  const auto m = spiked_alt_moments(st, 3.0, 400, 400);
  const double B1 = st.tr1 / 400.0, B2 = st.tr2 / 400.0;
  const auto r1 = power_divergent_weak(B1, B2, 400, 0.25, 3.0, std::sqrt(m.sigma2), 0.05);
  CHECK(r1.power > 0.99);

  // monotone in n for fixed spectrum shape (sigma = O(sqrt(n)))
  double prev = 0.0;
  for (std::size_t n : {100, 200, 400, 800}) {
    const auto stn = sigma_traces(CovarianceSpec::spiked(1.0, std::vector<double>(n / 4, 3.0)), n);
    const auto mn = spiked_alt_moments(stn, 3.0, n, n);
    const double p = power_divergent_weak(stn.tr1 / double(n), stn.tr2 / double(n), n, 0.25, 3.0,
                                          std::sqrt(mn.sigma2), 0.05)
                         .power;
    CHECK(p >= prev * 0.999);
    prev = p;
  }

  CHECK_THROWS_AS(power_divergent_weak(1.2, 1.6, 100, 0.0, 3.0, 2.0, 0.05), DomainError);
  CHECK_THROWS_AS(power_divergent_weak(1.2, 1.0, 100, 0.5, 3.0, 2.0, 0.05), DomainError);
}

TEST_CASE("growing-spike power formula") {
  // null reduction: T mu = n + gamma4 - 2 and sigma = 2 -> power = alpha
  const std::size_t n = 100, T = 100;
  const double g4 = 3.0;
  const double mu = (double(n) + g4 - 2.0) / double(T);
  CHECK(power_growing_spikes(mu, 2.0, n, T, g4, 0.05).power == doctest::Approx(0.05).epsilon(1e-9));

  // mu ~ c1 n, sigma^2 ~ c2 n^3: argument ~ -sqrt(n), power -> 1
  double prev = 0.0;
  for (double nn : {100.0, 400.0, 1600.0}) {
    const double p =
        power_growing_spikes(0.05 * nn, std::sqrt(0.2 * nn * nn * nn), std::size_t(nn),
                             std::size_t(nn), 3.0, 0.05)
            .power;
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(prev > 0.999);

  // spiked exponent 0.6, r=2, n=T=300: formula power above 0.95
  {
    std::vector<double> lam(300, 1.0);
    const double scale = std::pow(300.0, 0.6);
    lam[0] = 1.0 + scale;
    lam[1] = 1.0 + 1.5 * scale;
    const auto st = sigma_traces(CovarianceSpec::diagonal(lam), 300);
    const auto m = spiked_alt_moments(st, 3.0, 300, 300);
    const auto r = power_growing_spikes(m.mu, std::sqrt(m.sigma2), 300, 300, 3.0, 0.05);
    CHECK(r.power > 0.95);
  }
}

TEST_CASE("general covariance limit: hand-substituted variance and identities") {
  // all-ones point, c = 1: s1^2 = 8/c + 4 = 12
  const auto lim = general_cov_limit({1, 1, 1, 1}, {1, 2}, 1.0, 100, 3.0, false, 0.05);
  CHECK(lim.s2 == doctest::Approx(12.0).epsilon(1e-13));
  CHECK(!lim.note.empty());

  // and for general c the same substitution gives 8/c + 4
  for (double c : {0.25, 0.5, 2.0}) {
    const auto l = general_cov_limit({1, 1, 1, 1}, {1.0, 1.0 + c}, c, 100, 3.0, false, 0.05);
    CHECK(l.s2 == doctest::Approx(8.0 / c + 4.0).epsilon(1e-12));
  }

  // diagonal branch with gamma4 = 3 equals the general branch, term by term
  for (const auto& [theta, c] : std::vector<std::pair<std::array<double, 4>, double>>{
           {{1.5, 2.5, 4.5, 8.5}, 0.7}, {{2, 5, 14, 41}, 1.0}}) {
    const auto vt = mp_moments(theta, c);
    const auto a = general_cov_limit(theta, vt, c, 150, 3.0, true, 0.05);
    const auto b = general_cov_limit(theta, vt, c, 150, 3.0, false, 0.05);
    CHECK(a.s2 == doctest::Approx(b.s2).epsilon(1e-12));
    CHECK(a.center == doctest::Approx(b.center).epsilon(1e-12));
  }

  // unsupported branch: non-diagonal Sigma with gamma4 != 3
  bool threw = false;
  try {
    general_cov_limit({1, 2, 3, 4}, {1, 3}, 1.0, 100, 4.5, false, 0.05);
  } catch (const DomainError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("eigenvectors") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("power results stay inside [0,1] and P1 >= alpha") {
  RandomStream g(Seed{80, 0}, Draws::disturbance);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> h = {3.0 * g.uniform01()};
    const double c = 0.2 + 3.0 * g.uniform01();
    const double alpha = 0.01 + 0.2 * g.uniform01();
    const auto r = power_weak_lpa(h, c, alpha);
    CHECK(r.power >= alpha - 1e-12);
    CHECK(r.power <= 1.0);
  }
}
