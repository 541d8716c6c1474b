#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "panelsphere/simulate.hpp"
#include "panelsphere/within.hpp"

using namespace panelsphere;

namespace {

Matrix from_rows(std::vector<std::vector<double>> rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace

TEST_CASE("demean basics") {
  // constant series -> zeros
  CHECK(demean_rows(Matrix(3, 5, 2.5)).all_finite());
  const auto z = demean_rows(Matrix(3, 5, 2.5));
  for (double v : z.flat()) CHECK(v == 0.0);

  // hand arithmetic
  const auto d = demean_rows(from_rows({{1, 3}, {2, 4}}));
  CHECK(d(0, 0) == doctest::Approx(-1.0));
  CHECK(d(0, 1) == doctest::Approx(1.0));
  CHECK(d(1, 0) == doctest::Approx(-1.0));
  CHECK(d(1, 1) == doctest::Approx(1.0));

  // idempotence
  const auto dd = demean_rows(d);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < 2; ++t) CHECK(dd(i, t) == doctest::Approx(d(i, t)).epsilon(1e-15));
}

TEST_CASE("noiseless panel: beta recovered, residuals vanish") {
  const std::size_t n = 20, T = 30;
  Matrix zero(n, T, 0.0);
  // V = 0 via a zero disturbance matrix assembled by hand
  PanelData p;
  RandomStream g(Seed{60, 0}, Draws::regressors);
  p.x.assign(1, Matrix(n, T));
  for (double& x : p.x[0].flat()) x = g.normal();
  p.y = Matrix(n, T);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < T; ++t) p.y(i, t) = 2.0 * p.x[0](i, t) + double(i);  // mu_i = i
  const auto fit = within_ols(p);
  CHECK(fit.beta_hat[0] == doctest::Approx(2.0).epsilon(1e-10));
  double rmax = 0.0;
  for (double r : fit.residuals.flat()) rmax = std::max(rmax, std::abs(r));
  CHECK(rmax < 1e-10);
}

TEST_CASE("within residual identities") {
  const auto v = gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), 40,
                                  60, Seed{61, 0});
  const auto p = gen_panel({1.0, -0.5}, v, Seed{61, 0});
  const auto fit = within_ols(p);

  // per-unit time sums vanish
  for (std::size_t i = 0; i < fit.n; ++i) {
    NeumaierSum s;
    for (std::size_t t = 0; t < fit.T; ++t) s.add(fit.residuals(i, t));
    CHECK(std::abs(s.value()) < 1e-9 * double(fit.T));
  }

  // residual-regressor orthogonality
  const auto d = demean(p);
  for (std::size_t q = 0; q < fit.k; ++q) {
    NeumaierSum s, scale;
    for (std::size_t i = 0; i < fit.n; ++i)
      for (std::size_t t = 0; t < fit.T; ++t) {
        s.add(d.x[q](i, t) * fit.residuals(i, t));
        scale.add(std::abs(d.x[q](i, t) * fit.residuals(i, t)));
      }
    CHECK(std::abs(s.value()) < 1e-8 * std::max(1.0, scale.value()));
  }
}

TEST_CASE("k=1 within estimate equals covariance/variance ratio") {
  const auto v = gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), 25,
                                  35, Seed{62, 0});
  const auto p = gen_panel({1.7}, v, Seed{62, 0});
  const auto d = demean(p);
  NeumaierSum sxy, sxx;
  for (std::size_t i = 0; i < p.n(); ++i)
    for (std::size_t t = 0; t < p.T(); ++t) {
      sxy.add(d.x[0](i, t) * d.y(i, t));
      sxx.add(d.x[0](i, t) * d.x[0](i, t));
    }
  const auto fit = within_ols(p);
  CHECK(fit.beta_hat[0] == doctest::Approx(sxy.value() / sxx.value()).epsilon(1e-12));
}

TEST_CASE("estimator scale equivariance") {
  const auto v = gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(), 30,
                                  40, Seed{63, 0});
  const auto p = gen_panel({1.0, -0.5}, v, Seed{63, 0});
  const auto fit = within_ols(p);

  PanelData p4 = p;
  for (double& y : p4.y.flat()) y *= 4.0;  // power of two: exact scaling
  const auto fit4 = within_ols(p4);
  CHECK(fit4.beta_hat[0] == 4.0 * fit.beta_hat[0]);
  CHECK(fit4.beta_hat[1] == 4.0 * fit.beta_hat[1]);
  for (std::size_t i = 0; i < fit.n; ++i)
    for (std::size_t t = 0; t < fit.T; ++t)
      CHECK(fit4.residuals(i, t) == 4.0 * fit.residuals(i, t));

  // standardized fourth moment of residuals is scale-free
  const double g = gamma4_hat(fit.residuals);
  const double g4x = gamma4_hat(fit4.residuals);
  CHECK(g4x == doctest::Approx(256.0 * g).epsilon(1e-12));  // raw moment scales as c^4
}

TEST_CASE("gamma4_hat examples") {
  // all +-1 residuals -> exactly 1
  Matrix pm(6, 8);
  RandomStream g(Seed{64, 0}, Draws::disturbance);
  for (double& x : pm.flat()) x = g.coin() ? 1.0 : -1.0;
  CHECK(gamma4_hat(pm) == doctest::Approx(1.0).epsilon(1e-15));

  // Gaussian, nT = 1e6 -> 3.0 +- 0.05
  const auto v = gen_disturbances(CovarianceSpec::identity(1.0), ErrorDistribution::gaussian(),
                                  1000, 1000, Seed{65, 0});
  CHECK(std::abs(gamma4_hat(v.values()) - 3.0) < 0.05);
}

TEST_CASE("gamma(4) disturbances through the full pipeline: gamma4_hat near 4.5") {
  // average over 5 replications at n=T=300 to beat the sampling noise
  double acc = 0.0;
  for (std::uint32_t rep = 0; rep < 5; ++rep) {
    const auto v = gen_disturbances(CovarianceSpec::identity(1.0),
                                    ErrorDistribution::standardized_gamma(4.0), 300, 300,
                                    Seed{66, rep});
    const auto p = gen_panel({1.0, -0.5}, v, Seed{66, rep});
    const auto fit = within_ols(p);
    acc += gamma4_hat(fit.residuals);
  }
  CHECK(std::abs(acc / 5.0 - 4.5) < 0.1);
}

TEST_CASE("residual fourth-moment drift shrinks like 1/T") {
  // bias of gamma4_hat for gamma(4) errors roughly halves when T doubles
  auto mean_bias = [&](std::size_t T, std::uint64_t seed) {
    const std::size_t reps = 300;
    NeumaierSum s;
    for (std::uint32_t rep = 0; rep < reps; ++rep) {
      const auto v = gen_disturbances(CovarianceSpec::identity(1.0),
                                      ErrorDistribution::standardized_gamma(4.0), 100, T,
                                      Seed{seed, rep});
      const auto p = gen_panel({1.0, -0.5}, v, Seed{seed, rep});
      const auto fit = within_ols(p);
      s.add(gamma4_hat(fit.residuals) - 4.5);
    }
    return s.value() / double(reps);
  };
  const double b100 = mean_bias(100, 67);
  const double b200 = mean_bias(200, 68);
  CHECK(std::abs(b200) < std::abs(b100));
  const double ratio = std::abs(b100) / std::abs(b200);
  CHECK(ratio > 1.2);
  CHECK(ratio < 3.5);
}

TEST_CASE("within_ols error paths") {
  // collinear regressors -> ill-conditioned system
  PanelData p;
  RandomStream g(Seed{69, 0}, Draws::regressors);
  p.x.assign(2, Matrix(10, 10));
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t t = 0; t < 10; ++t) {
      p.x[0](i, t) = g.normal();
      p.x[1](i, t) = 2.0 * p.x[0](i, t);  // exact collinearity
    }
  p.y = Matrix(10, 10, 1.0);
  CHECK_THROWS_AS(within_ols(p), EstimationError);
}
