#pragma once

// Seedable generation of disturbances, factor-model alternatives, and full
// regression panels. Everything is a pure function of (inputs, seed): two
// calls with equal arguments produce bit-identical output regardless of
// thread count or call order, because all randomness flows through
// counter-based streams keyed by (master seed, stream id, purpose).

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "panelsphere/common.hpp"
#include "panelsphere/rng.hpp"
#include "panelsphere/spectra.hpp"

namespace panelsphere {

// Standardized error laws: mean 0, variance 1, known fourth moment, all
// eighth moments finite.
struct ErrorDistribution {
  enum class Kind { gaussian, standardized_gamma, standardized_uniform, rademacher };

  Kind kind = Kind::gaussian;
  double shape = 4.0;  // gamma shape a > 0

  double gamma4() const {
    switch (kind) {
      case Kind::gaussian: return 3.0;
      case Kind::standardized_gamma: return 3.0 + 6.0 / shape;
      case Kind::standardized_uniform: return 1.8;
      case Kind::rademacher: return 1.0;
    }
    return 3.0;
  }

  double draw(RandomStream& g) const {
    switch (kind) {
      case Kind::gaussian:
        return g.normal();
      case Kind::standardized_gamma:
        return (g.gamma(shape) - shape) / std::sqrt(shape);
      case Kind::standardized_uniform:
        return (2.0 * g.uniform01() - 1.0) * std::sqrt(3.0);
      case Kind::rademacher:
        return g.coin() ? 1.0 : -1.0;
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case Kind::gaussian: return "gaussian";
      case Kind::standardized_gamma: return "gamma(" + std::to_string(shape) + ")";
      case Kind::standardized_uniform: return "uniform";
      case Kind::rademacher: return "rademacher";
    }
    return "?";
  }

  static ErrorDistribution gaussian() { return {Kind::gaussian, 0.0}; }
  static ErrorDistribution standardized_gamma(double a) {
    if (!(a > 0.0)) throw DomainError("ErrorDistribution: gamma shape must be positive");
    return {Kind::standardized_gamma, a};
  }
  static ErrorDistribution standardized_uniform() { return {Kind::standardized_uniform, 0.0}; }
  static ErrorDistribution rademacher() { return {Kind::rademacher, 0.0}; }
};

// V = Sigma^{1/2} Z with Z iid from dist. The square root is applied in
// closed form for identity/diagonal/spiked specs; only a dense spec pays for
// a symmetric eigendecomposition.
inline DisturbanceMatrix gen_disturbances(const CovarianceSpec& spec, const ErrorDistribution& dist,
                                          std::size_t n, std::size_t T, Seed seed) {
  if (n < 2 || T < 2) throw InputError("gen_disturbances: need n >= 2 and T >= 2");
  spec.check_dim(n);

  RandomStream g(seed, Draws::disturbance);
  Matrix v(n, T);
  // draw Z column by column (time-major), then apply Sigma^{1/2}
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) v(i, t) = dist.draw(g);

  if (const auto* id = spec.as_identity()) {
    const double s = std::sqrt(id->scale);
    for (double& x : v.flat()) x *= s;
    return DisturbanceMatrix(std::move(v));
  }

  if (const auto* dg = spec.as_diagonal()) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = std::sqrt(dg->eigenvalues[i]);
      double* row = v.row(i);
      for (std::size_t t = 0; t < T; ++t) row[t] *= s;
    }
    return DisturbanceMatrix(std::move(v));
  }

  if (const auto* sp = spec.as_spiked()) {
    const std::size_t r = sp->spikes.size();
    const double se = std::sqrt(sp->sigma_eps2);
    if (sp->loadings == LoadingPolicy::canonical) {
      for (std::size_t i = 0; i < n; ++i) {
        const double s = se * (i < r ? std::sqrt(1.0 + sp->spikes[i]) : 1.0);
        double* row = v.row(i);
        for (std::size_t t = 0; t < T; ++t) row[t] *= s;
      }
    } else {
      // Sigma^{1/2} = sigma_eps (I + sum_j (sqrt(1+h_j)-1) e_j e_j')
      const Matrix e = make_loadings(n, r, sp->loadings, sp->loadings_seed);
      std::vector<double> coef(r);
      for (std::size_t j = 0; j < r; ++j) coef[j] = std::sqrt(1.0 + sp->spikes[j]) - 1.0;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < r; ++j) {
          const double* ej = e.row(j);
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) dot += ej[i] * v(i, t);
          const double w = coef[j] * dot;
          for (std::size_t i = 0; i < n; ++i) v(i, t) += w * ej[i];
        }
        for (std::size_t i = 0; i < n; ++i) v(i, t) *= se;
      }
    }
    return DisturbanceMatrix(std::move(v));
  }

  // dense: symmetric square root via Jacobi
  const auto* dn = spec.as_dense();
  Matrix evecs;
  auto evals = jacobi_eigen_sym(dn->sigma, &evecs);
  const double top = std::max(std::abs(evals.front()), std::abs(evals.back()));
  if (evals.front() < -1e-10 * std::max(1.0, top))
    throw DomainError("gen_disturbances: dense covariance is not positive semi-definite");
  for (double& l : evals) l = std::sqrt(std::max(0.0, l));
  // root = V diag(sqrt(l)) V'
  Matrix root(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += evecs(i, k) * evals[k] * evecs(j, k);
      root(i, j) = s;
    }
  Matrix out = matmul(root, v);
  return DisturbanceMatrix(std::move(out));
}

// Factor alternative: r from a fixed count or a proportion rule, spike sizes
// fixed or d_j * n^exponent.
struct FactorAlternative {
  // number of factors: fixed r, or floor(tau * n) when tau > 0
  std::size_t r = 1;
  double tau = 0.0;
  // spikes: explicit values, or d_j * n^exponent when exponent rule is set
  std::vector<double> h;
  std::vector<double> d;
  double exponent = 0.0;
  bool use_exponent_rule = false;

  double sigma_eps2 = 1.0;
  LoadingPolicy loadings = LoadingPolicy::canonical;
  std::uint64_t loadings_seed = 0;

  std::size_t factor_count(std::size_t n) const {
    std::size_t count = tau > 0.0 ? std::size_t(std::floor(tau * double(n))) : r;
    return count;
  }

  std::vector<double> spikes_at(std::size_t n) const {
    const std::size_t count = factor_count(n);
    if (count < 1) throw DomainError("FactorAlternative: needs at least one factor");
    std::vector<double> out(count);
    if (use_exponent_rule) {
      const double scale = std::pow(double(n), exponent);
      for (std::size_t j = 0; j < count; ++j) {
        const double dj = d.empty() ? 1.0 : d[j % d.size()];
        out[j] = dj * scale;
      }
    } else {
      if (h.empty()) throw DomainError("FactorAlternative: no spike sizes");
      for (std::size_t j = 0; j < count; ++j) out[j] = h[j % h.size()];
    }
    for (double hj : out)
      if (!(hj >= 0.0) || !std::isfinite(hj)) throw DomainError("FactorAlternative: bad spike");
    return out;
  }

  // Population covariance implied at dimension n (spikes of size 0 dropped,
  // they contribute nothing).
  CovarianceSpec covariance_at(std::size_t n) const {
    auto spikes = spikes_at(n);
    if (spikes.size() >= n) throw DomainError("FactorAlternative: r >= n");
    std::vector<double> positive;
    for (double hj : spikes)
      if (hj > 0.0) positive.push_back(hj);
    if (positive.empty()) return CovarianceSpec::identity(sigma_eps2);
    return CovarianceSpec::spiked(sigma_eps2, std::move(positive), loadings, loadings_seed);
  }
};

// nu_it = sum_j xi_ij f_tj + eps_it with xi_j = sigma_eps sqrt(h_j) e_j and
// unit-variance factors, so the population covariance equals
// sigma_eps^2 (sum_j h_j e_j e_j' + I) by construction.
inline DisturbanceMatrix gen_factor_disturbances(const FactorAlternative& alt,
                                                 const ErrorDistribution& dist, std::size_t n,
                                                 std::size_t T, Seed seed) {
  if (n < 2 || T < 2) throw InputError("gen_factor_disturbances: need n >= 2 and T >= 2");
  const auto spikes = alt.spikes_at(n);
  const std::size_t r = spikes.size();
  if (r >= n) throw DomainError("gen_factor_disturbances: r >= n");

  const double se = std::sqrt(alt.sigma_eps2);

  RandomStream geps(seed, Draws::idiosyncratic);
  Matrix v(n, T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) v(i, t) = se * dist.draw(geps);

  RandomStream gf(seed, Draws::factors);
  Matrix f(T, r);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < r; ++j) f(t, j) = dist.draw(gf);

  if (alt.loadings == LoadingPolicy::canonical) {
    for (std::size_t j = 0; j < r; ++j) {
      const double xi = se * std::sqrt(spikes[j]);
      if (xi == 0.0) continue;
      double* row = v.row(j);
      for (std::size_t t = 0; t < T; ++t) row[t] += xi * f(t, j);
    }
  } else {
    const Matrix e = make_loadings(n, r, alt.loadings, alt.loadings_seed);
    for (std::size_t j = 0; j < r; ++j) {
      const double xi = se * std::sqrt(spikes[j]);
      if (xi == 0.0) continue;
      const double* ej = e.row(j);
      for (std::size_t t = 0; t < T; ++t) {
        const double w = xi * f(t, j);
        for (std::size_t i = 0; i < n; ++i) v(i, t) += w * ej[i];
      }
    }
  }
  return DisturbanceMatrix(std::move(v));
}

enum class RegressorLaw { gaussian, uniform };

struct PanelTruth {
  std::vector<double> beta;
  std::vector<double> mu;
  Matrix disturbances;
};

struct PanelData {
  Matrix y;               // n x T
  std::vector<Matrix> x;  // k regressors, each n x T
  std::optional<PanelTruth> truth;

  std::size_t n() const { return y.rows(); }
  std::size_t T() const { return y.cols(); }
  std::size_t k() const { return x.size(); }
};

// y_it = x_it' beta + mu_i + nu_it. Regressors are iid with bounded fourth
// moments and independent of V; fixed effects are correlated with the time
// mean of the first regressor so the within transform actually has a job.
inline PanelData gen_panel(const std::vector<double>& beta, const DisturbanceMatrix& v,
                           Seed regressor_seed, RegressorLaw law = RegressorLaw::gaussian) {
  const std::size_t n = v.n();
  const std::size_t T = v.T();
  const std::size_t k = beta.size();
  if (k < 1) throw InputError("gen_panel: need at least one regressor");
  if (k > 16) throw InputError("gen_panel: k limited to 16");

  RandomStream gx(regressor_seed, Draws::regressors);
  std::vector<Matrix> x(k, Matrix(n, T));
  for (std::size_t q = 0; q < k; ++q)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < T; ++t)
        x[q](i, t) = law == RegressorLaw::gaussian ? gx.normal()
                                                   : (2.0 * gx.uniform01() - 1.0) * std::sqrt(3.0);

  RandomStream gm(regressor_seed, Draws::effects);
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) {
    NeumaierSum s;
    for (std::size_t t = 0; t < T; ++t) s.add(x[0](i, t));
    mu[i] = gm.normal() + 0.5 * s.value() / double(T);
  }

  PanelData p;
  p.y = Matrix(n, T);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < T; ++t) {
      double acc = mu[i] + v.values()(i, t);
      for (std::size_t q = 0; q < k; ++q) acc += beta[q] * x[q](i, t);
      p.y(i, t) = acc;
    }
  p.x = std::move(x);
  p.truth = PanelTruth{beta, std::move(mu), v.values()};
  return p;
}

}  // namespace panelsphere
