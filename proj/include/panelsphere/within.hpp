#pragma once

// Fixed-effects (within) estimation: per-unit time demeaning, OLS on the
// demeaned data, residuals, and the residual fourth moment.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "panelsphere/common.hpp"
#include "panelsphere/simulate.hpp"

namespace panelsphere {

struct DemeanedPanel {
  Matrix y;               // y_tilde
  std::vector<Matrix> x;  // x_tilde per regressor
};

inline Matrix demean_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    NeumaierSum s;
    const double* row = m.row(i);
    for (std::size_t t = 0; t < m.cols(); ++t) s.add(row[t]);
    const double mean = s.value() / double(m.cols());
    double* orow = out.row(i);
    for (std::size_t t = 0; t < m.cols(); ++t) orow[t] = row[t] - mean;
  }
  return out;
}

inline DemeanedPanel demean(const PanelData& p) {
  if (p.T() < 2) throw InputError("demean: T must be >= 2");
  DemeanedPanel d;
  d.y = demean_rows(p.y);
  d.x.reserve(p.k());
  for (const auto& xq : p.x) d.x.push_back(demean_rows(xq));
  return d;
}

struct WithinFit {
  std::vector<double> beta_hat;
  Matrix residuals;  // n x T
  Matrix gram;       // k x k normal-equations matrix
  std::size_t n = 0, T = 0, k = 0;
  double ss_demeaned_y = 0.0;  // sum of y_tilde^2, for degeneracy detection
  double ss_residual = 0.0;
};

// OLS of y_tilde on x_tilde. k is small and fixed; the k x k system is
// solved by Cholesky after a condition check.
inline WithinFit within_ols(const PanelData& p) {
  const std::size_t n = p.n(), T = p.T(), k = p.k();
  if (k > 16) throw EstimationError("within_ols: k limited to 16");
  const DemeanedPanel d = demean(p);

  WithinFit fit;
  fit.n = n;
  fit.T = T;
  fit.k = k;

  NeumaierSum ssy;
  for (double v : d.y.flat()) ssy.add(v * v);
  fit.ss_demeaned_y = ssy.value();

  if (k == 0) {
    fit.residuals = d.y;
    fit.gram = Matrix(0, 0);
    fit.ss_residual = fit.ss_demeaned_y;
    return fit;
  }

  std::vector<NeumaierSum> a(k * k);
  std::vector<NeumaierSum> b(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t q = 0; q < k; ++q) {
        const double xq = d.x[q](i, t);
        b[q].add(xq * d.y(i, t));
        for (std::size_t w = q; w < k; ++w) a[q * k + w].add(xq * d.x[w](i, t));
      }
    }
  }
  Matrix gram(k, k);
  std::vector<double> rhs(k);
  for (std::size_t q = 0; q < k; ++q) {
    rhs[q] = b[q].value();
    for (std::size_t w = q; w < k; ++w) {
      gram(q, w) = a[q * k + w].value();
      gram(w, q) = gram(q, w);
    }
  }

  auto evals = jacobi_eigen_sym(gram);
  if (!(evals.front() > 0.0) || evals.back() / evals.front() > 1e12)
    throw EstimationError("within_ols: normal equations singular or ill-conditioned");

  fit.beta_hat = cholesky_solve(gram, rhs);
  fit.gram = std::move(gram);

  fit.residuals = Matrix(n, T);
  NeumaierSum ssr;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      double r = d.y(i, t);
      for (std::size_t q = 0; q < k; ++q) r -= fit.beta_hat[q] * d.x[q](i, t);
      fit.residuals(i, t) = r;
      ssr.add(r * r);
    }
  }
  fit.ss_residual = ssr.value();
  return fit;
}

// Plain fourth-moment average (nT)^{-1} sum |resid|^4. No degrees-of-freedom
// correction: the drift the residuals introduce is handled at the statistic
// level, not here.
inline double gamma4_hat(const Matrix& residuals) {
  if (!residuals.all_finite()) throw InputError("gamma4_hat: non-finite entry");
  NeumaierSum s;
  for (double v : residuals.flat()) s.add(v * v * v * v);
  return s.value() / double(residuals.rows() * residuals.cols());
}

}  // namespace panelsphere
