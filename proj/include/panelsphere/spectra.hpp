#pragma once

// Trace kernels for sample and population covariance matrices.
//
// Everything downstream (test statistics, power formulas) consumes only
// tr S, tr S^2 and population trace functionals, so no eigendecomposition of
// S_T is ever performed. tr S^2 is computed on whichever side of the data is
// smaller: the n x n covariance when n <= T, the T x T Gram matrix of time
// columns when n > T. Both paths agree to ~1e-10 relative and are verified
// against each other in the tests.
//
// Accumulation scheme (fixed, so results are bit-stable for any thread
// count): rows of the symmetric product are split into blocks of 32; each
// block accumulates its partial sum with Neumaier compensation in a fixed
// row-major order; block partials are then combined in ascending block
// index. Threads only decide who computes a block, never the order partials
// are combined in.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "panelsphere/common.hpp"
#include "panelsphere/rng.hpp"

namespace panelsphere {

// n x T panel of disturbances (or residuals): rows = cross-section units,
// columns = time points.
class DisturbanceMatrix {
 public:
  explicit DisturbanceMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 2 || values_.cols() < 2)
      throw InputError("DisturbanceMatrix: need n >= 2 and T >= 2");
    if (!values_.all_finite()) throw InputError("DisturbanceMatrix: non-finite entry");
  }

  std::size_t n() const { return values_.rows(); }
  std::size_t T() const { return values_.cols(); }
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

struct SampleTracePair {
  double tr_s = 0.0;   // tr S_T
  double tr_s2 = 0.0;  // tr S_T^2
  std::size_t n = 0;
  std::size_t T = 0;
};

namespace detail {

constexpr std::size_t kTraceBlock = 32;

// Sum of squares of the upper triangle (weighted x2 off the diagonal) of the
// symmetric product M M^T where M is rows x len, blocked as documented above.
inline double sym_product_square_sum(const Matrix& m, int threads) {
  const std::size_t rows = m.rows();
  const std::size_t len = m.cols();
  const std::size_t nblocks = (rows + kTraceBlock - 1) / kTraceBlock;
  std::vector<double> partial(nblocks, 0.0);

  auto run_block = [&](std::size_t b) {
    const std::size_t lo = b * kTraceBlock;
    const std::size_t hi = std::min(rows, lo + kTraceBlock);
    NeumaierSum acc;
    for (std::size_t i = lo; i < hi; ++i) {
      const double* ri = m.row(i);
      for (std::size_t j = i; j < rows; ++j) {
        const double* rj = m.row(j);
        double dot = 0.0;
        for (std::size_t t = 0; t < len; ++t) dot += ri[t] * rj[t];
        acc.add((i == j ? 1.0 : 2.0) * dot * dot);
      }
    }
    partial[b] = acc.value();
  };

  if (threads <= 1 || nblocks <= 1) {
    for (std::size_t b = 0; b < nblocks; ++b) run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= nblocks) return;
        run_block(b);
      }
    };
    std::vector<std::thread> pool;
    const std::size_t nthreads = std::min<std::size_t>(std::size_t(threads), nblocks);
    pool.reserve(nthreads);
    for (std::size_t w = 0; w < nthreads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  NeumaierSum total;
  for (std::size_t b = 0; b < nblocks; ++b) total.add(partial[b]);
  return total.value();
}

}  // namespace detail

namespace detail {

// tr S = (1/T) sum over entries of v^2, identical no matter which tr S^2
// path runs.
inline double trace_s(const Matrix& m, std::size_t T) {
  NeumaierSum ss;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* ri = m.row(i);
    for (std::size_t t = 0; t < m.cols(); ++t) ss.add(ri[t] * ri[t]);
  }
  return ss.value() / double(T);
}

}  // namespace detail

// tr S^2 via the n x n covariance side.
inline SampleTracePair sample_traces_dense(const DisturbanceMatrix& v, int threads = 1) {
  const std::size_t T = v.T();
  const double square_sum = detail::sym_product_square_sum(v.values(), threads);
  return SampleTracePair{detail::trace_s(v.values(), T), square_sum / (double(T) * double(T)),
                         v.n(), T};
}

// tr S^2 via the T x T Gram matrix of time columns: the n x n covariance is
// never formed, which is what makes n >> T panels cheap. The transpose makes
// time columns contiguous.
inline SampleTracePair sample_traces_gram(const DisturbanceMatrix& v, int threads = 1) {
  const std::size_t T = v.T();
  const double square_sum = detail::sym_product_square_sum(transpose(v.values()), threads);
  return SampleTracePair{detail::trace_s(v.values(), T), square_sum / (double(T) * double(T)),
                         v.n(), T};
}

// tr S and tr S^2 of S_T = T^{-1} sum_t nu_t nu_t'. Path selection by cost:
// Gram (T x T) when n > T, dense (n x n) otherwise.
inline SampleTracePair sample_traces(const DisturbanceMatrix& v, int threads = 1) {
  return v.n() > v.T() ? sample_traces_gram(v, threads) : sample_traces_dense(v, threads);
}

// ---------------------------------------------------------------------------
// Population covariance specifications.

enum class LoadingPolicy { canonical, random_orthonormal };

struct IdentityCov {
  double scale = 1.0;  // sigma_nu^2
};

struct DiagonalCov {
  std::vector<double> eigenvalues;
};

struct SpikedFactorCov {
  double sigma_eps2 = 1.0;
  std::vector<double> spikes;  // h_1..h_r, eigenvalues are sigma_eps2*(1+h_j)
  LoadingPolicy loadings = LoadingPolicy::canonical;
  std::uint64_t loadings_seed = 0;
};

struct DenseCov {
  Matrix sigma;
};

class CovarianceSpec {
 public:
  static CovarianceSpec identity(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw DomainError("CovarianceSpec: identity scale must be positive");
    return CovarianceSpec(IdentityCov{scale});
  }

  static CovarianceSpec diagonal(std::vector<double> eigenvalues) {
    if (eigenvalues.empty()) throw DomainError("CovarianceSpec: empty diagonal");
    for (double l : eigenvalues)
      if (!(l > 0.0) || !std::isfinite(l))
        throw DomainError("CovarianceSpec: diagonal eigenvalues must be positive");
    return CovarianceSpec(DiagonalCov{std::move(eigenvalues)});
  }

  static CovarianceSpec spiked(double sigma_eps2, std::vector<double> spikes,
                               LoadingPolicy loadings = LoadingPolicy::canonical,
                               std::uint64_t loadings_seed = 0) {
    if (!(sigma_eps2 > 0.0)) throw DomainError("CovarianceSpec: sigma_eps2 must be positive");
    for (double h : spikes)
      if (!(h > 0.0) || !std::isfinite(h))
        throw DomainError("CovarianceSpec: spikes must be finite and strictly positive");
    if (spikes.empty()) throw DomainError("CovarianceSpec: spiked model needs at least one spike");
    return CovarianceSpec(SpikedFactorCov{sigma_eps2, std::move(spikes), loadings, loadings_seed});
  }

  static CovarianceSpec dense(Matrix sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
      throw InputError("CovarianceSpec: dense matrix must be square");
    if (!sigma.all_finite()) throw InputError("CovarianceSpec: non-finite entry");
    double scale = 0.0;
    for (std::size_t i = 0; i < sigma.rows(); ++i)
      for (std::size_t j = 0; j < sigma.cols(); ++j) scale = std::max(scale, std::abs(sigma(i, j)));
    for (std::size_t i = 0; i < sigma.rows(); ++i)
      for (std::size_t j = i + 1; j < sigma.cols(); ++j)
        if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-12 * std::max(1.0, scale))
          throw DomainError("CovarianceSpec: dense matrix not symmetric");
    return CovarianceSpec(DenseCov{std::move(sigma)});
  }

  const IdentityCov* as_identity() const { return std::get_if<IdentityCov>(&v_); }
  const DiagonalCov* as_diagonal() const { return std::get_if<DiagonalCov>(&v_); }
  const SpikedFactorCov* as_spiked() const { return std::get_if<SpikedFactorCov>(&v_); }
  const DenseCov* as_dense() const { return std::get_if<DenseCov>(&v_); }

  // True when Sigma is diagonal in the standard basis.
  bool is_diagonal_basis() const {
    if (as_identity() || as_diagonal()) return true;
    if (const auto* s = as_spiked()) return s->loadings == LoadingPolicy::canonical;
    return false;
  }

  // Natural dimension if the spec pins one.
  std::optional<std::size_t> pinned_dim() const {
    if (const auto* d = as_diagonal()) return d->eigenvalues.size();
    if (const auto* d = as_dense()) return d->sigma.rows();
    return std::nullopt;
  }

  void check_dim(std::size_t n) const {
    if (auto p = pinned_dim(); p && *p != n)
      throw InputError("CovarianceSpec: dimension mismatch with requested n");
    if (const auto* s = as_spiked()) {
      if (s->spikes.size() >= n) throw DomainError("CovarianceSpec: number of spikes must be < n");
    }
    if (n < 1) throw InputError("CovarianceSpec: n must be positive");
  }

 private:
  template <class V>
  explicit CovarianceSpec(V v) : v_(std::move(v)) {}
  std::variant<IdentityCov, DiagonalCov, SpikedFactorCov, DenseCov> v_;
};

// Orthonormal loading directions e_1..e_r as rows of an r x n matrix.
inline Matrix make_loadings(std::size_t n, std::size_t r, LoadingPolicy policy,
                            std::uint64_t loadings_seed) {
  Matrix e(r, n, 0.0);
  if (policy == LoadingPolicy::canonical) {
    for (std::size_t j = 0; j < r; ++j) e(j, j) = 1.0;
    return e;
  }
  RandomStream g(Seed{loadings_seed, 0}, Draws::loadings);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < n; ++i) e(j, i) = g.normal();
  // modified Gram-Schmidt, two passes for orthogonality at n ~ 500
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < r; ++j) {
      double* ej = e.row(j);
      for (std::size_t p = 0; p < j; ++p) {
        const double* epr = e.row(p);
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += ej[i] * epr[i];
        for (std::size_t i = 0; i < n; ++i) ej[i] -= dot * epr[i];
      }
      double norm2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm2 += ej[i] * ej[i];
      if (!(norm2 > 0.0)) throw DomainError("make_loadings: degenerate direction");
      const double inv = 1.0 / std::sqrt(norm2);
      for (std::size_t i = 0; i < n; ++i) ej[i] *= inv;
    }
  }
  return e;
}

struct SigmaTraces {
  double tr1 = 0, tr2 = 0, tr3 = 0, tr4 = 0;   // tr Sigma^k
  double had11 = 0, had12 = 0, had22 = 0;      // tr(S.S), tr(S.S^2), tr(S^2.S^2)
  std::size_t n = 0;
};

namespace detail {

inline SigmaTraces traces_from_eigen_diag(std::span<const double> lam) {
  SigmaTraces t;
  t.n = lam.size();
  NeumaierSum s1, s2, s3, s4;
  for (double l : lam) {
    const double l2 = l * l;
    s1.add(l);
    s2.add(l2);
    s3.add(l2 * l);
    s4.add(l2 * l2);
  }
  t.tr1 = s1.value();
  t.tr2 = s2.value();
  t.tr3 = s3.value();
  t.tr4 = s4.value();
  // diagonal Sigma: Hadamard traces coincide with plain traces
  t.had11 = t.tr2;
  t.had12 = t.tr3;
  t.had22 = t.tr4;
  return t;
}

inline void require_psd(const Matrix& sigma) {
  auto evals = jacobi_eigen_sym(sigma);
  const double top = std::max(std::abs(evals.front()), std::abs(evals.back()));
  if (evals.front() < -1e-10 * std::max(1.0, top))
    throw DomainError("dense covariance is not positive semi-definite");
}

}  // namespace detail

// Exact trace functionals of Sigma. The spiked model is evaluated in closed
// form without materializing Sigma:
//   tr Sigma^k = sigma_eps^{2k} [ (n-r) + sum_j (1+h_j)^k ]
// and the Hadamard traces need only diag(Sigma), diag(Sigma^2), both O(n r)
// from the loading directions.
inline SigmaTraces sigma_traces(const CovarianceSpec& spec, std::size_t n) {
  spec.check_dim(n);

  if (const auto* id = spec.as_identity()) {
    std::vector<double> lam(n, id->scale);
    return detail::traces_from_eigen_diag(lam);
  }

  if (const auto* dg = spec.as_diagonal()) {
    return detail::traces_from_eigen_diag(dg->eigenvalues);
  }

  if (const auto* sp = spec.as_spiked()) {
    const double s2 = sp->sigma_eps2;
    const std::size_t r = sp->spikes.size();
    SigmaTraces t;
    t.n = n;
    double p1 = 0, p2 = 0, p3 = 0, p4 = 0;
    for (double h : sp->spikes) {
      const double a = 1.0 + h;
      p1 += a;
      p2 += a * a;
      p3 += a * a * a;
      p4 += a * a * a * a;
    }
    const double rest = double(n - r);
    t.tr1 = s2 * (rest + p1);
    t.tr2 = s2 * s2 * (rest + p2);
    t.tr3 = s2 * s2 * s2 * (rest + p3);
    t.tr4 = s2 * s2 * s2 * s2 * (rest + p4);
    if (sp->loadings == LoadingPolicy::canonical) {
      t.had11 = t.tr2;
      t.had12 = t.tr3;
      t.had22 = t.tr4;
    } else {
      const Matrix e = make_loadings(n, r, sp->loadings, sp->loadings_seed);
      NeumaierSum h11, h12, h22;
      for (std::size_t i = 0; i < n; ++i) {
        double d1 = 1.0, d2 = 1.0;  // diag(Sigma)/s2, diag(Sigma^2)/s2^2
        for (std::size_t j = 0; j < r; ++j) {
          const double ei2 = e(j, i) * e(j, i);
          const double h = sp->spikes[j];
          d1 += h * ei2;
          d2 += (2.0 * h + h * h) * ei2;
        }
        d1 *= s2;
        d2 *= s2 * s2;
        h11.add(d1 * d1);
        h12.add(d1 * d2);
        h22.add(d2 * d2);
      }
      t.had11 = h11.value();
      t.had12 = h12.value();
      t.had22 = h22.value();
    }
    return t;
  }

  const auto* dn = spec.as_dense();
  detail::require_psd(dn->sigma);
  const Matrix& s = dn->sigma;
  const Matrix s2m = matmul(s, s);
  SigmaTraces t;
  t.n = n;
  NeumaierSum a1, a2, a3, a4, h11, h12, h22;
  for (std::size_t i = 0; i < n; ++i) {
    a1.add(s(i, i));
    h11.add(s(i, i) * s(i, i));
    h12.add(s(i, i) * s2m(i, i));
    h22.add(s2m(i, i) * s2m(i, i));
    for (std::size_t j = 0; j < n; ++j) {
      a2.add(s(i, j) * s(i, j));
      a3.add(s(i, j) * s2m(i, j));
      a4.add(s2m(i, j) * s2m(i, j));
    }
  }
  t.tr1 = a1.value();
  t.tr2 = a2.value();
  t.tr3 = a3.value();
  t.tr4 = a4.value();
  t.had11 = h11.value();
  t.had12 = h12.value();
  t.had22 = h22.value();
  return t;
}

// Finite-n proxies for the spectral limits: (tr Sigma / n, tr Sigma^2 / n,
// n^{-1} sum_i Sigma_ii^2).
inline std::array<double, 3> eta_limits(const CovarianceSpec& spec, std::size_t n) {
  const SigmaTraces t = sigma_traces(spec, n);
  return {t.tr1 / double(n), t.tr2 / double(n), t.had11 / double(n)};
}

// Moments of the empirical spectral distribution: theta_i = tr(Sigma^i) / n.
inline std::array<double, 4> theta_moments(const CovarianceSpec& spec, std::size_t n) {
  const SigmaTraces t = sigma_traces(spec, n);
  const double dn = double(n);
  return {t.tr1 / dn, t.tr2 / dn, t.tr3 / dn, t.tr4 / dn};
}

// First two moments of the generalized Marcenko-Pastur law F^{c,H} with
// population moments theta: standard identities
//   m1 = theta_1,   m2 = theta_2 + c * theta_1^2.
inline std::array<double, 2> mp_moments(const std::array<double, 4>& theta, double c) {
  if (!(c > 0.0)) throw DomainError("mp_moments: aspect ratio c must be positive");
  if (!(theta[0] > 0.0)) throw DomainError("mp_moments: theta_1 must be positive");
  return {theta[0], theta[1] + c * theta[0] * theta[0]};
}

// Bundle used by the general-covariance formulas and the CLI.
struct MomentSet {
  std::array<double, 4> theta{};     // ESD moments of Sigma
  std::array<double, 3> eta{};       // trace limits
  std::array<double, 2> vartheta{};  // MP moments of F^{c,H}
  double c = 0.0;                    // aspect ratio n/T
};

inline MomentSet make_moment_set(const CovarianceSpec& spec, std::size_t n, std::size_t T) {
  MomentSet m;
  m.theta = theta_moments(spec, n);
  m.eta = eta_limits(spec, n);
  m.c = double(n) / double(T);
  m.vartheta = mp_moments(m.theta, m.c);
  return m;
}

}  // namespace panelsphere
