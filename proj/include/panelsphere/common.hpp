#pragma once

// Shared plumbing: error types, compensated summation, a small dense matrix,
// and the bits of linear algebra the library needs (symmetric Jacobi eigen,
// Cholesky solve). Everything is value-semantic and thread-safe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace panelsphere {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad raw inputs: non-finite entries, impossible dimensions.
struct InputError : Error {
  using Error::Error;
};

// Mathematically inadmissible request: non-PSD covariance, zero trace,
// inapplicable formula branch.
struct DomainError : Error {
  using Error::Error;
};

// Within-estimation failures (singular / ill-conditioned normal equations).
struct EstimationError : Error {
  using Error::Error;
};

// Config files, CLI parameter sets.
struct ConfigError : Error {
  using Error::Error;
};

// CSV parsing.
struct ParseError : Error {
  using Error::Error;
};

// Diagnostics preconditions (e.g. too few samples).
struct DiagnosticError : Error {
  using Error::Error;
};

// Kahan-Babuska-Neumaier compensated accumulator. Long reductions (tr S^2 sums
// T^2 terms) go through this so digits survive at T ~ 10^3-10^4.
class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double neumaier_total(std::span<const double> xs) {
  NeumaierSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

// Row-major dense matrix. Deliberately minimal: the library never needs
// general matrix algebra, just storage plus a few symmetric kernels below.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// C = A * B for symmetric use-cases; plain triple loop, fine at the sizes the
// library materializes dense matrices (n <= ~500 in oracles).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InputError("matmul: shape mismatch");
  Matrix c(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      double* crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// Cyclic Jacobi for symmetric matrices. Returns eigenvalues (ascending) and,
// if evecs != nullptr, the orthonormal eigenvectors as columns of *evecs.
inline std::vector<double> jacobi_eigen_sym(const Matrix& a_in, Matrix* evecs = nullptr) {
  const std::size_t n = a_in.rows();
  if (a_in.cols() != n) throw InputError("jacobi_eigen_sym: matrix not square");
  Matrix a = a_in;
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto offdiag = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
  const double tol = (scale > 0 ? scale : 1.0) * 1e-14;

  for (int sweep = 0; sweep < 100 && offdiag() > tol * tol * double(n * n); ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol * 1e-3) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<double> evals(n);
  for (std::size_t i = 0; i < n; ++i) evals[i] = a(i, i);
  // sort ascending, permuting vectors alongside
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return evals[x] < evals[y]; });
  std::vector<double> sorted(n);
  Matrix vs(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = evals[order[i]];
    for (std::size_t k = 0; k < n; ++k) vs(k, i) = v(k, order[i]);
  }
  if (evecs) *evecs = std::move(vs);
  return sorted;
}

// In-place Cholesky solve of a small SPD system (k <= 16 in this library).
inline std::vector<double> cholesky_solve(Matrix a, std::vector<double> b) {
  const std::size_t k = a.rows();
  if (a.cols() != k || b.size() != k) throw InputError("cholesky_solve: shape mismatch");
  for (std::size_t j = 0; j < k; ++j) {
    double d = a(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= a(j, p) * a(j, p);
    if (!(d > 0.0)) throw EstimationError("cholesky_solve: matrix not positive definite");
    a(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = a(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= a(i, p) * a(j, p);
      a(i, j) = s / a(j, j);
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    double s = b[i];
    for (std::size_t p = 0; p < i; ++p) s -= a(i, p) * b[p];
    b[i] = s / a(i, i);
  }
  for (std::size_t ii = k; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t p = ii + 1; p < k; ++p) s -= a(p, ii) * b[p];
    b[ii] = s / a(ii, ii);
  }
  return b;
}

}  // namespace panelsphere
