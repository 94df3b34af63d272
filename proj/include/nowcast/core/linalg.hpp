#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "nowcast/core/errors.hpp"

namespace nowcast {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  [[nodiscard]] std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  [[nodiscard]] Vec col(std::size_t j) const {
    Vec out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  void set_row(std::size_t i, std::span<const double> v) {
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }

  [[nodiscard]] const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec matvec(const Matrix& a, std::span<const double> x) {
  Vec y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

// X^T v
inline Vec tmatvec(const Matrix& x, std::span<const double> v) {
  Vec y(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) y[j] += r[j] * v[i];
  }
  return y;
}

// X^T X
inline Matrix gram(const Matrix& x) {
  Matrix g(x.cols(), x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t a = 0; a < x.cols(); ++a)
      for (std::size_t b = a; b < x.cols(); ++b) g(a, b) += r[a] * r[b];
  }
  for (std::size_t a = 0; a < x.cols(); ++a)
    for (std::size_t b = 0; b < a; ++b) g(a, b) = g(b, a);
  return g;
}

/// Solve A x = b for symmetric positive definite A via Cholesky.
/// Throws FitError when A is not (numerically) SPD.
inline Vec cholesky_solve(Matrix a, Vec b) {
  const std::size_t n = a.rows();
  if (n != a.cols() || b.size() != n) throw ValidationError("cholesky_solve: shape mismatch");
  // in-place lower-triangular factor
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw FitError("singular or indefinite system (rank-deficient design)");
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
    b[i] = s / a(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a(k, ii) * b[k];
    b[ii] = s / a(ii, ii);
  }
  return b;
}

/// Solve a general square system by Gaussian elimination with partial
/// pivoting. Throws FitError on (numerical) singularity.
inline Vec solve_linear(Matrix a, Vec b) {
  const std::size_t n = a.rows();
  if (n != a.cols() || b.size() != n) throw ValidationError("solve_linear: shape mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) < 1e-12)
      throw FitError("singular or indefinite system (rank-deficient design)");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(piv, c), a(col, c));
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t c = ii + 1; c < n; ++c) s -= a(ii, c) * b[c];
    b[ii] = s / a(ii, ii);
  }
  return b;
}

struct EigenSym {
  Vec values;      // descending
  Matrix vectors;  // columns are eigenvectors, matching values order
};

/// Cyclic Jacobi eigendecomposition for symmetric matrices. Deterministic
/// sweep order; adequate for the panel sizes this library works at.
inline EigenSym jacobi_eigh(Matrix a, int max_sweeps = 64) {
  const std::size_t n = a.rows();
  if (n != a.cols()) throw ValidationError("jacobi_eigh: matrix not square");
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
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

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vec diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });

  EigenSym out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Population variance (divide by N).
inline double variance_population(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

/// Empirical quantile with linear interpolation between order statistics
/// (R type 7: h = (n-1)p). Input need not be sorted.
inline double quantile_linear(Vec v, double p) {
  if (v.empty()) throw ValidationError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  if (p <= 0.0) return v.front();
  if (p >= 1.0) return v.back();
  const double h = static_cast<double>(v.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

/// Median of a sample (quantile_linear at 0.5).
inline double median(Vec v) { return quantile_linear(std::move(v), 0.5); }

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace nowcast
