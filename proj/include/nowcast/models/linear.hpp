#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nowcast/core/errors.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/models/spec.hpp"

namespace nowcast {

inline double soft_threshold(double z, double gamma) {
  if (gamma < 0.0) throw ValidationError("soft_threshold: gamma must be >= 0");
  const double mag = std::abs(z) - gamma;
  if (mag <= 0.0) return 0.0;
  return z > 0.0 ? mag : -mag;
}

/// Random walk: the h-step forecast is the last target value, plus h times
/// the mean first difference when drift is on.
struct RwModel {
  double last = 0.0;
  double drift = 0.0;
};

inline RwModel fit_rw(const Vec& y, bool with_drift) {
  if (y.empty()) throw ValidationError("rw fit on empty target");
  RwModel m;
  m.last = y.back();
  if (with_drift && y.size() >= 2) {
    double s = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) s += y[i] - y[i - 1];
    m.drift = s / static_cast<double>(y.size() - 1);
  }
  return m;
}

inline double predict_rw(const RwModel& m, int steps) {
  return m.last + static_cast<double>(steps) * m.drift;
}

/// AR(p) by OLS on the lag matrix; forecasts iterate the recursion.
struct ArModel {
  Vec phi;             // lag coefficients, phi[0] on y_{t-1}
  double intercept = 0.0;
  Vec recent;          // last p observed values, most recent first
};

inline ArModel fit_ar(const Vec& y, int p) {
  const std::size_t n = y.size();
  if (p < 1) throw ValidationError("ar: lag order must be >= 1");
  if (static_cast<std::size_t>(p) >= n)
    throw ValidationError("ar: lag order " + std::to_string(p) + " needs a window longer than " +
                          std::to_string(p));
  const std::size_t rows = n - static_cast<std::size_t>(p);
  Matrix x(rows, static_cast<std::size_t>(p) + 1);
  Vec b(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    x(i, 0) = 1.0;
    for (int j = 0; j < p; ++j) x(i, static_cast<std::size_t>(j) + 1) = y[i + static_cast<std::size_t>(p - 1 - j)];
    b[i] = y[i + static_cast<std::size_t>(p)];
  }
  Vec coef = cholesky_solve(gram(x), tmatvec(x, b));
  ArModel m;
  m.intercept = coef[0];
  m.phi.assign(coef.begin() + 1, coef.end());
  m.recent.resize(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) m.recent[static_cast<std::size_t>(j)] = y[n - 1 - static_cast<std::size_t>(j)];
  return m;
}

inline double predict_ar(const ArModel& m, int steps) {
  Vec state = m.recent;
  double next = state.empty() ? m.intercept : state[0];
  for (int s = 0; s < steps; ++s) {
    next = m.intercept;
    for (std::size_t j = 0; j < m.phi.size(); ++j) next += m.phi[j] * state[j];
    for (std::size_t j = state.size(); j-- > 1;) state[j] = state[j - 1];
    state[0] = next;
  }
  return next;
}

/// Shared payload of every model with a coefficient representation.
struct LinearModel {
  Vec beta;
  double intercept = 0.0;
};

inline double predict_linear(const LinearModel& m, std::span<const double> x) {
  if (x.size() != m.beta.size()) throw ValidationError("predict: feature count mismatch");
  return m.intercept + dot(m.beta, x);
}

namespace detail {

struct Centered {
  Matrix xc;
  Vec yc;
  Vec x_mean;
  double y_mean = 0.0;
};

inline Centered center(const Matrix& x, const Vec& y) {
  Centered c;
  c.xc = x;
  c.yc = y;
  c.y_mean = mean(y);
  for (auto& v : c.yc) v -= c.y_mean;
  c.x_mean.resize(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    c.x_mean[j] = mean(x.col(j));
    for (std::size_t i = 0; i < x.rows(); ++i) c.xc(i, j) -= c.x_mean[j];
  }
  return c;
}

inline double uncenter_intercept(const Centered& c, const Vec& beta) {
  return c.y_mean - dot(c.x_mean, beta);
}

}  // namespace detail

/// OLS via the normal equations. Requires full column rank (n > p).
inline LinearModel fit_ols(const Matrix& x, const Vec& y) {
  if (x.rows() <= x.cols())
    throw FitError("singular or indefinite system (rank-deficient design)");
  auto c = detail::center(x, y);
  Vec beta = cholesky_solve(gram(c.xc), tmatvec(c.xc, c.yc));
  return LinearModel{beta, detail::uncenter_intercept(c, beta)};
}

/// Ridge closed form: (Xc'Xc + n lambda I) beta = Xc'yc, intercept unpenalized.
/// The n scaling matches the elastic-net objective (1/2n)RSS + lambda penalty.
inline LinearModel fit_ridge(const Matrix& x, const Vec& y, double lambda) {
  if (lambda < 0.0) throw ValidationError("ridge: lambda must be >= 0");
  auto c = detail::center(x, y);
  Matrix g = gram(c.xc);
  const double ridge = lambda * static_cast<double>(x.rows());
  for (std::size_t j = 0; j < g.cols(); ++j) g(j, j) += ridge;
  Vec beta = cholesky_solve(g, tmatvec(c.xc, c.yc));
  return LinearModel{beta, detail::uncenter_intercept(c, beta)};
}

struct CoordinateDescentResult {
  LinearModel model;
  int sweeps = 0;
  double kkt_gap = 0.0;
};

/// Largest violation of the elastic-net stationarity conditions at (beta, b0):
/// zero coefficients need |x_j'r/n| <= lambda*alpha, active ones need
/// x_j'r/n - lambda(1-alpha) beta_j = lambda*alpha*sign(beta_j).
inline double elastic_net_kkt_gap(const Matrix& x, const Vec& y, const LinearModel& m,
                                  double lambda, double alpha) {
  const std::size_t n = x.rows();
  Vec r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - m.intercept - dot(x.row(i), m.beta);
  double gap = std::abs(mean(r));  // intercept stationarity
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const double g = dot(x.col(j), r) / static_cast<double>(n);
    if (m.beta[j] == 0.0)
      gap = std::max(gap, std::max(0.0, std::abs(g) - lambda * alpha));
    else
      gap = std::max(gap, std::abs(g - lambda * (1.0 - alpha) * m.beta[j] -
                                   lambda * alpha * (m.beta[j] > 0 ? 1.0 : -1.0)));
  }
  return gap;
}

/// Cyclic coordinate descent for (1/2n)||y - b0 - X beta||^2
///   + lambda (alpha ||beta||_1 + (1-alpha) ||beta||_2^2 / 2).
/// alpha = 1 is the lasso, alpha = 0 the ridge objective.
inline CoordinateDescentResult fit_elastic_net(const Matrix& x, const Vec& y, double lambda,
                                               double alpha, double tol = 1e-7,
                                               int max_sweeps = 10000) {
  if (lambda < 0.0) throw ValidationError("elastic_net: lambda must be >= 0");
  if (alpha < 0.0 || alpha > 1.0) throw ValidationError("elastic_net: alpha must lie in [0,1]");
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (n == 0) throw ValidationError("elastic_net: empty design");
  detail::Centered c = detail::center(x, y);
  std::vector<Vec> cols(p);
  Vec col_sq(p);
  for (std::size_t j = 0; j < p; ++j) {
    cols[j] = c.xc.col(j);
    col_sq[j] = dot(cols[j], cols[j]) / static_cast<double>(n);
  }
  LinearModel m;
  m.beta.assign(p, 0.0);
  Vec r = c.yc;
  CoordinateDescentResult out;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (col_sq[j] == 0.0) continue;  // constant column: centered away, stays at zero
      const double old = m.beta[j];
      const double z = dot(cols[j], r) / static_cast<double>(n) + col_sq[j] * old;
      const double updated = soft_threshold(z, lambda * alpha) /
                             (col_sq[j] + lambda * (1.0 - alpha));
      if (updated != old) {
        const double d = updated - old;
        for (std::size_t i = 0; i < n; ++i) r[i] -= d * cols[j][i];
        m.beta[j] = updated;
        max_delta = std::max(max_delta, std::abs(d));
      }
    }
    out.sweeps = sweep + 1;
    if (max_delta < tol) {
      m.intercept = detail::uncenter_intercept(c, m.beta);
      out.model = m;
      out.kkt_gap = elastic_net_kkt_gap(x, y, m, lambda, alpha);
      return out;
    }
  }
  m.intercept = detail::uncenter_intercept(c, m.beta);
  throw FitError("coordinate descent did not converge after " + std::to_string(max_sweeps) +
                 " sweeps; stationarity gap " +
                 format_double(elastic_net_kkt_gap(x, y, m, lambda, alpha)));
}

inline CoordinateDescentResult fit_lasso(const Matrix& x, const Vec& y, double lambda,
                                         double tol = 1e-7, int max_sweeps = 10000) {
  return fit_elastic_net(x, y, lambda, 1.0, tol, max_sweeps);
}

}  // namespace nowcast
