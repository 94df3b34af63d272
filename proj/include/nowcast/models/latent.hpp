#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nowcast/core/errors.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/models/linear.hpp"

namespace nowcast {

/// Principal-component regression: OLS of y on the k leading principal
/// component scores of the centered predictors, exposed back in
/// original-feature space as a LinearModel.
struct PcrModel {
  LinearModel coef;        // original-feature representation
  Matrix loadings;         // p x k, columns are components (sign-fixed)
  Vec gamma;               // k score-space coefficients
  Vec eigenvalues;         // all p eigenvalues, descending
  Vec explained_fraction;  // per selected component, of total predictor variance
};

namespace detail {

inline void fix_sign(Matrix& v, std::size_t col) {
  std::size_t arg = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const double a = std::abs(v(i, col));
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (v(arg, col) < 0.0)
    for (std::size_t i = 0; i < v.rows(); ++i) v(i, col) = -v(i, col);
}

}  // namespace detail

inline PcrModel fit_pcr(const Matrix& x, const Vec& y, int k) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (k < 1) throw ValidationError("pcr: k must be >= 1");
  if (static_cast<std::size_t>(k) > std::min(n > 0 ? n - 1 : 0, p))
    throw ValidationError("pcr: k exceeds the rank bound min(rows-1, cols)");
  auto c = detail::center(x, y);
  auto eig = jacobi_eigh(gram(c.xc));
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  if (!(eig.values[static_cast<std::size_t>(k) - 1] > total * 1e-12))
    throw FitError("pcr: k exceeds the numerical rank of the design");
  PcrModel m;
  m.eigenvalues = eig.values;
  m.loadings = Matrix(p, static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    detail::fix_sign(eig.vectors, static_cast<std::size_t>(j));
    for (std::size_t i = 0; i < p; ++i) m.loadings(i, static_cast<std::size_t>(j)) = eig.vectors(i, static_cast<std::size_t>(j));
    m.explained_fraction.push_back(total > 0.0 ? eig.values[static_cast<std::size_t>(j)] / total : 0.0);
  }
  // scores = Xc V_k; centered, so OLS through the origin
  Matrix scores(n, static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      scores(i, static_cast<std::size_t>(j)) = dot(c.xc.row(i), m.loadings.col(static_cast<std::size_t>(j)));
  m.gamma = cholesky_solve(gram(scores), tmatvec(scores, c.yc));
  m.coef.beta = matvec(m.loadings, m.gamma);
  m.coef.intercept = detail::uncenter_intercept(c, m.coef.beta);
  return m;
}

/// Partial least squares (PLS1, NIPALS): components maximize covariance with
/// the target. Stores per-component weights and explained target variation so
/// VIP scores can be computed downstream.
struct PlsrModel {
  LinearModel coef;
  Matrix weights;    // p x k, unit-norm w_k
  Matrix loadings;   // p x k, p_k
  Vec q;             // k target loadings
  Vec score_norms;   // t_k' t_k
  Vec ssy;           // explained target variation q_k^2 t_k' t_k
};

inline PlsrModel fit_plsr(const Matrix& x, const Vec& y, int k) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (k < 1) throw ValidationError("plsr: k must be >= 1");
  if (static_cast<std::size_t>(k) > std::min(n > 0 ? n - 1 : 0, p))
    throw ValidationError("plsr: k exceeds the rank bound min(rows-1, cols)");
  auto c = detail::center(x, y);
  Matrix e = c.xc;
  Vec f = c.yc;
  PlsrModel m;
  m.weights = Matrix(p, static_cast<std::size_t>(k));
  m.loadings = Matrix(p, static_cast<std::size_t>(k));
  for (int comp = 0; comp < k; ++comp) {
    Vec w = tmatvec(e, f);
    const double wn = std::sqrt(dot(w, w));
    if (!(wn > 1e-12))
      throw FitError("plsr: component " + std::to_string(comp + 1) +
                     " has no covariance direction left (reduce k)");
    for (auto& v : w) v /= wn;
    Vec t = matvec(e, w);
    const double tt = dot(t, t);
    if (!(tt > 1e-12))
      throw FitError("plsr: degenerate score vector at component " + std::to_string(comp + 1));
    Vec pl = tmatvec(e, t);
    for (auto& v : pl) v /= tt;
    const double qk = dot(f, t) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = e.row(i);
      for (std::size_t j = 0; j < p; ++j) row[j] -= t[i] * pl[j];
      f[i] -= qk * t[i];
    }
    for (std::size_t j = 0; j < p; ++j) {
      m.weights(j, static_cast<std::size_t>(comp)) = w[j];
      m.loadings(j, static_cast<std::size_t>(comp)) = pl[j];
    }
    m.q.push_back(qk);
    m.score_norms.push_back(tt);
    m.ssy.push_back(qk * qk * tt);
  }
  // beta = W (P'W)^{-1} q
  Matrix pw(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      pw(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) =
          dot(m.loadings.col(static_cast<std::size_t>(a)), m.weights.col(static_cast<std::size_t>(b)));
  Vec gamma = solve_linear(pw, m.q);
  m.coef.beta = matvec(m.weights, gamma);
  m.coef.intercept = detail::uncenter_intercept(c, m.coef.beta);
  return m;
}

/// Variable importance in projection. With unit-norm weights,
/// VIP_j = sqrt(p * sum_k ssy_k w_jk^2 / sum_k ssy_k); sum_j VIP_j^2 = p.
inline Vec vip_scores(const PlsrModel& m) {
  const std::size_t p = m.weights.rows();
  const std::size_t k = m.weights.cols();
  double total = 0.0;
  for (double s : m.ssy) total += s;
  Vec out(p, 0.0);
  if (!(total > 0.0)) return out;
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) acc += m.ssy[c] * m.weights(j, c) * m.weights(j, c);
    out[j] = std::sqrt(static_cast<double>(p) * acc / total);
  }
  return out;
}

}  // namespace nowcast
