#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nowcast/core/errors.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/core/rng.hpp"

namespace nowcast {

enum class Activation { tanh_act, identity };

namespace detail {

inline double act(double a, Activation kind) {
  return kind == Activation::tanh_act ? std::tanh(a) : a;
}

inline double act_deriv_from_pre(double a, Activation kind) {
  if (kind == Activation::identity) return 1.0;
  const double t = std::tanh(a);
  return 1.0 - t * t;
}

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * rng.next_gaussian();
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MLP: one hidden layer, full-batch gradient descent, analytic gradients.

struct MlpGradients {
  Matrix w1;
  Vec b1;
  Vec w2;
  double b2 = 0.0;
};

struct MlpModel {
  Matrix w1;  // hidden x inputs
  Vec b1;
  Vec w2;  // hidden
  double b2 = 0.0;
  Activation activation = Activation::tanh_act;
  double final_loss = 0.0;

  [[nodiscard]] std::size_t inputs() const { return w1.cols(); }
  [[nodiscard]] std::size_t hidden() const { return w1.rows(); }

  [[nodiscard]] double predict(std::span<const double> x) const {
    if (x.size() != inputs()) throw ValidationError("mlp predict: feature count mismatch");
    double out = b2;
    for (std::size_t h = 0; h < hidden(); ++h)
      out += w2[h] * detail::act(dot(w1.row(h), x) + b1[h], activation);
    return out;
  }

  /// dy/dx at x (used by the gradient-path attribution method).
  [[nodiscard]] Vec grad_input(std::span<const double> x) const {
    Vec g(inputs(), 0.0);
    for (std::size_t h = 0; h < hidden(); ++h) {
      const double d = w2[h] * detail::act_deriv_from_pre(dot(w1.row(h), x) + b1[h], activation);
      const auto row = w1.row(h);
      for (std::size_t j = 0; j < inputs(); ++j) g[j] += d * row[j];
    }
    return g;
  }

  /// Mean squared error over a batch, halved: (1/2n) sum (yhat - y)^2.
  [[nodiscard]] double loss(const Matrix& x, const Vec& y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double e = predict(x.row(i)) - y[i];
      s += e * e;
    }
    return s / (2.0 * static_cast<double>(x.rows()));
  }

  /// Full-batch analytic gradients of loss(); dropout_mask scales hidden
  /// activations when supplied (inverted dropout, training only).
  [[nodiscard]] MlpGradients gradients(const Matrix& x, const Vec& y,
                                       const Vec* dropout_mask = nullptr) const {
    const std::size_t n = x.rows(), p = inputs(), H = hidden();
    MlpGradients g;
    g.w1 = Matrix(H, p, 0.0);
    g.b1.assign(H, 0.0);
    g.w2.assign(H, 0.0);
    Vec pre(H), hid(H);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = x.row(i);
      double yhat = b2;
      for (std::size_t h = 0; h < H; ++h) {
        pre[h] = dot(w1.row(h), xi) + b1[h];
        hid[h] = detail::act(pre[h], activation);
        if (dropout_mask) hid[h] *= (*dropout_mask)[h];
        yhat += w2[h] * hid[h];
      }
      const double dy = (yhat - y[i]) / static_cast<double>(n);
      g.b2 += dy;
      for (std::size_t h = 0; h < H; ++h) {
        g.w2[h] += dy * hid[h];
        double da = dy * w2[h] * detail::act_deriv_from_pre(pre[h], activation);
        if (dropout_mask) da *= (*dropout_mask)[h];
        g.b1[h] += da;
        auto grow = g.w1.row(h);
        for (std::size_t j = 0; j < p; ++j) grow[j] += da * xi[j];
      }
    }
    return g;
  }
};

inline constexpr std::uint64_t kMlpInitStream = 0x4d4c5049u;
inline constexpr std::uint64_t kMlpDropStream = 0x4d4c5044u;

inline MlpModel fit_mlp(const Matrix& x, const Vec& y, int hidden, int epochs, double step,
                        std::uint64_t seed, Activation activation = Activation::tanh_act,
                        double dropout = 0.0) {
  if (x.rows() == 0) throw ValidationError("mlp fit on empty design");
  if (hidden < 1 || epochs < 1 || !(step > 0.0))
    throw ValidationError("mlp: hidden >= 1, epochs >= 1, step > 0 required");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("mlp: dropout must lie in [0,1)");
  const std::size_t p = x.cols(), H = static_cast<std::size_t>(hidden);
  Rng init = Rng::keyed(seed, {kMlpInitStream});
  MlpModel m;
  m.activation = activation;
  m.w1 = detail::gaussian_matrix(H, p, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(p, 1))), init);
  m.b1.assign(H, 0.0);
  m.w2.resize(H);
  for (auto& v : m.w2) v = init.next_gaussian() / std::sqrt(static_cast<double>(H));
  m.b2 = 0.0;
  for (int e = 0; e < epochs; ++e) {
    Vec mask;
    const Vec* mask_ptr = nullptr;
    if (dropout > 0.0) {
      Rng drop = Rng::keyed(seed, {kMlpDropStream, static_cast<std::uint64_t>(e)});
      mask.resize(H);
      for (auto& v : mask) v = drop.next_double() < dropout ? 0.0 : 1.0 / (1.0 - dropout);
      mask_ptr = &mask;
    }
    MlpGradients g = m.gradients(x, y, mask_ptr);
    for (std::size_t h = 0; h < H; ++h) {
      auto wrow = m.w1.row(h);
      const auto grow = g.w1.row(h);
      for (std::size_t j = 0; j < p; ++j) wrow[j] -= step * grow[j];
      m.b1[h] -= step * g.b1[h];
      m.w2[h] -= step * g.w2[h];
    }
    m.b2 -= step * g.b2;
    const double l = m.loss(x, y);
    if (!std::isfinite(l))
      throw FitError("mlp training diverged at epoch " + std::to_string(e + 1));
    m.final_loss = l;
  }
  return m;
}

// ---------------------------------------------------------------------------
// GRU: update/reset gating over fixed-length sequences of design rows,
// trained full-batch with backpropagation truncated at the sequence length.
//
//   z_t = sigmoid(Wz s_t + Uz h_{t-1} + bz)
//   r_t = sigmoid(Wr s_t + Ur h_{t-1} + br)
//   c_t = tanh(Wh s_t + Uh (r_t . h_{t-1}) + bh)
//   h_t = (1 - z_t) . h_{t-1} + z_t . c_t          y = wo . h_L + bo
//
// With z_t saturated at 1 and r_t at 0, h_t = tanh(Wh s_t + bh): the state
// depends on the current input only.

struct GruModel {
  Matrix wz, wr, wh;  // hidden x inputs
  Matrix uz, ur, uh;  // hidden x hidden
  Vec bz, br, bh;
  Vec wo;
  double bo = 0.0;
  int seq_len = 1;
  double final_loss = 0.0;

  [[nodiscard]] std::size_t inputs() const { return wz.cols(); }
  [[nodiscard]] std::size_t hidden() const { return wz.rows(); }

  struct Trace {
    std::vector<Vec> z, r, c, h;  // per step; h has seq_len+1 entries (h[0] = 0)
    std::vector<Vec> az, ar, ac;  // pre-activations
    double y = 0.0;
  };

  [[nodiscard]] Trace forward(const std::vector<Vec>& seq) const {
    const std::size_t H = hidden();
    Trace tr;
    tr.h.push_back(Vec(H, 0.0));
    for (const auto& s : seq) {
      if (s.size() != inputs()) throw ValidationError("gru: sequence row width mismatch");
      const Vec& hprev = tr.h.back();
      Vec az(H), ar_(H), ac(H), z(H), r(H), c(H), h(H);
      for (std::size_t k = 0; k < H; ++k) {
        az[k] = dot(wz.row(k), s) + dot(uz.row(k), hprev) + bz[k];
        ar_[k] = dot(wr.row(k), s) + dot(ur.row(k), hprev) + br[k];
        z[k] = detail::sigmoid(az[k]);
        r[k] = detail::sigmoid(ar_[k]);
      }
      Vec gated(H);
      for (std::size_t k = 0; k < H; ++k) gated[k] = r[k] * hprev[k];
      for (std::size_t k = 0; k < H; ++k) {
        ac[k] = dot(wh.row(k), s) + dot(uh.row(k), gated) + bh[k];
        c[k] = std::tanh(ac[k]);
        h[k] = (1.0 - z[k]) * hprev[k] + z[k] * c[k];
      }
      tr.az.push_back(std::move(az));
      tr.ar.push_back(std::move(ar_));
      tr.ac.push_back(std::move(ac));
      tr.z.push_back(std::move(z));
      tr.r.push_back(std::move(r));
      tr.c.push_back(std::move(c));
      tr.h.push_back(std::move(h));
    }
    tr.y = bo + dot(wo, tr.h.back());
    return tr;
  }

  [[nodiscard]] double predict_sequence(const std::vector<Vec>& seq) const {
    return forward(seq).y;
  }

  /// dy/ds_t for every step of one sequence (rows = steps).
  [[nodiscard]] std::vector<Vec> grad_input(const std::vector<Vec>& seq) const {
    const std::size_t H = hidden(), p = inputs(), L = seq.size();
    Trace tr = forward(seq);
    std::vector<Vec> gs(L, Vec(p, 0.0));
    Vec dh = wo;  // dy/dh_L
    for (std::size_t t = L; t-- > 0;) {
      const Vec& hprev = tr.h[t];
      Vec dz(H), dc(H), dh_prev(H, 0.0);
      for (std::size_t k = 0; k < H; ++k) {
        dz[k] = dh[k] * (tr.c[t][k] - hprev[k]);
        dc[k] = dh[k] * tr.z[t][k];
        dh_prev[k] = dh[k] * (1.0 - tr.z[t][k]);
      }
      Vec dac(H), daz(H), dar(H);
      for (std::size_t k = 0; k < H; ++k) {
        dac[k] = dc[k] * (1.0 - tr.c[t][k] * tr.c[t][k]);
        daz[k] = dz[k] * tr.z[t][k] * (1.0 - tr.z[t][k]);
      }
      Vec dgated(H, 0.0);  // d(r . hprev)
      for (std::size_t k = 0; k < H; ++k)
        for (std::size_t k2 = 0; k2 < H; ++k2) dgated[k2] += uh(k, k2) * dac[k];
      Vec dr(H);
      for (std::size_t k = 0; k < H; ++k) {
        dr[k] = dgated[k] * hprev[k];
        dh_prev[k] += dgated[k] * tr.r[t][k];
        dar[k] = dr[k] * tr.r[t][k] * (1.0 - tr.r[t][k]);
      }
      for (std::size_t k = 0; k < H; ++k) {
        for (std::size_t j = 0; j < p; ++j)
          gs[t][j] += wz(k, j) * daz[k] + wr(k, j) * dar[k] + wh(k, j) * dac[k];
        for (std::size_t k2 = 0; k2 < H; ++k2)
          dh_prev[k2] += uz(k, k2) * daz[k] + ur(k, k2) * dar[k];
      }
      dh = std::move(dh_prev);
    }
    return gs;
  }
};

struct GruGradients {
  Matrix wz, wr, wh, uz, ur, uh;
  Vec bz, br, bh, wo;
  double bo = 0.0;
};

namespace detail {

/// Backpropagation through one sequence; accumulates parameter gradients
/// scaled by dy (the upstream loss derivative at the sequence output).
inline void gru_backward(const GruModel& m, const std::vector<Vec>& seq,
                         const GruModel::Trace& tr, double dy, GruGradients& g) {
  const std::size_t H = m.hidden(), p = m.inputs(), L = seq.size();
  Vec dh(H);
  for (std::size_t k = 0; k < H; ++k) {
    dh[k] = dy * m.wo[k];
    g.wo[k] += dy * tr.h.back()[k];
  }
  g.bo += dy;
  for (std::size_t t = L; t-- > 0;) {
    const Vec& hprev = tr.h[t];
    Vec dz(H), dc(H), dh_prev(H, 0.0);
    for (std::size_t k = 0; k < H; ++k) {
      dz[k] = dh[k] * (tr.c[t][k] - hprev[k]);
      dc[k] = dh[k] * tr.z[t][k];
      dh_prev[k] = dh[k] * (1.0 - tr.z[t][k]);
    }
    Vec dac(H), daz(H), dar(H);
    for (std::size_t k = 0; k < H; ++k) {
      dac[k] = dc[k] * (1.0 - tr.c[t][k] * tr.c[t][k]);
      daz[k] = dz[k] * tr.z[t][k] * (1.0 - tr.z[t][k]);
    }
    Vec dgated(H, 0.0);
    for (std::size_t k = 0; k < H; ++k)
      for (std::size_t k2 = 0; k2 < H; ++k2) dgated[k2] += m.uh(k, k2) * dac[k];
    Vec dr(H);
    for (std::size_t k = 0; k < H; ++k) {
      dr[k] = dgated[k] * hprev[k];
      dh_prev[k] += dgated[k] * tr.r[t][k];
      dar[k] = dr[k] * tr.r[t][k] * (1.0 - tr.r[t][k]);
    }
    Vec gated(H);
    for (std::size_t k = 0; k < H; ++k) gated[k] = tr.r[t][k] * hprev[k];
    for (std::size_t k = 0; k < H; ++k) {
      for (std::size_t j = 0; j < p; ++j) {
        g.wz(k, j) += daz[k] * seq[t][j];
        g.wr(k, j) += dar[k] * seq[t][j];
        g.wh(k, j) += dac[k] * seq[t][j];
      }
      for (std::size_t k2 = 0; k2 < H; ++k2) {
        g.uz(k, k2) += daz[k] * hprev[k2];
        g.ur(k, k2) += dar[k] * hprev[k2];
        g.uh(k, k2) += dac[k] * gated[k2];
        dh_prev[k2] += m.uz(k, k2) * daz[k] + m.ur(k, k2) * dar[k];
      }
      g.bz[k] += daz[k];
      g.br[k] += dar[k];
      g.bh[k] += dac[k];
    }
    dh = std::move(dh_prev);
  }
}

}  // namespace detail

inline constexpr std::uint64_t kGruInitStream = 0x47525549u;

/// Training samples pair each target y[t] with the sequence of design rows
/// (t - seq_len + 1 .. t); rows never cross the window boundary.
inline GruModel fit_gru(const Matrix& x, const Vec& y, int hidden, int seq_len, int epochs,
                        double step, std::uint64_t seed) {
  const std::size_t n = x.rows(), p = x.cols();
  if (hidden < 1 || epochs < 1 || !(step > 0.0) || seq_len < 1)
    throw ValidationError("gru: hidden >= 1, epochs >= 1, step > 0, seq_len >= 1 required");
  if (n < static_cast<std::size_t>(seq_len))
    throw ValidationError("gru: training window shorter than the sequence length");
  const std::size_t H = static_cast<std::size_t>(hidden);
  Rng init = Rng::keyed(seed, {kGruInitStream});
  GruModel m;
  m.seq_len = seq_len;
  const double sx = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(p, 1)));
  const double sh = 1.0 / std::sqrt(static_cast<double>(H));
  m.wz = detail::gaussian_matrix(H, p, sx, init);
  m.wr = detail::gaussian_matrix(H, p, sx, init);
  m.wh = detail::gaussian_matrix(H, p, sx, init);
  m.uz = detail::gaussian_matrix(H, H, sh, init);
  m.ur = detail::gaussian_matrix(H, H, sh, init);
  m.uh = detail::gaussian_matrix(H, H, sh, init);
  m.bz.assign(H, 0.0);
  m.br.assign(H, 0.0);
  m.bh.assign(H, 0.0);
  m.wo.resize(H);
  for (auto& v : m.wo) v = init.next_gaussian() * sh;
  m.bo = 0.0;

  std::vector<std::vector<Vec>> sequences;
  Vec targets;
  for (std::size_t t = static_cast<std::size_t>(seq_len) - 1; t < n; ++t) {
    std::vector<Vec> seq;
    for (std::size_t s = t + 1 - static_cast<std::size_t>(seq_len); s <= t; ++s) {
      const auto row = x.row(s);
      seq.emplace_back(row.begin(), row.end());
    }
    sequences.push_back(std::move(seq));
    targets.push_back(y[t]);
  }
  const double n_samples = static_cast<double>(sequences.size());

  for (int e = 0; e < epochs; ++e) {
    GruGradients g;
    g.wz = Matrix(H, p, 0.0);
    g.wr = Matrix(H, p, 0.0);
    g.wh = Matrix(H, p, 0.0);
    g.uz = Matrix(H, H, 0.0);
    g.ur = Matrix(H, H, 0.0);
    g.uh = Matrix(H, H, 0.0);
    g.bz.assign(H, 0.0);
    g.br.assign(H, 0.0);
    g.bh.assign(H, 0.0);
    g.wo.assign(H, 0.0);
    g.bo = 0.0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      GruModel::Trace tr = m.forward(sequences[i]);
      detail::gru_backward(m, sequences[i], tr, (tr.y - targets[i]) / n_samples, g);
    }
    auto apply = [&](Matrix& w, const Matrix& gw) {
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) -= step * gw(i, j);
    };
    apply(m.wz, g.wz);
    apply(m.wr, g.wr);
    apply(m.wh, g.wh);
    apply(m.uz, g.uz);
    apply(m.ur, g.ur);
    apply(m.uh, g.uh);
    for (std::size_t k = 0; k < H; ++k) {
      m.bz[k] -= step * g.bz[k];
      m.br[k] -= step * g.br[k];
      m.bh[k] -= step * g.bh[k];
      m.wo[k] -= step * g.wo[k];
    }
    m.bo -= step * g.bo;
    double post = 0.0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const double err = m.predict_sequence(sequences[i]) - targets[i];
      post += err * err;
    }
    post /= 2.0 * n_samples;
    if (!std::isfinite(post))
      throw FitError("gru training diverged at epoch " + std::to_string(e + 1));
    m.final_loss = post;
  }
  return m;
}

}  // namespace nowcast
