#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nowcast/explain/attribution.hpp"

namespace nowcast {

enum class IgBaseline { zeros, window_median, preshock_mean };

inline std::string to_string(IgBaseline b) {
  switch (b) {
    case IgBaseline::zeros: return "zeros";
    case IgBaseline::window_median: return "window_median";
    case IgBaseline::preshock_mean: return "preshock_mean";
  }
  return "zeros";
}

/// Reference input for the gradient path. The all-zeros baseline is allowed
/// but flagged in metadata as not economically interpretable; the median and
/// pre-shock mean baselines are taken per feature over the training window.
inline Vec ig_baseline(const DesignMatrix& d, IgBaseline kind, std::size_t preshock_rows = 0) {
  const std::size_t p = d.n_features();
  switch (kind) {
    case IgBaseline::zeros: return Vec(p, 0.0);
    case IgBaseline::window_median: {
      Vec out(p);
      for (std::size_t j = 0; j < p; ++j) out[j] = median(d.X.col(j));
      return out;
    }
    case IgBaseline::preshock_mean: {
      if (preshock_rows == 0 || preshock_rows > d.n_rows())
        throw ValidationError("ig baseline: preshock_mean needs a row count in [1, n]");
      Vec out(p, 0.0);
      for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < preshock_rows; ++i) out[j] += d.X(i, j);
        out[j] /= static_cast<double>(preshock_rows);
      }
      return out;
    }
  }
  return Vec(p, 0.0);
}

/// Path attribution for differentiable models: integrate the gradient along
/// the straight line from the baseline to the input (midpoint Riemann rule).
/// For sequence models the per-step attributions are summed per feature; the
/// baseline feature vector is replicated across steps. The completeness
/// residual |sum - (f(x) - f(baseline))| is recorded in metadata.
inline AttributionVector integrated_gradients(const FittedModel& m, const DesignMatrix& d,
                                              const Vec& baseline, int steps,
                                              const std::string& baseline_label = "explicit") {
  if (steps < 16) throw ValidationError("integrated gradients: need at least 16 steps");
  const std::size_t p = m.feature_names.size();
  if (baseline.size() != p) throw ValidationError("integrated gradients: baseline width mismatch");

  AttributionVector a;
  a.origin = d.origin;
  a.model_id = m.spec.id();
  a.method = AttributionMethod::integrated_gradients;
  a.features = m.feature_names;
  a.values.assign(p, 0.0);

  double fx = 0.0, fb = 0.0;
  if (m.spec.family == Family::mlp) {
    const auto& mlp = std::get<MlpModel>(m.payload);
    const Vec& x = d.x_now;
    if (x.size() != p) throw ValidationError("integrated gradients: feature count mismatch");
    Vec avg_grad(p, 0.0);
    for (int s = 0; s < steps; ++s) {
      const double t = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
      Vec point(p);
      for (std::size_t j = 0; j < p; ++j) point[j] = baseline[j] + t * (x[j] - baseline[j]);
      Vec g = mlp.grad_input(point);
      for (std::size_t j = 0; j < p; ++j) avg_grad[j] += g[j] / static_cast<double>(steps);
    }
    for (std::size_t j = 0; j < p; ++j) a.values[j] = (x[j] - baseline[j]) * avg_grad[j];
    fx = mlp.predict(x);
    fb = mlp.predict(baseline);
  } else if (m.spec.family == Family::gru) {
    const auto& gru = std::get<GruModel>(m.payload);
    std::vector<Vec> seq = nowcast_sequence(d, gru.seq_len);
    std::vector<Vec> base_seq(seq.size(), baseline);
    const std::size_t L = seq.size();
    Matrix avg_grad(L, p, 0.0);
    for (int s = 0; s < steps; ++s) {
      const double t = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
      std::vector<Vec> point(L, Vec(p));
      for (std::size_t step = 0; step < L; ++step)
        for (std::size_t j = 0; j < p; ++j)
          point[step][j] = baseline[j] + t * (seq[step][j] - baseline[j]);
      std::vector<Vec> g = gru.grad_input(point);
      for (std::size_t step = 0; step < L; ++step)
        for (std::size_t j = 0; j < p; ++j)
          avg_grad(step, j) += g[step][j] / static_cast<double>(steps);
    }
    for (std::size_t step = 0; step < L; ++step)
      for (std::size_t j = 0; j < p; ++j)
        a.values[j] += (seq[step][j] - baseline[j]) * avg_grad(step, j);
    fx = gru.predict_sequence(seq);
    fb = gru.predict_sequence(base_seq);
    a.metadata["sequence_steps"] = std::to_string(L);
  } else {
    throw ValidationError("integrated gradients: family " + to_string(m.spec.family) +
                          " is not differentiable end to end");
  }

  a.base_value = fb;
  double total = 0.0;
  for (double v : a.values) total += v;
  const double delta = fx - fb;
  a.metadata["steps"] = std::to_string(steps);
  a.metadata["rule"] = "midpoint";
  a.metadata["baseline"] = baseline_label;
  a.metadata["completeness_residual"] =
      format_double(std::abs(total - delta) / std::max(1.0, std::abs(delta)));
  return a;
}

inline AttributionVector integrated_gradients(const FittedModel& m, const DesignMatrix& d,
                                              IgBaseline kind, int steps,
                                              std::size_t preshock_rows = 0) {
  Vec baseline = ig_baseline(d, kind, preshock_rows);
  std::string label = to_string(kind);
  if (kind == IgBaseline::zeros) label += " (not economically interpretable)";
  if (kind == IgBaseline::preshock_mean) label += "[" + std::to_string(preshock_rows) + " rows]";
  return integrated_gradients(m, d, baseline, steps, label);
}

}  // namespace nowcast
