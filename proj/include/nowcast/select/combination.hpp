#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nowcast/core/csv.hpp"
#include "nowcast/eval/walkforward.hpp"

namespace nowcast {

enum class WeightScheme { equal, inverse_cumulative, exponential };

inline std::string to_string(WeightScheme s) {
  switch (s) {
    case WeightScheme::equal: return "equal";
    case WeightScheme::inverse_cumulative: return "inverse_cumulative";
    case WeightScheme::exponential: return "exponential";
  }
  return "?";
}

/// A point on the probability simplex over model ids, dated at the origin the
/// weights apply to. Notes record any documented fallback that fired.
struct CombinationWeights {
  WeightScheme scheme = WeightScheme::equal;
  double eta = 0.0;  ///< exponential decay rate; 0 collapses to equal weights
  Date as_of{};
  std::vector<std::string> model_ids;
  Vec weights;
  std::vector<std::string> notes;
};

namespace detail {

/// Cumulative loss per model over origins where every model has a realized
/// loss, counting only origins strictly before `upto`. Restricting to the
/// common sample keeps cumulative losses comparable when some models skipped
/// origins the others scored.
inline Vec cumulative_losses(const LossTable& table, LossKind kind, std::size_t upto) {
  const Matrix& src = kind == LossKind::squared ? table.sqerr : table.abserr;
  const std::size_t m = table.model_ids.size();
  Vec cum(m, 0.0);
  for (std::size_t j = 0; j < std::min(upto, table.origins.size()); ++j) {
    bool all = true;
    for (std::size_t i = 0; i < m && all; ++i) all = std::isfinite(src(i, j));
    if (!all) continue;
    for (std::size_t i = 0; i < m; ++i) cum[i] += src(i, j);
  }
  return cum;
}

inline CombinationWeights weights_from_cumloss(const std::vector<std::string>& ids, const Vec& cum,
                                               WeightScheme scheme, double eta) {
  CombinationWeights w;
  w.scheme = scheme;
  w.eta = scheme == WeightScheme::exponential ? eta : 0.0;
  w.model_ids = ids;
  const std::size_t m = ids.size();
  w.weights.assign(m, 1.0 / static_cast<double>(m));

  if (scheme == WeightScheme::inverse_cumulative) {
    if (*std::min_element(cum.begin(), cum.end()) <= 0.0) {
      w.notes.push_back(
          "inverse_cumulative: cumulative losses not all strictly positive; fell back to equal "
          "weights");
      return w;
    }
    for (std::size_t i = 0; i < m; ++i) w.weights[i] = 1.0 / cum[i];
  } else if (scheme == WeightScheme::exponential) {
    const double shift = *std::min_element(cum.begin(), cum.end());
    for (std::size_t i = 0; i < m; ++i) w.weights[i] = std::exp(-eta * (cum[i] - shift));
  }
  double total = 0.0;
  for (double v : w.weights) total += v;
  for (auto& v : w.weights) v /= total;
  return w;
}

}  // namespace detail

/// Combination weights from the realized losses in the table. The caller
/// passes the loss history available at the decision time; all origins in the
/// table count toward the cumulative losses.
inline CombinationWeights combination_weights(const LossTable& table, WeightScheme scheme,
                                              double eta = 1.0,
                                              LossKind kind = LossKind::squared) {
  if (table.model_ids.empty()) throw ValidationError("combination_weights: loss table is empty");
  if (scheme == WeightScheme::exponential && !(eta >= 0.0 && std::isfinite(eta)))
    throw ValidationError("combination_weights: eta must be finite and non-negative");
  auto w = detail::weights_from_cumloss(
      table.model_ids, detail::cumulative_losses(table, kind, table.origins.size()), scheme, eta);
  if (!table.origins.empty()) w.as_of = table.origins.back();
  return w;
}

/// Weighted arithmetic mean of the member forecasts. Weight and forecast ids
/// must match exactly; the result lies between the member extremes.
inline double combine_forecasts(const std::map<std::string, double>& forecasts,
                                const CombinationWeights& w) {
  if (forecasts.size() != w.model_ids.size())
    throw ValidationError("combine_forecasts: forecast ids do not match weight ids");
  double out = 0.0;
  for (std::size_t i = 0; i < w.model_ids.size(); ++i) {
    auto it = forecasts.find(w.model_ids[i]);
    if (it == forecasts.end())
      throw ValidationError("combine_forecasts: no forecast for weighted model " + w.model_ids[i]);
    out += w.weights[i] * it->second;
  }
  return out;
}

/// Weight evolution across the backtest: the weights at each origin use only
/// losses realized at strictly earlier origins, so the first origin falls back
/// to equal weights. Turnover is the l1 weight change per step.
struct WeightTrajectory {
  std::vector<CombinationWeights> path;
  Vec step_turnover;
  double turnover = 0.0;
};

inline WeightTrajectory weight_trajectory(const LossTable& table, WeightScheme scheme,
                                          double eta = 1.0, LossKind kind = LossKind::squared) {
  if (table.model_ids.empty()) throw ValidationError("weight_trajectory: loss table is empty");
  if (table.origins.size() < 2)
    throw ValidationError("weight_trajectory: needs at least 2 origins with realized losses");
  if (scheme == WeightScheme::exponential && !(eta >= 0.0 && std::isfinite(eta)))
    throw ValidationError("weight_trajectory: eta must be finite and non-negative");

  WeightTrajectory out;
  for (std::size_t k = 0; k < table.origins.size(); ++k) {
    auto w = detail::weights_from_cumloss(table.model_ids,
                                          detail::cumulative_losses(table, kind, k), scheme, eta);
    w.as_of = table.origins[k];
    if (k == 0) w.notes.push_back("no realized losses yet; equal weights by fallback rule");
    out.path.push_back(std::move(w));
  }
  for (std::size_t k = 1; k < out.path.size(); ++k) {
    double step = 0.0;
    for (std::size_t i = 0; i < table.model_ids.size(); ++i)
      step += std::abs(out.path[k].weights[i] - out.path[k - 1].weights[i]);
    out.step_turnover.push_back(step);
    out.turnover += step;
  }
  return out;
}

/// Subset of the loss table holding only the named models, in original table
/// order. Used to restrict combination to confidence-set survivors.
inline LossTable restrict_losses(const LossTable& table, const std::vector<std::string>& keep) {
  for (const auto& id : keep)
    if (!table.model_index(id))
      throw ValidationError("restrict_losses: unknown model id " + id);
  LossTable out;
  out.origins = table.origins;
  out.periods = table.periods;
  out.actuals = table.actuals;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.model_ids.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), table.model_ids[i]) == keep.end()) continue;
    rows.push_back(i);
    out.model_ids.push_back(table.model_ids[i]);
  }
  if (rows.empty()) throw ValidationError("restrict_losses: no models retained");
  const std::size_t t = table.origins.size();
  out.sqerr = Matrix(rows.size(), t);
  out.abserr = Matrix(rows.size(), t);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < t; ++j) {
      out.sqerr(r, j) = table.sqerr(rows[r], j);
      out.abserr(r, j) = table.abserr(rows[r], j);
    }
  for (const auto& s : table.summary)
    if (std::find(out.model_ids.begin(), out.model_ids.end(), s.model_id) != out.model_ids.end())
      out.summary.push_back(s);
  return out;
}

inline std::string weights_csv(const CombinationWeights& w) {
  std::string out = "model,weight\n";
  for (std::size_t i = 0; i < w.model_ids.size(); ++i)
    out += csv_join({w.model_ids[i], format_double(w.weights[i])}) + "\n";
  return out;
}

inline std::string trajectory_csv(const WeightTrajectory& tr) {
  std::string out = "origin,model,weight\n";
  for (const auto& w : tr.path)
    for (std::size_t i = 0; i < w.model_ids.size(); ++i)
      out += csv_join({w.as_of.str(), w.model_ids[i], format_double(w.weights[i])}) + "\n";
  return out;
}

}  // namespace nowcast
