#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "nowcast/core/csv.hpp"
#include "nowcast/eval/walkforward.hpp"
#include "nowcast/uq/bootstrap.hpp"

namespace nowcast {

/// Stream tag for replicate-keyed rngs drawing loss-row resamples.
inline constexpr std::uint64_t kMcsStream = 0x4d435342;  // "MCSB"

struct McsConfig {
  LossKind loss = LossKind::squared;
  int block_length = 0;  ///< 0 resolves to the cube-root rule on common origins
  std::size_t replicates = 999;
  std::uint64_t seed = 0;
  /// Rolling-window MCS is not implemented; any nonzero window is rejected so
  /// a config cannot silently request behavior the engine does not have.
  std::size_t rolling_window = 0;
};

struct EliminationStep {
  std::string model_id;
  double p_value = 1.0;  ///< monotonized: never below any earlier step
  bool survivor = false;
};

/// The set of models not statistically outperformed at the given level, plus
/// the order in which the rest were eliminated. Equal predictive ability is
/// tested with a studentized range statistic over pairwise mean loss
/// differentials; its null distribution comes from moving-block resampling of
/// loss rows with recentered differentials.
struct ModelConfidenceSet {
  std::vector<std::string> survivors;  ///< original table order; never empty
  std::vector<EliminationStep> elimination_order;
  double level = 0.10;
  LossKind loss = LossKind::squared;
  std::string statistic = "studentized range over pairwise mean loss differentials";
  BlockBootstrapConfig bootstrap;  ///< resolved echo of the loss-row resampler
  std::size_t common_origins = 0;

  [[nodiscard]] bool survived(const std::string& id) const {
    return std::find(survivors.begin(), survivors.end(), id) != survivors.end();
  }
};

namespace detail {

/// Per-model loss rows restricted to origins where every model has a realized
/// loss. Pairwise differentials are only comparable on that common sample.
inline std::vector<Vec> common_loss_rows(const LossTable& table, LossKind kind) {
  const Matrix& src = kind == LossKind::squared ? table.sqerr : table.abserr;
  const std::size_t m = table.model_ids.size();
  const std::size_t t = table.origins.size();
  std::vector<std::size_t> common;
  for (std::size_t j = 0; j < t; ++j) {
    bool all = true;
    for (std::size_t i = 0; i < m && all; ++i) all = std::isfinite(src(i, j));
    if (all) common.push_back(j);
  }
  std::vector<Vec> rows(m, Vec(common.size(), 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < common.size(); ++j) rows[i][j] = src(i, common[j]);
  return rows;
}

}  // namespace detail

/// Sequential elimination at level alpha. Each round studentizes every pairwise
/// mean loss differential by its bootstrap standard error, takes the largest
/// exceedance as the range statistic, and compares it against the resampled
/// null (differentials recentered at zero). While the test rejects, the model
/// with the worst studentized exceedance is dropped and its monotonized
/// p-value recorded; the remaining models survive with the stopping p-value.
///
/// Degenerate tables are handled, not errored: identical loss columns have
/// zero differential and zero bootstrap spread, so every statistic is 0, the
/// p-value is 1 and all models co-survive. A single-model table survives
/// trivially with p = 1.
inline ModelConfidenceSet mcs(const LossTable& table, double alpha, const McsConfig& config = {}) {
  if (config.rolling_window != 0)
    throw ValidationError(
        "mcs: rolling-window evaluation is not implemented; set rolling_window = 0 and run on "
        "the full loss sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("mcs: alpha must lie in (0, 1)");
  if (config.replicates == 0) throw ValidationError("mcs: needs at least 1 bootstrap replicate");
  const std::size_t m = table.model_ids.size();
  if (m == 0) throw ValidationError("mcs: loss table has no models");

  ModelConfidenceSet out;
  out.level = alpha;
  out.loss = config.loss;

  const auto rows = detail::common_loss_rows(table, config.loss);
  const std::size_t t = rows.front().size();
  out.common_origins = t;

  if (m == 1) {
    out.survivors = table.model_ids;
    out.elimination_order.push_back({table.model_ids[0], 1.0, true});
    return out;
  }
  if (t < 10)
    throw ValidationError("mcs: needs at least 10 origins where every model has a realized loss");

  const int L = config.block_length > 0 ? config.block_length : default_block_length(t);
  if (L < 1 || static_cast<std::size_t>(L) > t)
    throw ValidationError("mcs: block length must lie in [1, common origins]");
  out.bootstrap.scheme = BootstrapScheme::moving_block;
  out.bootstrap.block_length = L;
  out.bootstrap.replicates = config.replicates;
  out.bootstrap.seed = config.seed;
  out.bootstrap.innovation = InnovationMode::none;

  Vec loss_mean(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) loss_mean[i] = mean(rows[i]);

  // Resampled per-model means, centered at the observed means. Differential
  // spread and the null distribution both derive from these; the same draws
  // serve every elimination round.
  const std::size_t B = config.replicates;
  Matrix centered(B, m);
  for (std::size_t b = 0; b < B; ++b) {
    Rng rng = Rng::keyed(config.seed, {kMcsStream, b});
    const auto idx = moving_block_indices(t, L, rng);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t k : idx) s += rows[i][k];
      centered(b, i) = s / static_cast<double>(t) - loss_mean[i];
    }
  }
  Matrix se(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double z = centered(b, i) - centered(b, j);
        s += z * z;
      }
      se(i, j) = se(j, i) = std::sqrt(s / static_cast<double>(B));
    }

  const double inf = std::numeric_limits<double>::infinity();
  auto tstat = [&](std::size_t i, std::size_t j) {
    const double d = loss_mean[i] - loss_mean[j];
    if (se(i, j) > 0.0) return d / se(i, j);
    return d == 0.0 ? 0.0 : (d > 0.0 ? inf : -inf);
  };

  std::vector<std::size_t> active(m);
  for (std::size_t i = 0; i < m; ++i) active[i] = i;
  double p_prev = 0.0;

  while (true) {
    if (active.size() == 1) {
      out.elimination_order.push_back({table.model_ids[active[0]], 1.0, true});
      out.survivors.push_back(table.model_ids[active[0]]);
      break;
    }
    double t_obs = -inf;
    std::size_t worst = active[0];
    for (std::size_t i : active)
      for (std::size_t j : active) {
        if (i == j) continue;
        const double v = tstat(i, j);
        if (v > t_obs) {
          t_obs = v;
          worst = i;
        }
      }
    std::size_t exceed = 0;
    for (std::size_t b = 0; b < B; ++b) {
      double t_null = 0.0;
      for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t c = a + 1; c < active.size(); ++c) {
          const std::size_t i = active[a], j = active[c];
          if (se(i, j) <= 0.0) continue;
          t_null = std::max(t_null, std::abs(centered(b, i) - centered(b, j)) / se(i, j));
        }
      if (t_null >= t_obs) ++exceed;
    }
    const double p_raw = static_cast<double>(exceed) / static_cast<double>(B);
    const double p = std::max(p_raw, p_prev);
    p_prev = p;
    if (p_raw < alpha) {
      out.elimination_order.push_back({table.model_ids[worst], p, false});
      active.erase(std::find(active.begin(), active.end(), worst));
      continue;
    }
    for (std::size_t i : active) {
      out.elimination_order.push_back({table.model_ids[i], p, true});
      out.survivors.push_back(table.model_ids[i]);
    }
    break;
  }
  std::sort(out.survivors.begin(), out.survivors.end(),
            [&](const std::string& a, const std::string& b) {
              return table.model_index(a) < table.model_index(b);
            });
  return out;
}

inline std::string mcs_csv(const ModelConfidenceSet& set) {
  std::string out = "step,model,p_value,survivor\n";
  for (std::size_t i = 0; i < set.elimination_order.size(); ++i) {
    const auto& e = set.elimination_order[i];
    out += csv_join(
        {std::to_string(i), e.model_id, format_double(e.p_value), e.survivor ? "1" : "0"});
    out += '\n';
  }
  return out;
}

}  // namespace nowcast
