#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nowcast/explain/stability.hpp"
#include "nowcast/report/release.hpp"

namespace nowcast {

struct BenchmarkDistance {
  std::string model_id;
  double rmsfe_ratio = 0.0;  ///< model RMSFE / benchmark RMSFE
  double mafe_ratio = 0.0;
};

/// The four monitoring indicator groups, tagged with the origin window they
/// were computed over: effective coverage, importance stability, distance
/// from benchmarks, and instability signals.
struct DashboardMetrics {
  Date window_start, window_end;
  std::size_t coverage_window = 8;
  double nominal = 0.0;  ///< nominal coverage of the intervals (1 - alpha)
  std::vector<Date> coverage_origins;
  Vec rolling_coverage;  ///< trailing-window hit rate per resolved origin
  std::vector<std::string> features;
  Vec importance_median;  ///< per-feature median attribution magnitude
  Vec importance_iqr;
  Vec rank_correlation_series;  ///< consecutive-origin Spearman correlations
  std::vector<BenchmarkDistance> benchmark_distance;
  std::vector<InstabilityFlag> instability_signals;
};

struct DashboardInputs {
  LossTable losses;
  std::string benchmark_id;
  std::vector<PredictionInterval> intervals;  ///< aligned with actuals below
  Vec actuals;
  ImportanceProfile profile;  ///< cross-origin importance summary
  StabilityReport stability;
  std::vector<Date> stability_origins;  ///< origins the stability report spans
  std::size_t coverage_window = 8;
};

namespace detail {

inline std::pair<Date, Date> date_span(const std::vector<Date>& v) {
  return {*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
}

}  // namespace detail

inline DashboardMetrics dashboard(const DashboardInputs& in) {
  if (in.intervals.empty() || in.intervals.size() != in.actuals.size())
    throw ValidationError("dashboard: need one actual per interval");
  if (in.losses.origins.empty()) throw ValidationError("dashboard: loss table has no origins");
  if (in.stability_origins.empty())
    throw ValidationError("dashboard: stability report origins missing");
  if (in.coverage_window == 0) throw ValidationError("dashboard: coverage window must be > 0");
  if (in.profile.features != in.stability.features)
    throw ValidationError("dashboard: importance profile and stability report disagree on "
                          "features");
  const auto bench = in.losses.model_index(in.benchmark_id);
  if (!bench) throw ValidationError("dashboard: unknown benchmark id " + in.benchmark_id);

  std::vector<Date> interval_origins;
  for (const auto& iv : in.intervals) interval_origins.push_back(iv.origin);
  const auto [ls, le] = detail::date_span(in.losses.origins);
  const auto [is, ie] = detail::date_span(interval_origins);
  const auto [ss, se] = detail::date_span(in.stability_origins);
  const Date start = std::max({ls, is, ss});
  const Date end = std::min({le, ie, se});
  if (start > end)
    throw ValidationError(
        "dashboard: inputs cover disjoint origin windows; align the loss table, intervals, and "
        "stability report before aggregating");

  DashboardMetrics m;
  m.window_start = start;
  m.window_end = end;
  m.coverage_window = in.coverage_window;
  m.nominal = 1.0 - in.intervals.front().alpha;

  Vec hits;
  for (std::size_t i = 0; i < in.intervals.size(); ++i) {
    const auto& iv = in.intervals[i];
    hits.push_back(in.actuals[i] >= iv.lower && in.actuals[i] <= iv.upper ? 1.0 : 0.0);
    m.coverage_origins.push_back(iv.origin);
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t from = i + 1 >= in.coverage_window ? i + 1 - in.coverage_window : 0;
    double s = 0.0;
    for (std::size_t k = from; k <= i; ++k) s += hits[k];
    m.rolling_coverage.push_back(s / static_cast<double>(i - from + 1));
  }

  m.features = in.profile.features;
  m.importance_median = in.profile.central;
  m.importance_iqr = in.stability.iqr;
  m.rank_correlation_series = in.stability.rank_correlations;
  m.instability_signals = in.stability.flags;

  // Distance from benchmarks: per-model RMSFE and MAFE relative to the named
  // benchmark, recomputed from the loss matrices over non-skipped origins.
  auto summary_of = [&](std::size_t i) {
    double sq = 0.0, ab = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < in.losses.origins.size(); ++j) {
      if (!std::isfinite(in.losses.sqerr(i, j))) continue;
      sq += in.losses.sqerr(i, j);
      ab += in.losses.abserr(i, j);
      ++n;
    }
    if (n == 0)
      throw ValidationError("dashboard: model " + in.losses.model_ids[i] +
                            " has no realized losses");
    return std::pair<double, double>{std::sqrt(sq / static_cast<double>(n)),
                                     ab / static_cast<double>(n)};
  };
  const auto [bench_rmsfe, bench_mafe] = summary_of(*bench);
  if (!(bench_rmsfe > 0.0) || !(bench_mafe > 0.0))
    throw ValidationError("dashboard: benchmark " + in.benchmark_id +
                          " has zero loss; distance ratios are undefined");
  for (std::size_t i = 0; i < in.losses.model_ids.size(); ++i) {
    const auto [rmsfe, mafe] = summary_of(i);
    BenchmarkDistance d;
    d.model_id = in.losses.model_ids[i];
    d.rmsfe_ratio = rmsfe / bench_rmsfe;
    d.mafe_ratio = mafe / bench_mafe;
    if (!(d.rmsfe_ratio > 0.0) || !(d.mafe_ratio > 0.0))
      throw ValidationError("dashboard: model " + d.model_id +
                            " has zero loss; distance ratios are undefined");
    m.benchmark_distance.push_back(std::move(d));
  }
  return m;
}

inline std::string dashboard_text(const DashboardMetrics& m) {
  std::string out;
  out += "dashboard window " + m.window_start.str() + " .. " + m.window_end.str() + "\n";
  out += "coverage (nominal " + format_double(m.nominal) + ", trailing " +
         std::to_string(m.coverage_window) + "):";
  for (double v : m.rolling_coverage) out += " " + format_double(v);
  out += "\nimportance (median, iqr):\n";
  for (std::size_t j = 0; j < m.features.size(); ++j)
    out += "  " + m.features[j] + "  " + format_double(m.importance_median[j]) + "  " +
           format_double(m.importance_iqr[j]) + "\n";
  out += "rank correlations:";
  for (double v : m.rank_correlation_series) out += " " + format_double(v);
  out += "\nbenchmark distance (rmsfe, mafe):\n";
  for (const auto& d : m.benchmark_distance)
    out += "  " + d.model_id + "  " + format_double(d.rmsfe_ratio) + "  " +
           format_double(d.mafe_ratio) + "\n";
  out += "instability signals: " + std::to_string(m.instability_signals.size()) + "\n";
  for (const auto& f : m.instability_signals)
    out += "  " + f.feature + " rank " + std::to_string(f.rank_from) + " -> " +
           std::to_string(f.rank_to) + " between " + f.from.str() + " and " + f.to.str() + "\n";
  return out;
}

/// Methodology appendix for a release cycle: data sources and transforms,
/// update rules, the model portfolio, and the uncertainty and explainability
/// design choices, rendered as deterministic plain text.
inline std::string methodology_appendix(const Recipe& recipe,
                                        const std::vector<ModelSpec>& portfolio,
                                        const BlockBootstrapConfig& bootstrap,
                                        const std::map<std::string, std::string>& choices) {
  std::string out = "# Methodology\n\n## Data\n";
  out += "target series: " + recipe.target.series + " (" + chain_str(recipe.target.chain) + ")\n";
  out += "partial quarters: ";
  out += recipe.partial_quarters == PartialQuarterPolicy::drop ? "drop" : "mean_available";
  out += "\nfeatures:\n";
  for (const auto& f : recipe.features)
    out += "  " + f.name + ": " + f.series + " " + to_string(f.aggregation) + " (" +
           chain_str(f.chain) + ") block " + to_string(f.block) + " lag " +
           std::to_string(f.lag) + "\n";
  out += "\n## Models\n";
  for (const auto& spec : portfolio) out += "  " + spec.id() + "\n";
  out += "\n## Uncertainty\n";
  out += "scheme " + to_string(bootstrap.scheme) + ", block length " +
         std::to_string(bootstrap.block_length) + ", replicates " +
         std::to_string(bootstrap.replicates) + ", resample unit " + to_string(bootstrap.unit) +
         ", innovation " + to_string(bootstrap.innovation) + "\n";
  out += "\n## Explainability and thresholds\n";
  for (const auto& [k, v] : choices) out += "  " + k + ": " + v + "\n";
  return out;
}

}  // namespace nowcast
