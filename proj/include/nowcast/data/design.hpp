#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nowcast/core/calendar.hpp"
#include "nowcast/core/digest.hpp"
#include "nowcast/core/errors.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/data/observation.hpp"
#include "nowcast/data/recipe.hpp"
#include "nowcast/data/transform.hpp"

namespace nowcast {

enum class WindowKind { expanding, rolling };

struct WindowPolicy {
  WindowKind kind = WindowKind::expanding;
  int length = 0;  // rolling only; most recent `length` target quarters

  static WindowPolicy expanding() { return {WindowKind::expanding, 0}; }
  static WindowPolicy rolling(int length) { return {WindowKind::rolling, length}; }
};

struct FeatureMeta {
  std::string name;
  std::string series;
  std::string chain;
  EconomicBlock block = EconomicBlock::other;
  AggregationRule aggregation = AggregationRule::mean;
  int lag = 0;
  bool carried = false;  // nowcast cell filled from the prior quarter (ragged edge)
  std::optional<Period> carried_from;
  std::vector<StandardizeStats> standardize_stats;
  Date max_provenance;  // latest published_at over every cell of this column
};

struct DroppedFeature {
  std::string name;
  std::string reason;
};

/// Aligned estimation panel at one forecast origin. Rows are target quarters
/// strictly before the nowcast quarter; x_now is the predictor row for the
/// nowcast quarter itself. Every cell keeps the publication date it derives
/// from, so the leakage audit can verify published_at <= origin cell by cell.
struct DesignMatrix {
  Date origin;
  Period nowcast_period;                // quarter containing the origin
  int steps_ahead = 1;                  // nowcast_period minus last training period
  std::vector<Period> target_periods;   // training rows, strictly increasing
  Vec y;
  Matrix X;
  Vec x_now;
  std::vector<FeatureMeta> feature_meta;
  std::vector<DroppedFeature> dropped;
  std::vector<std::vector<Date>> X_pub;  // per-cell provenance, rows x cols
  std::vector<Date> x_now_pub;
  std::vector<Date> y_pub;

  [[nodiscard]] std::size_t n_rows() const { return target_periods.size(); }
  [[nodiscard]] std::size_t n_features() const { return feature_meta.size(); }

  [[nodiscard]] std::vector<std::string> feature_names() const {
    std::vector<std::string> out;
    out.reserve(feature_meta.size());
    for (const auto& m : feature_meta) out.push_back(m.name);
    return out;
  }

  /// Digest of the data content (excludes the origin date so that moving the
  /// origin within a quarter with no new publications compares equal).
  [[nodiscard]] std::string data_digest() const {
    Digest d;
    d.update(nowcast_period.str());
    for (const auto& p : target_periods) d.update(p.str());
    for (double v : y) d.update(format_double(v));
    for (double v : X.data()) d.update(format_double(v));
    for (double v : x_now) d.update(format_double(v));
    for (const auto& m : feature_meta) d.update(m.name).update(m.chain);
    for (const auto& f : dropped) d.update(f.name).update(f.reason);
    return d.hex();
  }
};

namespace detail {

struct AlignedFeature {
  // transformed values keyed by the feature's own period axis
  std::map<Period, SeriesPoint> points;
  std::vector<StandardizeStats> stats;
};

inline SeriesVector visible_series(const Snapshot& snapshot, const std::string& series,
                                   const Date& cutoff) {
  auto it = snapshot.panel.find(series);
  if (it == snapshot.panel.end())
    throw ValidationError("recipe references unknown series: " + series);
  SeriesVector out;
  for (const auto& [period, cell] : it->second)
    if (cell.published_at <= cutoff) out.push_back(SeriesPoint{period, cell.value, cell.published_at});
  return out;
}

inline SeriesVector to_quarterly(SeriesVector s, const FeatureSpec& f,
                                 PartialQuarterPolicy partial) {
  if (s.empty()) return s;
  if (s.front().period.freq == Frequency::monthly) return aggregate_to_quarterly(s, f.aggregation, partial);
  return s;
}

}  // namespace detail

/// Build the estimation panel visible at `origin` from `snapshot`.
/// Honest callers pass snapshot.as_of == origin; fault-injection tests may
/// pass a later snapshot, in which case only features with fault_peek_days
/// see past the origin (and the audit then reports exactly those columns).
inline DesignMatrix assemble_design(const Snapshot& snapshot, const Recipe& recipe,
                                    const Date& origin,
                                    WindowPolicy window = WindowPolicy::expanding()) {
  if (origin > snapshot.as_of)
    throw ValidationError("assemble_design: origin " + origin.str() + " is past snapshot as_of " +
                          snapshot.as_of.str());
  if (window.kind == WindowKind::rolling && window.length < 1)
    throw ValidationError("rolling window length must be >= 1");
  for (const auto& step : recipe.target.chain)
    if (step.kind == TransformStep::Kind::standardize)
      throw ValidationError("target chain may not standardize (target stays in percent units)");

  DesignMatrix d;
  d.origin = origin;
  d.nowcast_period = Period::quarter_of(origin);

  // target: quarterly growth history strictly before the nowcast quarter
  SeriesVector tgt_raw = detail::visible_series(snapshot, recipe.target.series, origin);
  if (tgt_raw.empty()) throw ValidationError("all-missing target: no publication of " +
                                             recipe.target.series + " by " + origin.str());
  if (tgt_raw.front().period.freq == Frequency::monthly)
    tgt_raw = aggregate_to_quarterly(tgt_raw, AggregationRule::mean, recipe.partial_quarters);
  SeriesVector tgt = apply_chain(std::move(tgt_raw), recipe.target.chain).series;
  std::vector<SeriesPoint> tgt_train;
  for (const auto& pt : tgt)
    if (pt.period < d.nowcast_period) tgt_train.push_back(pt);
  if (tgt_train.empty())
    throw ValidationError("all-missing target: no target history before " + d.nowcast_period.str());

  // pass A: per-feature period coverage ignoring standardize (which does not
  // change coverage), plus the ragged-edge resolution of the nowcast cell
  struct Coverage {
    std::set<Period> periods;
    std::optional<Period> nowcast_source;  // period feeding the nowcast cell
    bool carried = false;
    bool dropped = false;
    std::string drop_reason;
  };
  std::vector<Coverage> cov(recipe.features.size());
  for (std::size_t fi = 0; fi < recipe.features.size(); ++fi) {
    const auto& f = recipe.features[fi];
    const Date cutoff = origin.plus_days(f.fault_peek_days);
    SeriesVector s = detail::visible_series(snapshot, f.series, cutoff);
    s = detail::to_quarterly(std::move(s), f, recipe.partial_quarters);
    TransformChain no_std;
    for (const auto& st : f.chain)
      if (st.kind != TransformStep::Kind::standardize) no_std.push_back(st);
    SeriesVector t;
    try {
      t = apply_chain(std::move(s), no_std).series;
    } catch (const ValidationError& e) {
      cov[fi].dropped = true;
      cov[fi].drop_reason = e.what();
      continue;
    }
    for (const auto& pt : t) cov[fi].periods.insert(pt.period);
    const Period want = d.nowcast_period.plus(-f.lag);
    if (cov[fi].periods.count(want)) {
      cov[fi].nowcast_source = want;
    } else if (cov[fi].periods.count(want.prev())) {
      cov[fi].nowcast_source = want.prev();
      cov[fi].carried = true;
    } else {
      cov[fi].dropped = true;
      cov[fi].drop_reason = "nowcast cell unavailable: latest value older than one quarter behind " +
                            want.str();
    }
    if (!cov[fi].dropped && cov[fi].periods.empty()) {
      cov[fi].dropped = true;
      cov[fi].drop_reason = "no values visible at origin";
    }
  }

  // settle the training window against retained-feature coverage; dropping a
  // feature can relax the start, so iterate to a fixed point
  std::vector<Period> train;
  while (true) {
    Period start = tgt_train.front().period;
    for (std::size_t fi = 0; fi < recipe.features.size(); ++fi) {
      if (cov[fi].dropped) continue;
      const Period first_row = cov[fi].periods.empty()
                                   ? d.nowcast_period
                                   : cov[fi].periods.begin()->plus(recipe.features[fi].lag);
      if (first_row > start) start = first_row;
    }
    train.clear();
    for (const auto& pt : tgt_train)
      if (pt.period >= start) train.push_back(pt.period);
    if (window.kind == WindowKind::rolling &&
        train.size() > static_cast<std::size_t>(window.length))
      train.erase(train.begin(), train.end() - window.length);
    bool changed = false;
    for (std::size_t fi = 0; fi < recipe.features.size(); ++fi) {
      if (cov[fi].dropped) continue;
      for (const auto& q : train) {
        if (!cov[fi].periods.count(q.plus(-recipe.features[fi].lag))) {
          cov[fi].dropped = true;
          cov[fi].drop_reason = "gap in training window at " + q.str();
          changed = true;
          break;
        }
      }
    }
    if (!changed) break;
  }
  if (train.empty()) throw ValidationError("no usable training rows at origin " + origin.str());

  // pass B: re-run full chains with standardize statistics restricted to the
  // settled training slice (on each feature's own lag-shifted period axis)
  std::vector<detail::AlignedFeature> aligned;
  std::vector<std::size_t> retained;
  for (std::size_t fi = 0; fi < recipe.features.size(); ++fi) {
    const auto& f = recipe.features[fi];
    if (cov[fi].dropped) {
      d.dropped.push_back({f.name, cov[fi].drop_reason});
      continue;
    }
    const Date cutoff = origin.plus_days(f.fault_peek_days);
    SeriesVector s = detail::visible_series(snapshot, f.series, cutoff);
    s = detail::to_quarterly(std::move(s), f, recipe.partial_quarters);
    std::optional<Period> stats_start = train.front().plus(-f.lag);
    std::optional<Period> stats_end = train.back().plus(-f.lag);
    if (f.fault_full_sample_stats) {
      stats_start.reset();
      stats_end.reset();
    }
    TransformResult res = apply_chain(std::move(s), f.chain, stats_end, stats_start);
    detail::AlignedFeature af;
    af.stats = std::move(res.standardize_stats);
    for (const auto& pt : res.series) af.points.emplace(pt.period, pt);
    aligned.push_back(std::move(af));
    retained.push_back(fi);
  }

  // assemble the panel
  const std::size_t n = train.size();
  const std::size_t p = retained.size();
  d.target_periods = train;
  d.steps_ahead = static_cast<int>(d.nowcast_period.minus(train.back()));
  d.y.resize(n);
  d.y_pub.resize(n);
  {
    std::map<Period, SeriesPoint> tmap;
    for (const auto& pt : tgt_train) tmap.emplace(pt.period, pt);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pt = tmap.at(train[i]);
      d.y[i] = pt.value;
      d.y_pub[i] = pt.published_at;
    }
  }
  d.X = Matrix(n, p);
  d.X_pub.assign(n, std::vector<Date>(p));
  d.x_now.resize(p);
  d.x_now_pub.resize(p);
  for (std::size_t c = 0; c < p; ++c) {
    const auto& f = recipe.features[retained[c]];
    const auto& af = aligned[c];
    const auto& cv = cov[retained[c]];
    FeatureMeta meta;
    meta.name = f.name;
    meta.series = f.series;
    meta.chain = chain_str(f.chain);
    meta.block = f.block;
    meta.aggregation = f.aggregation;
    meta.lag = f.lag;
    meta.carried = cv.carried;
    if (cv.carried) meta.carried_from = cv.nowcast_source;
    meta.standardize_stats = af.stats;
    Date maxpub{1, 1, 1};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& pt = af.points.at(train[i].plus(-f.lag));
      d.X(i, c) = pt.value;
      d.X_pub[i][c] = pt.published_at;
      maxpub = std::max(maxpub, pt.published_at);
    }
    const auto& now_pt = af.points.at(*cv.nowcast_source);
    d.x_now[c] = now_pt.value;
    d.x_now_pub[c] = now_pt.published_at;
    maxpub = std::max(maxpub, now_pt.published_at);
    meta.max_provenance = maxpub;
    d.feature_meta.push_back(std::move(meta));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Per-design leakage audit: two planes.
//  - date plane: every cell's publication provenance must be <= origin;
//  - period plane: standardize statistics must come from the training slice
//    only (a full-sample standardization leaks the nowcast quarter's level
//    into the training rows even when every input was published in time).

struct LeakageViolation {
  std::string feature;  // feature name or "target"
  std::string plane;    // "published_at" or "stats_window"
  std::string detail;
};

inline std::vector<LeakageViolation> audit_design(const DesignMatrix& d) {
  std::vector<LeakageViolation> out;
  for (std::size_t i = 0; i < d.y_pub.size(); ++i)
    if (d.y_pub[i] > d.origin)
      out.push_back({"target", "published_at",
                     "row " + d.target_periods[i].str() + " published " + d.y_pub[i].str()});
  for (std::size_t c = 0; c < d.feature_meta.size(); ++c) {
    const auto& m = d.feature_meta[c];
    for (std::size_t i = 0; i < d.target_periods.size(); ++i)
      if (d.X_pub[i][c] > d.origin)
        out.push_back({m.name, "published_at",
                       "row " + d.target_periods[i].str() + " published " + d.X_pub[i][c].str()});
    if (d.x_now_pub[c] > d.origin)
      out.push_back({m.name, "published_at", "nowcast cell published " + d.x_now_pub[c].str()});
    if (!d.target_periods.empty()) {
      const Period lo = d.target_periods.front().plus(-m.lag);
      const Period hi = d.target_periods.back().plus(-m.lag);
      for (const auto& st : m.standardize_stats) {
        if (st.window_end > hi)
          out.push_back({m.name, "stats_window",
                         "standardize statistics drawn through " + st.window_end.str() +
                             ", past the training slice end " + hi.str()});
        if (st.window_start < lo)
          out.push_back({m.name, "stats_window",
                         "standardize statistics start " + st.window_start.str() +
                             " before the training slice start " + lo.str()});
      }
    }
  }
  return out;
}

}  // namespace nowcast
