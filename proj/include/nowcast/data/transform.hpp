#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/core/calendar.hpp"
#include "nowcast/core/errors.hpp"

namespace nowcast {

/// One point of an aligned series with its publication provenance: the latest
/// published_at among every observation the value was computed from.
struct SeriesPoint {
  Period period;
  double value = 0.0;
  Date published_at;
};

using SeriesVector = std::vector<SeriesPoint>;

enum class AggregationRule { mean, end_of_period, sum };

inline std::string to_string(AggregationRule r) {
  switch (r) {
    case AggregationRule::mean: return "mean";
    case AggregationRule::end_of_period: return "end_of_period";
    case AggregationRule::sum: return "sum";
  }
  return "mean";
}

inline std::optional<AggregationRule> aggregation_from_string(std::string_view s) {
  if (s == "mean") return AggregationRule::mean;
  if (s == "end_of_period") return AggregationRule::end_of_period;
  if (s == "sum") return AggregationRule::sum;
  return std::nullopt;
}

enum class PartialQuarterPolicy { drop, mean_available };

/// Collapse a monthly series to quarterly. Complete quarters (all three
/// months present) always aggregate by `rule`. Partial quarters are dropped
/// by default; the opt-in policy emits the mean of the months available.
/// Provenance of a quarter is the max published_at of its months.
inline SeriesVector aggregate_to_quarterly(const SeriesVector& monthly, AggregationRule rule,
                                           PartialQuarterPolicy partial = PartialQuarterPolicy::drop) {
  if (monthly.empty()) throw ValidationError("aggregate_to_quarterly: empty input");
  SeriesVector out;
  std::size_t i = 0;
  while (i < monthly.size()) {
    if (monthly[i].period.freq != Frequency::monthly)
      throw ValidationError("aggregate_to_quarterly: input must be monthly");
    const Period quarter = monthly[i].period.containing_quarter();
    std::vector<const SeriesPoint*> months;
    std::size_t j = i;
    while (j < monthly.size() && monthly[j].period.containing_quarter() == quarter) {
      months.push_back(&monthly[j]);
      ++j;
    }
    i = j;
    const bool complete = months.size() == 3;
    if (!complete && partial == PartialQuarterPolicy::drop) continue;
    double value = 0.0;
    Date pub = months.front()->published_at;
    for (const auto* m : months) pub = std::max(pub, m->published_at);
    if (!complete) {
      for (const auto* m : months) value += m->value;
      value /= static_cast<double>(months.size());
    } else {
      switch (rule) {
        case AggregationRule::mean:
          for (const auto* m : months) value += m->value;
          value /= 3.0;
          break;
        case AggregationRule::end_of_period:
          value = months.back()->value;
          break;
        case AggregationRule::sum:
          for (const auto* m : months) value += m->value;
          break;
      }
    }
    out.push_back(SeriesPoint{quarter, value, pub});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transform chains

struct TransformStep {
  enum class Kind { log, diff, pct_change, standardize };
  Kind kind = Kind::log;

  [[nodiscard]] std::string str() const {
    switch (kind) {
      case Kind::log: return "log";
      case Kind::diff: return "diff";
      case Kind::pct_change: return "pct_change";
      case Kind::standardize: return "standardize";
    }
    return "log";
  }

  static std::optional<TransformStep> parse(std::string_view s) {
    if (s == "log") return TransformStep{Kind::log};
    if (s == "diff") return TransformStep{Kind::diff};
    if (s == "pct_change") return TransformStep{Kind::pct_change};
    if (s == "standardize") return TransformStep{Kind::standardize};
    return std::nullopt;
  }
};

using TransformChain = std::vector<TransformStep>;

inline std::string chain_str(const TransformChain& chain) {
  std::string out;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) out += "|";
    out += chain[i].str();
  }
  return out;
}

/// Statistics window actually used by a standardize step, kept for the
/// leakage audit: stats must come only from the training-window slice.
struct StandardizeStats {
  double mean = 0.0;
  double sd = 0.0;
  Period window_start;
  Period window_end;  // inclusive
  Date provenance;    // max published_at across the window slice
};

struct TransformResult {
  SeriesVector series;
  std::vector<StandardizeStats> standardize_stats;  // one per standardize step, in order
};

/// Apply a transform chain. diff/pct_change drop the first point and fold the
/// predecessor's provenance into each output point. standardize computes its
/// statistics only on points with stats_start <= period <= stats_end
/// (population variance) and applies them to the whole series.
inline TransformResult apply_chain(SeriesVector series, const TransformChain& chain,
                                   std::optional<Period> stats_end = std::nullopt,
                                   std::optional<Period> stats_start = std::nullopt) {
  TransformResult out;
  for (const auto& step : chain) {
    switch (step.kind) {
      case TransformStep::Kind::log: {
        for (auto& pt : series) {
          if (!(pt.value > 0.0))
            throw ValidationError("log transform of non-positive value at " + pt.period.str());
          pt.value = std::log(pt.value);
        }
        break;
      }
      case TransformStep::Kind::diff: {
        SeriesVector next;
        for (std::size_t i = 1; i < series.size(); ++i) {
          if (series[i].period != series[i - 1].period.next()) continue;  // calendar gap
          next.push_back(SeriesPoint{series[i].period, series[i].value - series[i - 1].value,
                                     std::max(series[i].published_at, series[i - 1].published_at)});
        }
        series = std::move(next);
        break;
      }
      case TransformStep::Kind::pct_change: {
        SeriesVector next;
        for (std::size_t i = 1; i < series.size(); ++i) {
          if (series[i].period != series[i - 1].period.next()) continue;  // calendar gap
          if (series[i - 1].value == 0.0)
            throw ValidationError("pct_change across a zero value at " + series[i - 1].period.str());
          next.push_back(SeriesPoint{
              series[i].period, 100.0 * (series[i].value - series[i - 1].value) / series[i - 1].value,
              std::max(series[i].published_at, series[i - 1].published_at)});
        }
        series = std::move(next);
        break;
      }
      case TransformStep::Kind::standardize: {
        if (series.empty()) throw ValidationError("standardize of empty series");
        std::vector<const SeriesPoint*> window;
        for (const auto& pt : series)
          if ((!stats_end || pt.period <= *stats_end) && (!stats_start || pt.period >= *stats_start))
            window.push_back(&pt);
        if (window.empty())
          throw ValidationError("standardize window contains no points");
        double m = 0.0;
        for (const auto* pt : window) m += pt->value;
        m /= static_cast<double>(window.size());
        double var = 0.0;
        for (const auto* pt : window) var += (pt->value - m) * (pt->value - m);
        var /= static_cast<double>(window.size());
        if (!(var > 0.0))
          throw ValidationError("zero-variance window under standardize");
        const double sd = std::sqrt(var);
        StandardizeStats st;
        st.mean = m;
        st.sd = sd;
        st.window_start = window.front()->period;
        st.window_end = window.back()->period;
        st.provenance = window.front()->published_at;
        for (const auto* pt : window) st.provenance = std::max(st.provenance, pt->published_at);
        for (auto& pt : series) {
          pt.value = (pt.value - m) / sd;
          pt.published_at = std::max(pt.published_at, st.provenance);
        }
        out.standardize_stats.push_back(st);
        break;
      }
    }
  }
  out.series = std::move(series);
  return out;
}

/// Chain applied to raw values with no provenance/window bookkeeping.
inline std::vector<double> apply_chain_values(const std::vector<double>& values,
                                              const TransformChain& chain) {
  SeriesVector s;
  Period p{Frequency::quarterly, 2000, 1};
  for (double v : values) {
    s.push_back(SeriesPoint{p, v, Date{2000, 1, 1}});
    p = p.next();
  }
  auto res = apply_chain(std::move(s), chain);
  std::vector<double> out;
  out.reserve(res.series.size());
  for (const auto& pt : res.series) out.push_back(pt.value);
  return out;
}

}  // namespace nowcast
