#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/core/csv.hpp"
#include "nowcast/data/design.hpp"
#include "nowcast/data/observation.hpp"
#include "nowcast/data/recipe.hpp"
#include "nowcast/models/model.hpp"

namespace nowcast {

enum class ActualsVintage { first, latest };

inline std::string to_string(ActualsVintage v) {
  return v == ActualsVintage::first ? "first" : "latest";
}

inline std::optional<ActualsVintage> actuals_vintage_from_string(std::string_view s) {
  if (s == "first") return ActualsVintage::first;
  if (s == "latest") return ActualsVintage::latest;
  return std::nullopt;
}

struct EvaluationPlan {
  std::vector<Date> origins;  // strictly increasing forecast dates
  WindowPolicy window = WindowPolicy::expanding();
  Recipe recipe;
  std::vector<ModelSpec> portfolio;
  std::vector<std::string> benchmark_ids;  // parsimonious baselines, subset of portfolio ids
  ActualsVintage actuals = ActualsVintage::latest;
  double margin = 0.05;  // benchmark-domination margin

  void validate() const {
    if (origins.empty()) throw ValidationError("evaluation plan: no origins");
    for (std::size_t i = 1; i < origins.size(); ++i)
      if (!(origins[i - 1] < origins[i]))
        throw ValidationError("evaluation plan: origins must be strictly increasing");
    if (portfolio.empty()) throw ValidationError("evaluation plan: empty model portfolio");
    for (const auto& spec : portfolio) spec.validate();
    for (const auto& id : benchmark_ids) {
      bool known = false;
      for (const auto& spec : portfolio) known = known || spec.id() == id;
      if (!known) throw ValidationError("evaluation plan: benchmark id not in portfolio: " + id);
    }
    if (margin < 0.0) throw ValidationError("evaluation plan: margin must be >= 0");
  }
};

struct ForecastRecord {
  Date origin;
  Period nowcast_period;
  std::string model_id;
  bool skipped = false;
  std::string skip_reason;
  double forecast = std::numeric_limits<double>::quiet_NaN();
  std::string design_digest;  // empty when assembly itself failed
};

/// One origin: snapshot -> design -> fit -> predict for every portfolio
/// member. Origin-level assembly failures skip every model with the reason
/// recorded; model-level fit failures skip just that model.
inline std::vector<ForecastRecord> run_origin(const EvaluationPlan& plan,
                                              const ObservationLog& log, const Date& origin) {
  std::vector<ForecastRecord> out;
  auto skip_all = [&](const std::string& reason) {
    for (const auto& spec : plan.portfolio) {
      ForecastRecord r;
      r.origin = origin;
      r.nowcast_period = Period::quarter_of(origin);
      r.model_id = spec.id();
      r.skipped = true;
      r.skip_reason = reason;
      out.push_back(std::move(r));
    }
  };
  DesignMatrix design;
  try {
    Snapshot snap = log.snapshot_at(origin);
    design = assemble_design(snap, plan.recipe, origin, plan.window);
  } catch (const ValidationError& e) {
    skip_all(e.what());
    return out;
  } catch (const FitError& e) {
    skip_all(e.what());
    return out;
  }
  const std::string digest = design.data_digest();
  for (const auto& spec : plan.portfolio) {
    ForecastRecord r;
    r.origin = origin;
    r.nowcast_period = design.nowcast_period;
    r.model_id = spec.id();
    r.design_digest = digest;
    try {
      FittedModel m = fit(spec, design);
      r.forecast = predict_design(m, design);
      if (!std::isfinite(r.forecast)) throw FitError("non-finite forecast");
    } catch (const FitError& e) {
      r.skipped = true;
      r.skip_reason = e.what();
    } catch (const ValidationError& e) {
      r.skipped = true;
      r.skip_reason = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ForecastRecord> run_walk_forward(const EvaluationPlan& plan,
                                                    const ObservationLog& log) {
  plan.validate();
  std::vector<ForecastRecord> out;
  for (const auto& origin : plan.origins) {
    auto records = run_origin(plan, log, origin);
    out.insert(out.end(), records.begin(), records.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Actual outcomes.

namespace detail {

inline int target_diff_depth(const Recipe& recipe) {
  int k = 0;
  for (const auto& step : recipe.target.chain)
    if (step.kind == TransformStep::Kind::diff || step.kind == TransformStep::Kind::pct_change)
      ++k;
  return k;
}

/// Periods of the target series whose publication feeds the transformed
/// value for quarter `q` (the quarter itself plus one predecessor per
/// differencing step; months thereof for monthly sources).
inline std::vector<Period> target_source_periods(const Recipe& recipe, const ObservationLog& log,
                                                 const Period& q) {
  const int k = target_diff_depth(recipe);
  auto freq = log.series_frequency(recipe.target.series);
  std::vector<Period> out;
  for (int back = k; back >= 0; --back) {
    const Period quarter = q.plus(-back);
    if (freq && *freq == Frequency::monthly) {
      const Period first_month{Frequency::monthly, quarter.year, (quarter.index - 1) * 3 + 1};
      for (int m = 0; m < 3; ++m) out.push_back(first_month.plus(m));
    } else {
      out.push_back(quarter);
    }
  }
  return out;
}

}  // namespace detail

/// Date at which the transformed target value for quarter `q` first became
/// computable, i.e. the latest first-release over every source period it
/// consumes. Empty when any source period was never published.
inline std::optional<Date> target_first_release(const Recipe& recipe, const ObservationLog& log,
                                                const Period& q) {
  std::optional<Date> latest;
  for (const auto& p : detail::target_source_periods(recipe, log, q)) {
    auto d = log.first_release_date(recipe.target.series, p);
    if (!d) return std::nullopt;
    if (!latest || *d > *latest) latest = *d;
  }
  return latest;
}

/// Realized transformed target for quarter `q` under the chosen vintage.
inline std::optional<double> target_actual(const Recipe& recipe, const ObservationLog& log,
                                           const Period& q, ActualsVintage vintage) {
  std::optional<Date> as_of;
  if (vintage == ActualsVintage::first) {
    as_of = target_first_release(recipe, log, q);
  } else {
    as_of = log.latest_publication_date();
  }
  if (!as_of) return std::nullopt;
  Snapshot snap = log.snapshot_at(*as_of);
  SeriesVector raw = detail::visible_series(snap, recipe.target.series, *as_of);
  if (raw.empty()) return std::nullopt;
  if (raw.front().period.freq == Frequency::monthly)
    raw = aggregate_to_quarterly(raw, AggregationRule::mean, recipe.partial_quarters);
  SeriesVector t = apply_chain(std::move(raw), recipe.target.chain).series;
  for (const auto& pt : t)
    if (pt.period == q) return pt.value;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Loss accounting.

enum class LossKind { squared, absolute };

inline std::string to_string(LossKind k) {
  return k == LossKind::squared ? "squared" : "absolute";
}

struct LossSummary {
  std::string model_id;
  double rmsfe = 0.0;
  double mafe = 0.0;
  std::size_t n = 0;  // resolved, non-skipped origins
};

struct LossTable {
  std::vector<Date> origins;          // origins with a resolved actual
  std::vector<Period> periods;        // nowcast quarter per origin
  Vec actuals;                        // realized target per origin
  std::vector<std::string> model_ids;
  Matrix sqerr;   // model x origin; NaN where skipped
  Matrix abserr;  // model x origin; NaN where skipped
  std::vector<LossSummary> summary;

  [[nodiscard]] std::optional<std::size_t> model_index(const std::string& id) const {
    for (std::size_t i = 0; i < model_ids.size(); ++i)
      if (model_ids[i] == id) return i;
    return std::nullopt;
  }
};

/// Realized losses for every origin whose actual outcome has been published.
/// Skipped forecasts stay as NaN gaps; losses are never imputed.
inline LossTable compute_losses(const EvaluationPlan& plan,
                                const std::vector<ForecastRecord>& records,
                                const ObservationLog& log) {
  LossTable table;
  for (const auto& spec : plan.portfolio) table.model_ids.push_back(spec.id());

  std::vector<std::size_t> kept;  // indices into plan.origins
  std::map<Period, double> actual_cache;
  for (std::size_t oi = 0; oi < plan.origins.size(); ++oi) {
    const Period q = Period::quarter_of(plan.origins[oi]);
    auto it = actual_cache.find(q);
    if (it == actual_cache.end()) {
      auto a = target_actual(plan.recipe, log, q, plan.actuals);
      if (!a) continue;
      it = actual_cache.emplace(q, *a).first;
    }
    kept.push_back(oi);
    table.origins.push_back(plan.origins[oi]);
    table.periods.push_back(q);
    table.actuals.push_back(it->second);
  }
  if (table.origins.empty())
    throw ValidationError("compute_losses: no origin has a published actual outcome");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  table.sqerr = Matrix(table.model_ids.size(), table.origins.size(), nan);
  table.abserr = Matrix(table.model_ids.size(), table.origins.size(), nan);

  std::map<std::pair<std::string, std::string>, const ForecastRecord*> by_key;
  for (const auto& r : records) by_key[{r.model_id, r.origin.str()}] = &r;

  for (std::size_t mi = 0; mi < table.model_ids.size(); ++mi) {
    for (std::size_t ci = 0; ci < table.origins.size(); ++ci) {
      auto it = by_key.find({table.model_ids[mi], table.origins[ci].str()});
      if (it == by_key.end() || it->second->skipped) continue;
      const double e = it->second->forecast - table.actuals[ci];
      table.sqerr(mi, ci) = e * e;
      table.abserr(mi, ci) = std::abs(e);
    }
  }

  for (std::size_t mi = 0; mi < table.model_ids.size(); ++mi) {
    LossSummary s;
    s.model_id = table.model_ids[mi];
    double sq = 0.0, ab = 0.0;
    for (std::size_t ci = 0; ci < table.origins.size(); ++ci) {
      if (std::isnan(table.sqerr(mi, ci))) continue;
      sq += table.sqerr(mi, ci);
      ab += table.abserr(mi, ci);
      ++s.n;
    }
    if (s.n > 0) {
      s.rmsfe = std::sqrt(sq / static_cast<double>(s.n));
      s.mafe = ab / static_cast<double>(s.n);
    }
    table.summary.push_back(std::move(s));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Benchmark-domination filter.

enum class FilterFlag { retained, flagged };

/// Conjunctive domination rule: a model is flagged only when it loses to the
/// best benchmark on RMSFE and on MAFE, both beyond the margin. Benchmarks
/// themselves are never flagged.
inline std::map<std::string, FilterFlag> benchmark_filter(const LossTable& table,
                                                          const std::vector<std::string>& benchmark_ids,
                                                          double margin = 0.05) {
  if (table.summary.empty()) throw ValidationError("benchmark_filter: empty loss table");
  if (margin < 0.0) throw ValidationError("benchmark_filter: margin must be >= 0");
  double best_rmsfe = std::numeric_limits<double>::infinity();
  double best_mafe = std::numeric_limits<double>::infinity();
  bool any_benchmark = false;
  for (const auto& s : table.summary) {
    for (const auto& id : benchmark_ids) {
      if (s.model_id != id || s.n == 0) continue;
      any_benchmark = true;
      best_rmsfe = std::min(best_rmsfe, s.rmsfe);
      best_mafe = std::min(best_mafe, s.mafe);
    }
  }
  if (!any_benchmark)
    throw ValidationError("benchmark_filter: no benchmark model has realized losses");

  std::map<std::string, FilterFlag> out;
  for (const auto& s : table.summary) {
    bool is_benchmark = false;
    for (const auto& id : benchmark_ids) is_benchmark = is_benchmark || id == s.model_id;
    const bool dominated = s.n > 0 && s.rmsfe > (1.0 + margin) * best_rmsfe &&
                           s.mafe > (1.0 + margin) * best_mafe;
    out[s.model_id] = (!is_benchmark && dominated) ? FilterFlag::flagged : FilterFlag::retained;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leakage audit across every origin of a plan.

struct OriginAudit {
  Date origin;
  bool assembled = false;
  std::string assembly_error;  // when not assembled
  std::vector<LeakageViolation> violations;
};

struct AuditVerdict {
  std::vector<OriginAudit> origins;

  [[nodiscard]] bool clean() const {
    for (const auto& o : origins)
      if (!o.violations.empty()) return false;
    return true;
  }
  [[nodiscard]] std::size_t violation_count() const {
    std::size_t n = 0;
    for (const auto& o : origins) n += o.violations.size();
    return n;
  }
};

inline AuditVerdict leakage_audit(const EvaluationPlan& plan, const ObservationLog& log) {
  plan.validate();
  AuditVerdict verdict;
  for (const auto& origin : plan.origins) {
    OriginAudit oa;
    oa.origin = origin;
    try {
      // audit under the full log horizon so fault recipes peeking past the
      // origin have data to peek at, exactly as a corrupted run would
      Date as_of = origin;
      if (auto latest = log.latest_publication_date(); latest && *latest > as_of) {
        for (const auto& f : plan.recipe.features)
          if (f.fault_peek_days > 0) as_of = *latest;
      }
      Snapshot snap = log.snapshot_at(as_of);
      DesignMatrix d = assemble_design(snap, plan.recipe, origin, plan.window);
      oa.assembled = true;
      oa.violations = audit_design(d);
    } catch (const ValidationError& e) {
      oa.assembly_error = e.what();
    } catch (const FitError& e) {
      oa.assembly_error = e.what();
    }
    verdict.origins.push_back(std::move(oa));
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// CSV export for external audit.

inline std::string loss_table_csv(const LossTable& table) {
  std::string out = "model,origin,nowcast_period,actual,sqerr,abserr\n";
  for (std::size_t mi = 0; mi < table.model_ids.size(); ++mi) {
    for (std::size_t ci = 0; ci < table.origins.size(); ++ci) {
      if (std::isnan(table.sqerr(mi, ci))) continue;
      out += csv_join({table.model_ids[mi], table.origins[ci].str(), table.periods[ci].str(),
                       format_double(table.actuals[ci]), format_double(table.sqerr(mi, ci)),
                       format_double(table.abserr(mi, ci))});
      out += '\n';
    }
  }
  return out;
}

inline std::string forecast_records_csv(const std::vector<ForecastRecord>& records) {
  std::string out = "model,origin,nowcast_period,skipped,forecast,skip_reason,design_digest\n";
  for (const auto& r : records) {
    out += csv_join({r.model_id, r.origin.str(), r.nowcast_period.str(),
                     r.skipped ? "1" : "0", r.skipped ? "" : format_double(r.forecast),
                     r.skip_reason, r.design_digest});
    out += '\n';
  }
  return out;
}

}  // namespace nowcast
