#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/core/rng.hpp"
#include "nowcast/eval/walkforward.hpp"
#include "nowcast/models/model.hpp"

namespace nowcast {

enum class BootstrapScheme { moving_block, stationary };
enum class ResampleUnit { observed_row_vectors, residuals };
enum class InnovationMode { resample_residual, none };

inline std::string to_string(BootstrapScheme s) {
  return s == BootstrapScheme::moving_block ? "moving_block" : "stationary";
}
inline std::string to_string(ResampleUnit u) {
  return u == ResampleUnit::observed_row_vectors ? "observed_row_vectors" : "residuals";
}
inline std::string to_string(InnovationMode m) {
  return m == InnovationMode::resample_residual ? "resample_residual" : "none";
}

/// Default block length when none is configured: ceil(n^(1/3)), computed in
/// integers so perfect cubes do not fall prey to libm rounding.
inline int default_block_length(std::size_t n) {
  int L = 1;
  while (static_cast<std::size_t>(L) * static_cast<std::size_t>(L) * static_cast<std::size_t>(L) <
         n)
    ++L;
  return L;
}

struct BlockBootstrapConfig {
  BootstrapScheme scheme = BootstrapScheme::moving_block;
  int block_length = 0;       // 0 resolves to default_block_length(n)
  double restart_prob = 0.0;  // stationary scheme; 0 resolves to 1/block_length
  int replicates = 200;
  std::uint64_t seed = 0;
  ResampleUnit unit = ResampleUnit::observed_row_vectors;
  // Each replicate forecast adds one centered draw from the refit model's
  // in-sample residuals, so intervals carry innovation noise on top of
  // parameter uncertainty. Disable to study pure estimation spread (then a
  // single identity resample reproduces the point forecast exactly).
  InnovationMode innovation = InnovationMode::resample_residual;
};

inline constexpr std::uint64_t kBootStream = 0x424f4f54u;

// ---------------------------------------------------------------------------
// Resampling schemes. Both return row indices so callers can carry whole
// (predictor row, target) pairs jointly.

/// ceil(n/L) contiguous blocks, each starting uniformly in [0, n-L],
/// concatenated and truncated to length n.
inline std::vector<std::size_t> moving_block_indices(std::size_t n, int L, Rng& rng) {
  if (n == 0) throw ValidationError("moving_block: empty input");
  if (L < 1 || static_cast<std::size_t>(L) > n)
    throw ValidationError("moving_block: block length must lie in [1, n]");
  std::vector<std::size_t> out;
  out.reserve(n);
  const std::size_t span = n - static_cast<std::size_t>(L) + 1;
  while (out.size() < n) {
    const std::size_t start = rng.next_below(span);
    for (int j = 0; j < L && out.size() < n; ++j) out.push_back(start + static_cast<std::size_t>(j));
  }
  return out;
}

/// Politis-Romano stationary scheme: with probability p restart at a uniform
/// index, otherwise continue circularly from the previous index.
inline std::vector<std::size_t> stationary_indices(std::size_t n, double p, Rng& rng) {
  if (n == 0) throw ValidationError("stationary: empty input");
  if (!(p > 0.0 && p <= 1.0))
    throw ValidationError("stationary: restart probability must lie in (0,1]");
  std::vector<std::size_t> out;
  out.reserve(n);
  std::size_t idx = rng.next_below(n);
  out.push_back(idx);
  while (out.size() < n) {
    if (rng.next_double() < p)
      idx = rng.next_below(n);
    else
      idx = (idx + 1) % n;
    out.push_back(idx);
  }
  return out;
}

inline Matrix rows_at(const Matrix& x, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.set_row(i, x.row(idx[i]));
  return out;
}

inline Vec values_at(const Vec& v, const std::vector<std::size_t>& idx) {
  Vec out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

/// Spec-level convenience: resample whole rows of a panel.
inline Matrix moving_block_resample(const Matrix& rows, int L, Rng& rng) {
  return rows_at(rows, moving_block_indices(rows.rows(), L, rng));
}

inline Matrix stationary_resample(const Matrix& rows, double p, Rng& rng) {
  return rows_at(rows, stationary_indices(rows.rows(), p, rng));
}

// ---------------------------------------------------------------------------
// Replicate forecasts.

/// In-sample one-step fitted values; rows the model cannot reach (starting
/// lags, sequence warm-up) carry zero residual by construction.
inline Vec in_sample_fitted(const FittedModel& m, const Matrix& x, const Vec& y) {
  const std::size_t n = y.size();
  Vec fitted(n);
  if (std::holds_alternative<RwModel>(m.payload)) {
    const auto& rw = std::get<RwModel>(m.payload);
    fitted[0] = y[0];
    for (std::size_t i = 1; i < n; ++i) fitted[i] = y[i - 1] + rw.drift;
  } else if (std::holds_alternative<ArModel>(m.payload)) {
    const auto& ar = std::get<ArModel>(m.payload);
    const std::size_t p = ar.phi.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i < p) {
        fitted[i] = y[i];
        continue;
      }
      double v = ar.intercept;
      for (std::size_t j = 0; j < p; ++j) v += ar.phi[j] * y[i - 1 - j];
      fitted[i] = v;
    }
  } else if (std::holds_alternative<GruModel>(m.payload)) {
    const auto& gru = std::get<GruModel>(m.payload);
    const std::size_t L = static_cast<std::size_t>(gru.seq_len);
    for (std::size_t i = 0; i < n; ++i) {
      if (i + 1 < L) {
        fitted[i] = y[i];
        continue;
      }
      std::vector<Vec> seq;
      for (std::size_t t = i + 1 - L; t <= i; ++t) {
        const auto row = x.row(t);
        seq.emplace_back(row.begin(), row.end());
      }
      fitted[i] = gru.predict_sequence(seq);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) fitted[i] = predict_row(m, x.row(i));
  }
  return fitted;
}

struct ReplicateSet {
  Vec forecasts;                      // successful replicates, in replicate order
  std::vector<std::string> failures;  // recorded reasons for excluded replicates
  int requested = 0;
  double point = std::numeric_limits<double>::quiet_NaN();
  BlockBootstrapConfig resolved;  // config with block length / restart prob resolved
};

/// B forecasts, each from a full re-fit of the model on one resampled
/// trajectory of the leakage-guarded design, with replicate-indexed seeds.
/// Failed replicates are recorded and excluded; more than 10% failures is an
/// operation error.
inline ReplicateSet bootstrap_forecast(const DesignMatrix& design, const ModelSpec& spec,
                                       const BlockBootstrapConfig& config) {
  if (config.replicates < 1) throw ValidationError("bootstrap: replicates must be >= 1");
  const std::size_t n = design.n_rows();
  if (n == 0) throw ValidationError("bootstrap: empty design");

  ReplicateSet out;
  out.requested = config.replicates;
  out.resolved = config;
  if (out.resolved.block_length == 0) out.resolved.block_length = default_block_length(n);
  if (out.resolved.block_length < 1 || static_cast<std::size_t>(out.resolved.block_length) > n)
    throw ValidationError("bootstrap: block length must lie in [1, n]");
  if (out.resolved.restart_prob == 0.0)
    out.resolved.restart_prob = 1.0 / static_cast<double>(out.resolved.block_length);

  FittedModel base = fit(spec, design);
  out.point = predict_design(base, design);

  Vec base_fitted, base_residuals;
  if (config.unit == ResampleUnit::residuals) {
    base_fitted = in_sample_fitted(base, design.X, design.y);
    base_residuals.resize(n);
    for (std::size_t i = 0; i < n; ++i) base_residuals[i] = design.y[i] - base_fitted[i];
    const double m = mean(base_residuals);
    for (auto& e : base_residuals) e -= m;
  }

  for (int b = 0; b < config.replicates; ++b) {
    Rng rng = Rng::keyed(config.seed, {kBootStream, static_cast<std::uint64_t>(b)});
    try {
      std::vector<std::size_t> idx =
          out.resolved.scheme == BootstrapScheme::moving_block
              ? moving_block_indices(n, out.resolved.block_length, rng)
              : stationary_indices(n, out.resolved.restart_prob, rng);

      DesignMatrix d = design;
      if (config.unit == ResampleUnit::observed_row_vectors) {
        d.X = rows_at(design.X, idx);
        d.y = values_at(design.y, idx);
      } else {
        Vec shocks = values_at(base_residuals, idx);
        for (std::size_t i = 0; i < n; ++i) d.y[i] = base_fitted[i] + shocks[i];
      }

      ModelSpec replicate_spec = spec;
      std::uint64_t seed_state = config.seed ^ (0x5245504cu + static_cast<std::uint64_t>(b));
      replicate_spec.seed = splitmix64(seed_state);
      FittedModel refit = fit(replicate_spec, d);
      double f = predict_design(refit, d);

      if (config.innovation == InnovationMode::resample_residual) {
        Vec fitted = in_sample_fitted(refit, d.X, d.y);
        Vec resid(n);
        for (std::size_t i = 0; i < n; ++i) resid[i] = d.y[i] - fitted[i];
        const double m = mean(resid);
        f += resid[rng.next_below(n)] - m;
      }
      if (!std::isfinite(f)) throw FitError("non-finite replicate forecast");
      out.forecasts.push_back(f);
    } catch (const FitError& e) {
      out.failures.push_back("replicate " + std::to_string(b) + ": " + e.what());
    } catch (const ValidationError& e) {
      out.failures.push_back("replicate " + std::to_string(b) + ": " + e.what());
    }
  }

  if (10 * out.failures.size() > static_cast<std::size_t>(config.replicates))
    throw FitError("bootstrap: " + std::to_string(out.failures.size()) + " of " +
                   std::to_string(config.replicates) + " replicates failed (over 10%); first: " +
                   out.failures.front());
  return out;
}

// ---------------------------------------------------------------------------
// Percentile intervals.

struct PredictionInterval {
  Date origin;
  double alpha = 0.10;
  double lower = 0.0;
  double upper = 0.0;
  double point = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<double, double>> distribution_summary;  // (probability, quantile)
  std::string quantile_convention = "linear interpolation between order statistics (R type 7)";
};

inline PredictionInterval percentile_interval(const Vec& replicates, double alpha,
                                              const Date& origin = Date{},
                                              double point = std::numeric_limits<double>::quiet_NaN()) {
  if (replicates.empty()) throw ValidationError("percentile_interval: no replicates");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("percentile_interval: alpha must lie in (0,1)");
  if (alpha <= 0.10 && replicates.size() < 20)
    throw ValidationError("percentile_interval: alpha <= 0.1 needs at least 20 replicates, got " +
                          std::to_string(replicates.size()));
  PredictionInterval out;
  out.origin = origin;
  out.alpha = alpha;
  out.point = point;
  out.lower = quantile_linear(replicates, alpha / 2.0);
  out.upper = quantile_linear(replicates, 1.0 - alpha / 2.0);
  for (double p : {0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99})
    out.distribution_summary.emplace_back(p, quantile_linear(replicates, p));
  return out;
}

// ---------------------------------------------------------------------------
// Coverage diagnostics.

struct CoverageReport {
  double nominal = 0.0;
  double empirical = 0.0;
  double mean_width = 0.0;
  Vec width_series;
  Vec asymmetry;  // (point - lower) / (upper - point); NaN when degenerate
  std::size_t resolved = 0;
};

inline CoverageReport coverage_report(const std::vector<PredictionInterval>& intervals,
                                      const Vec& actuals) {
  if (intervals.empty() || intervals.size() != actuals.size())
    throw ValidationError("coverage_report: need one actual per interval");
  CoverageReport r;
  r.nominal = 1.0 - intervals.front().alpha;
  r.resolved = intervals.size();
  std::size_t hits = 0;
  double width_sum = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    if (actuals[i] >= iv.lower && actuals[i] <= iv.upper) ++hits;
    const double w = iv.upper - iv.lower;
    width_sum += w;
    r.width_series.push_back(w);
    const double up = iv.upper - iv.point;
    r.asymmetry.push_back(up == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                                    : (iv.point - iv.lower) / up);
  }
  r.empirical = static_cast<double>(hits) / static_cast<double>(intervals.size());
  r.mean_width = width_sum / static_cast<double>(intervals.size());
  return r;
}

// ---------------------------------------------------------------------------
// Block-length sensitivity sweep.

struct SweepRow {
  int length = 0;
  double mean_width = 0.0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  std::size_t resolved = 0;  // origins with a published actual
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::pair<int, int>> flagged_pairs;  // adjacent lengths diverging > 25% in width

  [[nodiscard]] bool flagged() const { return !flagged_pairs.empty(); }
};

/// Interval width and realized coverage per candidate block length over the
/// plan's origins. No automatic selection: the table is for the analyst, with
/// adjacent lengths flagged when mean widths disagree by more than 25%.
inline SweepResult block_length_sweep(const EvaluationPlan& plan, const ObservationLog& log,
                                      const ModelSpec& spec, const std::vector<int>& lengths,
                                      BlockBootstrapConfig config, double alpha = 0.10) {
  if (lengths.empty()) throw ValidationError("block_length_sweep: no candidate lengths");
  if (plan.origins.empty()) throw ValidationError("block_length_sweep: no origins");
  spec.validate();

  // assemble designs once; a length is admissible when every origin can host it
  std::vector<DesignMatrix> designs;
  std::vector<std::optional<double>> actuals;
  std::size_t min_rows = std::numeric_limits<std::size_t>::max();
  for (const auto& origin : plan.origins) {
    Snapshot snap = log.snapshot_at(origin);
    DesignMatrix d = assemble_design(snap, plan.recipe, origin, plan.window);
    min_rows = std::min(min_rows, d.n_rows());
    actuals.push_back(target_actual(plan.recipe, log, d.nowcast_period, plan.actuals));
    designs.push_back(std::move(d));
  }
  std::vector<int> admissible;
  for (int L : lengths)
    if (L >= 1 && static_cast<std::size_t>(L) <= min_rows) admissible.push_back(L);
  if (admissible.empty())
    throw ValidationError("block_length_sweep: no admissible block length for " +
                          std::to_string(min_rows) + " training rows");

  SweepResult out;
  for (int L : admissible) {
    BlockBootstrapConfig c = config;
    c.block_length = L;
    c.restart_prob = 0.0;  // re-derive from L for the stationary scheme
    SweepRow row;
    row.length = L;
    double width_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t oi = 0; oi < designs.size(); ++oi) {
      ReplicateSet reps = bootstrap_forecast(designs[oi], spec, c);
      PredictionInterval iv =
          percentile_interval(reps.forecasts, alpha, plan.origins[oi], reps.point);
      width_sum += iv.upper - iv.lower;
      if (actuals[oi]) {
        ++row.resolved;
        if (*actuals[oi] >= iv.lower && *actuals[oi] <= iv.upper) ++hits;
      }
    }
    row.mean_width = width_sum / static_cast<double>(designs.size());
    if (row.resolved > 0)
      row.coverage = static_cast<double>(hits) / static_cast<double>(row.resolved);
    out.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < out.rows.size(); ++i) {
    const double a = out.rows[i].mean_width, b = out.rows[i + 1].mean_width;
    const double lo = std::min(a, b);
    const bool diverge = lo > 0.0 ? std::abs(a - b) / lo > 0.25 : a != b;
    if (diverge) out.flagged_pairs.emplace_back(out.rows[i].length, out.rows[i + 1].length);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV export.

inline std::string replicates_csv(const ReplicateSet& reps) {
  std::string out = "replicate,forecast\n";
  for (std::size_t i = 0; i < reps.forecasts.size(); ++i)
    out += std::to_string(i) + "," + format_double(reps.forecasts[i]) + "\n";
  return out;
}

inline std::string interval_csv(const std::vector<PredictionInterval>& intervals) {
  std::string out = "origin,alpha,lower,point,upper\n";
  for (const auto& iv : intervals) {
    out += csv_join({iv.origin.str(), format_double(iv.alpha), format_double(iv.lower),
                     format_double(iv.point), format_double(iv.upper)});
    out += '\n';
  }
  return out;
}

}  // namespace nowcast
