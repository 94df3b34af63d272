#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/core/calendar.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/core/rng.hpp"
#include "nowcast/data/observation.hpp"

namespace nowcast {

inline constexpr std::uint64_t kDgpStream = 0x44475053u;
inline constexpr std::uint64_t kDgpRevStream = 0x44525653u;

// Substream indices under kDgpStream. Each component draws from its own
// stream so adding predictors never perturbs the target path.
namespace dgp_stream {
inline constexpr std::uint64_t target = 0;
inline constexpr std::uint64_t panel = 1;
inline constexpr std::uint64_t loadings = 2;
inline constexpr std::uint64_t factors = 3;
}  // namespace dgp_stream

enum class DgpKind { ar1, sparse_linear, factor_panel, regime_break };

inline std::string to_string(DgpKind k) {
  switch (k) {
    case DgpKind::ar1: return "ar1";
    case DgpKind::sparse_linear: return "sparse_linear";
    case DgpKind::factor_panel: return "factor_panel";
    case DgpKind::regime_break: return "regime_break";
  }
  return "ar1";
}

inline std::optional<DgpKind> dgp_kind_from_string(std::string_view s) {
  if (s == "ar1") return DgpKind::ar1;
  if (s == "sparse_linear") return DgpKind::sparse_linear;
  if (s == "factor_panel") return DgpKind::factor_panel;
  if (s == "regime_break") return DgpKind::regime_break;
  return std::nullopt;
}

struct Ar1Params {
  double phi = 0.8;
  double sigma = 1.0;
};

struct SparseLinearParams {
  std::size_t p = 20;   // predictors emitted
  std::size_t s = 5;    // active support size
  double beta = 1.0;    // magnitude of active coefficients, alternating sign
  double sigma = 0.5;   // target noise sd
};

struct FactorPanelParams {
  std::size_t r = 2;           // latent factors
  std::size_t p = 20;          // observed predictors
  double factor_phi = 0.7;     // AR(1) persistence of each factor
  double loading_sigma = 1.0;  // sd of Gaussian loadings
  double idio_sigma = 0.5;     // idiosyncratic noise sd (panel and target)
};

struct RegimeBreakParams {
  Period break_period{Frequency::quarterly, 2000, 1};  // first post-break period
  Ar1Params pre, post;
};

struct DGPSpec {
  DgpKind kind = DgpKind::ar1;
  std::size_t n = 200;  // length in quarters
  std::uint64_t seed = 0;
  Period start{Frequency::quarterly, 1990, 1};
  std::string target_name = "y";
  Ar1Params ar1;
  SparseLinearParams sparse;
  FactorPanelParams factor;
  RegimeBreakParams regime;
};

/// Everything an oracle needs: true coefficients and support for the sparse
/// design, factor paths and loadings for the panel, regime parameters and
/// break location for the break process.
struct GroundTruth {
  Vec beta;
  std::vector<std::size_t> support;
  Matrix factors;   // n x r
  Matrix loadings;  // p x r
  std::optional<Period> break_period;
  Ar1Params pre, post;
};

struct SimulatedData {
  DGPSpec spec;
  std::vector<Period> periods;
  Vec target;
  std::vector<std::string> predictor_names;
  Matrix predictors;  // n x p, zero columns for target-only processes
  GroundTruth truth;
};

namespace detail {

constexpr std::size_t kAr1Burn = 100;

inline void validate_ar1(const Ar1Params& a, const std::string& where) {
  if (!(std::abs(a.phi) < 1.0))
    throw ValidationError(where + ": |phi| must be < 1 for a stationary ar1, got " +
                          format_double(a.phi));
  if (!(a.sigma >= 0.0) || !std::isfinite(a.sigma))
    throw ValidationError(where + ": sigma must be a finite non-negative number");
}

/// One AR(1) path with a fixed burn-in. Parameters may change per index, which
/// is how the regime break reuses this: the innovation stream is identical, so
/// identical pre/post parameters reproduce the plain ar1 path bit for bit.
template <typename ParamsAt>
Vec ar1_path(std::size_t n, Rng& rng, ParamsAt params_at) {
  Vec y(n);
  double prev = 0.0;
  const Ar1Params first = params_at(std::size_t{0});
  for (std::size_t t = 0; t < kAr1Burn; ++t)
    prev = first.phi * prev + first.sigma * rng.next_gaussian();
  for (std::size_t t = 0; t < n; ++t) {
    const Ar1Params a = params_at(t);
    prev = a.phi * prev + a.sigma * rng.next_gaussian();
    y[t] = prev;
  }
  return y;
}

}  // namespace detail

inline SimulatedData simulate(const DGPSpec& spec) {
  if (spec.n == 0) throw ValidationError("simulate: n must be positive");
  if (spec.start.freq != Frequency::quarterly)
    throw ValidationError("simulate: the target grid is quarterly");

  SimulatedData sim;
  sim.spec = spec;
  for (std::size_t i = 0; i < spec.n; ++i)
    sim.periods.push_back(spec.start.plus(static_cast<std::int64_t>(i)));

  Rng target_rng = Rng::keyed(spec.seed, {kDgpStream, dgp_stream::target});
  Rng panel_rng = Rng::keyed(spec.seed, {kDgpStream, dgp_stream::panel});

  switch (spec.kind) {
    case DgpKind::ar1: {
      detail::validate_ar1(spec.ar1, "simulate(ar1)");
      sim.target = detail::ar1_path(spec.n, target_rng, [&](std::size_t) { return spec.ar1; });
      sim.predictors = Matrix(spec.n, 0);
      sim.truth.pre = sim.truth.post = spec.ar1;
      break;
    }
    case DgpKind::regime_break: {
      detail::validate_ar1(spec.regime.pre, "simulate(regime_break) pre");
      detail::validate_ar1(spec.regime.post, "simulate(regime_break) post");
      if (spec.regime.break_period.freq != Frequency::quarterly)
        throw ValidationError("simulate(regime_break): break period must be quarterly");
      if (spec.regime.break_period <= spec.start ||
          sim.periods.back() < spec.regime.break_period)
        throw ValidationError("simulate(regime_break): break period " +
                              spec.regime.break_period.str() + " must fall inside (" +
                              spec.start.str() + ", " + sim.periods.back().str() + "]");
      const auto break_idx =
          static_cast<std::size_t>(spec.regime.break_period.minus(spec.start));
      sim.target = detail::ar1_path(spec.n, target_rng, [&](std::size_t t) {
        return t < break_idx ? spec.regime.pre : spec.regime.post;
      });
      sim.predictors = Matrix(spec.n, 0);
      sim.truth.break_period = spec.regime.break_period;
      sim.truth.pre = spec.regime.pre;
      sim.truth.post = spec.regime.post;
      break;
    }
    case DgpKind::sparse_linear: {
      const auto& sp = spec.sparse;
      if (sp.p == 0) throw ValidationError("simulate(sparse_linear): p must be positive");
      if (sp.s > sp.p)
        throw ValidationError("simulate(sparse_linear): support size s exceeds p");
      if (!(sp.sigma >= 0.0) || !std::isfinite(sp.sigma) || !std::isfinite(sp.beta))
        throw ValidationError("simulate(sparse_linear): beta and sigma must be finite, sigma >= 0");
      sim.predictors = Matrix(spec.n, sp.p);
      for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t j = 0; j < sp.p; ++j) sim.predictors(i, j) = panel_rng.next_gaussian();
      sim.truth.beta.assign(sp.p, 0.0);
      for (std::size_t j = 0; j < sp.s; ++j) {
        sim.truth.beta[j] = (j % 2 == 0 ? sp.beta : -sp.beta);
        sim.truth.support.push_back(j);
      }
      sim.target.resize(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < sp.p; ++j) v += sim.truth.beta[j] * sim.predictors(i, j);
        sim.target[i] = v + sp.sigma * target_rng.next_gaussian();
      }
      break;
    }
    case DgpKind::factor_panel: {
      const auto& fp = spec.factor;
      if (fp.r == 0 || fp.p == 0)
        throw ValidationError("simulate(factor_panel): r and p must be positive");
      if (!(std::abs(fp.factor_phi) < 1.0))
        throw ValidationError("simulate(factor_panel): |factor_phi| must be < 1");
      if (!(fp.loading_sigma >= 0.0) || !(fp.idio_sigma >= 0.0))
        throw ValidationError("simulate(factor_panel): sigmas must be non-negative");
      Rng factor_rng = Rng::keyed(spec.seed, {kDgpStream, dgp_stream::factors});
      Rng loading_rng = Rng::keyed(spec.seed, {kDgpStream, dgp_stream::loadings});
      sim.truth.factors = Matrix(spec.n, fp.r);
      for (std::size_t k = 0; k < fp.r; ++k) {
        Vec f = detail::ar1_path(spec.n, factor_rng,
                                 [&](std::size_t) { return Ar1Params{fp.factor_phi, 1.0}; });
        for (std::size_t i = 0; i < spec.n; ++i) sim.truth.factors(i, k) = f[i];
      }
      sim.truth.loadings = Matrix(fp.p, fp.r);
      for (std::size_t j = 0; j < fp.p; ++j)
        for (std::size_t k = 0; k < fp.r; ++k)
          sim.truth.loadings(j, k) = fp.loading_sigma * loading_rng.next_gaussian();
      sim.predictors = Matrix(spec.n, fp.p);
      for (std::size_t i = 0; i < spec.n; ++i)
        for (std::size_t j = 0; j < fp.p; ++j) {
          double v = 0.0;
          for (std::size_t k = 0; k < fp.r; ++k)
            v += sim.truth.loadings(j, k) * sim.truth.factors(i, k);
          sim.predictors(i, j) = v + fp.idio_sigma * panel_rng.next_gaussian();
        }
      sim.target.resize(spec.n);
      for (std::size_t i = 0; i < spec.n; ++i) {
        double v = 0.0;
        for (std::size_t k = 0; k < fp.r; ++k) v += sim.truth.factors(i, k);
        sim.target[i] = v + fp.idio_sigma * target_rng.next_gaussian();
      }
      break;
    }
  }
  for (std::size_t j = 0; j < sim.predictors.cols(); ++j)
    sim.predictor_names.push_back("x" + std::to_string(j));
  return sim;
}

// ---------------------------------------------------------------------------
// Publication calendar: the test-side mirror of vintage reconstruction.

struct RevisionScheme {
  bool enabled = false;
  int delay_days = 45;  // revision lands this many days after first release
  double sd = 0.1;      // Gaussian perturbation added to the first-release value
  std::uint64_t seed = 0;
};

/// Turns a simulated panel into a publication stream: each (series, period)
/// value is published at period end + per-series lag, optionally followed by
/// one revised value. Series absent from the lag map publish at lag 0. The
/// result is sorted by publication date and round-trips through the
/// observation CSV and ingestion.
inline std::vector<SeriesObservation> apply_publication_lags(
    const SimulatedData& sim, const std::map<std::string, int>& lag_days,
    const RevisionScheme& revisions = {}) {
  auto lag_of = [&](const std::string& series) {
    auto it = lag_days.find(series);
    const int lag = it == lag_days.end() ? 0 : it->second;
    if (lag < 0)
      throw ValidationError("apply_publication_lags: lag for series '" + series +
                            "' must be >= 0 days");
    return lag;
  };
  if (revisions.enabled) {
    if (revisions.delay_days < 1)
      throw ValidationError("apply_publication_lags: revision delay must be >= 1 day");
    if (!(revisions.sd >= 0.0) || !std::isfinite(revisions.sd))
      throw ValidationError("apply_publication_lags: revision sd must be finite and >= 0");
  }
  Rng rev_rng = Rng::keyed(revisions.seed, {kDgpRevStream});

  std::vector<SeriesObservation> out;
  auto emit = [&](const std::string& series, const Period& period, double value) {
    const Date first = period.last_date().plus_days(lag_of(series));
    out.push_back(SeriesObservation{series, period, value, first});
    if (revisions.enabled)
      out.push_back(SeriesObservation{series, period,
                                      value + revisions.sd * rev_rng.next_gaussian(),
                                      first.plus_days(revisions.delay_days)});
  };
  for (std::size_t i = 0; i < sim.periods.size(); ++i) {
    emit(sim.spec.target_name, sim.periods[i], sim.target[i]);
    for (std::size_t j = 0; j < sim.predictors.cols(); ++j)
      emit(sim.predictor_names[j], sim.periods[i], sim.predictors(i, j));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SeriesObservation& a, const SeriesObservation& b) {
                     if (a.published_at != b.published_at) return a.published_at < b.published_at;
                     if (a.series_id != b.series_id) return a.series_id < b.series_id;
                     return a.ref_period < b.ref_period;
                   });
  return out;
}

}  // namespace nowcast
