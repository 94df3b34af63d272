#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "nowcast/uq/bootstrap.hpp"

namespace nowcast {

enum class AttributionMethod { coefficients, vip, permutation, tree_shap, integrated_gradients };

inline std::string to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::coefficients: return "coefficients";
    case AttributionMethod::vip: return "vip";
    case AttributionMethod::permutation: return "permutation";
    case AttributionMethod::tree_shap: return "tree_shap";
    case AttributionMethod::integrated_gradients: return "integrated_gradients";
  }
  return "coefficients";
}

/// One attribution of a model's behavior to its features. Additive local
/// methods (tree_shap, integrated_gradients, linear contributions) satisfy
/// base_value + sum(values) = prediction; global methods leave base_value NaN.
/// metadata must suffice to replay the computation bit-identically.
struct AttributionVector {
  Date origin;
  std::string model_id;
  AttributionMethod method = AttributionMethod::coefficients;
  std::vector<std::string> features;
  Vec values;
  Vec stderr_values;  // permutation only: standard error of each mean over repetitions
  double base_value = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, std::string> metadata;
};

inline std::string attribution_csv(const std::vector<AttributionVector>& rows) {
  std::string out = "origin,model,method,feature,value,base_value\n";
  for (const auto& a : rows)
    for (std::size_t j = 0; j < a.features.size(); ++j) {
      out += csv_join({a.origin.str(), a.model_id, to_string(a.method), a.features[j],
                       format_double(a.values[j]), format_double(a.base_value)});
      out += '\n';
    }
  return out;
}

namespace detail {

/// Original-feature coefficient view. Target-only families expose an all-zero
/// coefficient vector: they carry no feature weight by construction. Tree and
/// neural families have no such representation.
inline LinearModel coefficient_view(const FittedModel& m) {
  switch (m.spec.family) {
    case Family::ols:
    case Family::ridge:
    case Family::lasso:
    case Family::elastic_net: return std::get<LinearModel>(m.payload);
    case Family::pcr: return std::get<PcrModel>(m.payload).coef;
    case Family::plsr: return std::get<PlsrModel>(m.payload).coef;
    case Family::rw:
    case Family::rw_drift:
    case Family::ar: {
      LinearModel lm;
      lm.beta.assign(m.feature_names.size(), 0.0);
      lm.intercept = 0.0;
      return lm;
    }
    default:
      throw ValidationError("coefficient importance: family " + to_string(m.spec.family) +
                            " has no original-feature coefficient representation");
  }
}

}  // namespace detail

/// Global signed importance: coefficient times the training-window standard
/// deviation of its feature, putting all features on a comparable scale.
inline AttributionVector coefficient_importance(const FittedModel& m, const DesignMatrix& d) {
  LinearModel lm = detail::coefficient_view(m);
  AttributionVector a;
  a.origin = d.origin;
  a.model_id = m.spec.id();
  a.method = AttributionMethod::coefficients;
  a.features = m.feature_names.empty() ? d.feature_names() : m.feature_names;
  a.values.resize(a.features.size(), 0.0);
  for (std::size_t j = 0; j < lm.beta.size() && j < a.values.size(); ++j)
    a.values[j] = lm.beta[j] * std::sqrt(variance_population(d.X.col(j)));
  a.metadata["form"] = "standardized_global";
  return a;
}

/// Local additive decomposition of one linear prediction:
/// base = intercept, value_j = beta_j * x_j, base + sum = prediction exactly.
inline AttributionVector linear_contributions(const FittedModel& m, const DesignMatrix& d) {
  LinearModel lm = detail::coefficient_view(m);
  AttributionVector a;
  a.origin = d.origin;
  a.model_id = m.spec.id();
  a.method = AttributionMethod::coefficients;
  a.features = m.feature_names.empty() ? d.feature_names() : m.feature_names;
  a.values.resize(a.features.size(), 0.0);
  if (family_uses_features(m.spec.family)) {
    for (std::size_t j = 0; j < lm.beta.size(); ++j) a.values[j] = lm.beta[j] * d.x_now[j];
    a.base_value = lm.intercept;
  } else {
    a.base_value = predict_design(m, d);  // no feature carries weight
  }
  a.metadata["form"] = "local_contribution";
  return a;
}

/// Variable importance in projection for PLSR models; nonnegative, and the
/// squared scores sum to the number of predictors.
inline AttributionVector vip_importance(const FittedModel& m, const DesignMatrix& d) {
  if (m.spec.family != Family::plsr)
    throw ValidationError("vip: scores are defined only for plsr models");
  AttributionVector a;
  a.origin = d.origin;
  a.model_id = m.spec.id();
  a.method = AttributionMethod::vip;
  a.features = m.feature_names;
  a.values = vip_scores(std::get<PlsrModel>(m.payload));
  a.metadata["form"] = "standardized_global";
  return a;
}

inline constexpr std::uint64_t kPermStream = 0x5045524du;

namespace detail {

inline double eval_loss(const FittedModel& m, const Matrix& x, const Vec& y, LossKind kind) {
  Vec fitted = in_sample_fitted(m, x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - fitted[i];
    s += kind == LossKind::squared ? e * e : std::abs(e);
  }
  return s / static_cast<double>(y.size());
}

}  // namespace detail

/// Accuracy loss when one feature's link to the target is broken by shuffling
/// blocks of its values (within-block order preserved). Evaluation rows should
/// be out-of-sample relative to the fit window. Negative means are reported
/// as-is; they signal noise.
inline AttributionVector block_permutation_importance(const FittedModel& m, const DesignMatrix& d,
                                                      LossKind loss, int L, int repetitions,
                                                      std::uint64_t seed) {
  const std::size_t n = d.n_rows();
  if (n == 0) throw ValidationError("permutation importance: empty design");
  if (L < 1 || static_cast<std::size_t>(L) > n)
    throw ValidationError("permutation importance: block length must lie in [1, n]");
  if (repetitions < 1) throw ValidationError("permutation importance: repetitions must be >= 1");

  AttributionVector a;
  a.origin = d.origin;
  a.model_id = m.spec.id();
  a.method = AttributionMethod::permutation;
  a.features = d.feature_names();
  a.values.resize(a.features.size(), 0.0);
  a.stderr_values.resize(a.features.size(), 0.0);

  const double base = detail::eval_loss(m, d.X, d.y, loss);
  const std::size_t nblocks = (n + static_cast<std::size_t>(L) - 1) / static_cast<std::size_t>(L);

  for (std::size_t j = 0; j < a.features.size(); ++j) {
    Vec diffs(static_cast<std::size_t>(repetitions), 0.0);
    for (int r = 0; r < repetitions; ++r) {
      Rng rng = Rng::keyed(seed, {kPermStream, j, static_cast<std::uint64_t>(r)});
      std::vector<std::size_t> blocks(nblocks);
      for (std::size_t b = 0; b < nblocks; ++b) blocks[b] = b;
      for (std::size_t i = 0; i + 1 < nblocks; ++i) {
        const std::size_t pick = i + rng.next_below(nblocks - i);
        std::swap(blocks[i], blocks[pick]);
      }
      Matrix shuffled = d.X;
      std::size_t w = 0;
      for (std::size_t b : blocks) {
        const std::size_t lo = b * static_cast<std::size_t>(L);
        const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(L));
        for (std::size_t i = lo; i < hi; ++i) shuffled(w++, j) = d.X(i, j);
      }
      diffs[static_cast<std::size_t>(r)] = detail::eval_loss(m, shuffled, d.y, loss) - base;
    }
    a.values[j] = mean(diffs);
    if (repetitions > 1) {
      double sq = 0.0;
      for (double v : diffs) sq += (v - a.values[j]) * (v - a.values[j]);
      a.stderr_values[j] =
          std::sqrt(sq / static_cast<double>(repetitions - 1) / static_cast<double>(repetitions));
    }
  }
  a.metadata["loss"] = to_string(loss);
  a.metadata["block_length"] = std::to_string(L);
  a.metadata["repetitions"] = std::to_string(repetitions);
  a.metadata["seed"] = std::to_string(seed);
  return a;
}

// ---------------------------------------------------------------------------
// Importance with uncertainty.

/// Central importance with a resampling band. sign_share is the fraction of
/// samples (replicates or origins) on which the attribution was positive.
struct ImportanceProfile {
  std::vector<std::string> features;
  Vec central;
  Vec lower, upper;
  Vec sign_share;
  AttributionMethod method = AttributionMethod::coefficients;
  std::map<std::string, std::string> metadata;
};

inline std::string importance_profile_csv(const ImportanceProfile& p) {
  std::string out = "feature,central,lower,upper,sign_share\n";
  for (std::size_t j = 0; j < p.features.size(); ++j) {
    out += csv_join({p.features[j], format_double(p.central[j]), format_double(p.lower[j]),
                     format_double(p.upper[j]), format_double(p.sign_share[j])});
    out += '\n';
  }
  return out;
}

/// Bands for a global importance method, reusing the block bootstrap: each
/// replicate refits the model on resampled design rows and recomputes the
/// attribution; the band is the per-feature (alpha/2, 1-alpha/2) quantile.
inline ImportanceProfile importance_bands(const DesignMatrix& design, const ModelSpec& spec,
                                          AttributionMethod method,
                                          const BlockBootstrapConfig& config, double alpha = 0.10) {
  if (method != AttributionMethod::coefficients && method != AttributionMethod::vip)
    throw ValidationError("importance bands: only global methods (coefficients, vip) resample");
  if (config.replicates < 1) throw ValidationError("importance bands: replicates must be >= 1");
  const std::size_t n = design.n_rows();
  if (n == 0) throw ValidationError("importance bands: empty design");

  int L = config.block_length > 0 ? config.block_length : default_block_length(n);
  if (L < 1 || static_cast<std::size_t>(L) > n)
    throw ValidationError("importance bands: block length must lie in [1, n]");
  double p = config.restart_prob > 0.0 ? config.restart_prob : 1.0 / static_cast<double>(L);

  auto attribute = [&](const FittedModel& m, const DesignMatrix& d) {
    return method == AttributionMethod::coefficients ? coefficient_importance(m, d)
                                                     : vip_importance(m, d);
  };

  FittedModel base = fit(spec, design);
  AttributionVector central = attribute(base, design);

  std::vector<Vec> replicate_values;
  std::vector<std::string> failures;
  for (int b = 0; b < config.replicates; ++b) {
    Rng rng = Rng::keyed(config.seed, {kBootStream, static_cast<std::uint64_t>(b)});
    try {
      std::vector<std::size_t> idx = config.scheme == BootstrapScheme::moving_block
                                         ? moving_block_indices(n, L, rng)
                                         : stationary_indices(n, p, rng);
      DesignMatrix d = design;
      d.X = rows_at(design.X, idx);
      d.y = values_at(design.y, idx);
      ModelSpec replicate_spec = spec;
      std::uint64_t seed_state = config.seed ^ (0x5245504cu + static_cast<std::uint64_t>(b));
      replicate_spec.seed = splitmix64(seed_state);
      replicate_values.push_back(attribute(fit(replicate_spec, d), d).values);
    } catch (const FitError& e) {
      failures.push_back("replicate " + std::to_string(b) + ": " + e.what());
    } catch (const ValidationError& e) {
      failures.push_back("replicate " + std::to_string(b) + ": " + e.what());
    }
  }
  if (10 * failures.size() > static_cast<std::size_t>(config.replicates))
    throw FitError("importance bands: " + std::to_string(failures.size()) + " of " +
                   std::to_string(config.replicates) + " replicates failed (over 10%); first: " +
                   failures.front());
  if (replicate_values.empty()) throw FitError("importance bands: no replicate succeeded");

  ImportanceProfile out;
  out.features = central.features;
  out.central = central.values;
  out.method = method;
  const std::size_t nf = out.features.size();
  out.lower.resize(nf);
  out.upper.resize(nf);
  out.sign_share.resize(nf);
  for (std::size_t j = 0; j < nf; ++j) {
    Vec samples;
    samples.reserve(replicate_values.size());
    std::size_t positive = 0;
    for (const auto& v : replicate_values) {
      samples.push_back(v[j]);
      if (v[j] > 0.0) ++positive;
    }
    out.lower[j] = quantile_linear(samples, alpha / 2.0);
    out.upper[j] = quantile_linear(samples, 1.0 - alpha / 2.0);
    out.sign_share[j] = static_cast<double>(positive) / static_cast<double>(samples.size());
  }
  out.metadata["alpha"] = format_double(alpha);
  out.metadata["replicates"] = std::to_string(config.replicates);
  out.metadata["block_length"] = std::to_string(L);
  out.metadata["seed"] = std::to_string(config.seed);
  out.metadata["failures"] = std::to_string(failures.size());
  return out;
}

/// Summary of attributions across origins: median |value| as the center, the
/// interquartile range of |value| as the band. Permutation importances are
/// floored at zero before taking magnitudes, matching the reporting rule.
inline ImportanceProfile summarize_profiles(const std::vector<AttributionVector>& profiles) {
  if (profiles.empty()) throw ValidationError("summarize: no attributions");
  const auto& features = profiles.front().features;
  for (const auto& a : profiles)
    if (a.features != features)
      throw ValidationError("summarize: attribution feature sets do not match");

  ImportanceProfile out;
  out.features = features;
  out.method = profiles.front().method;
  const std::size_t nf = features.size();
  out.central.resize(nf);
  out.lower.resize(nf);
  out.upper.resize(nf);
  out.sign_share.resize(nf);
  for (std::size_t j = 0; j < nf; ++j) {
    Vec mags;
    std::size_t positive = 0;
    for (const auto& a : profiles) {
      double v = a.values[j];
      if (a.method == AttributionMethod::permutation) v = std::max(0.0, v);
      mags.push_back(std::abs(v));
      if (a.values[j] > 0.0) ++positive;
    }
    out.central[j] = median(mags);
    out.lower[j] = quantile_linear(mags, 0.25);
    out.upper[j] = quantile_linear(mags, 0.75);
    out.sign_share[j] = static_cast<double>(positive) / static_cast<double>(profiles.size());
  }
  out.metadata["origins"] = std::to_string(profiles.size());
  out.metadata["center"] = "median_abs";
  return out;
}

}  // namespace nowcast
