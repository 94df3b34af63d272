#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/core/digest.hpp"
#include "nowcast/data/design.hpp"
#include "nowcast/explain/attribution.hpp"
#include "nowcast/models/spec.hpp"
#include "nowcast/uq/bootstrap.hpp"

namespace nowcast {

/// Thrown when a release cannot be published (dirty leakage verdict). Distinct
/// from validation failures so callers can map it to its own exit code.
class ReleaseRefused : public std::runtime_error {
 public:
  explicit ReleaseRefused(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Waterfall decomposition by economic block.

struct WaterfallBlock {
  EconomicBlock block = EconomicBlock::other;
  double contribution = 0.0;
  std::vector<std::string> members;
};

/// Additive split of the released point: base + block sums + residual = point
/// by construction. The residual is 0 (to 1e-9) whenever the attribution is
/// exactly additive and the released point is the attributed model's point; a
/// fallback release keeps the identity by booking the benchmark gap there.
struct Waterfall {
  double base = 0.0;
  double point = 0.0;
  double residual = 0.0;
  std::vector<WaterfallBlock> blocks;
  AttributionMethod method = AttributionMethod::tree_shap;
};

/// Only attributions that reconcile to the prediction can be drawn as a
/// waterfall: Shapley values, integrated gradients, and per-feature linear
/// contributions. Global importance scores do not sum to anything local.
inline bool additive_attribution(const AttributionVector& a) {
  if (a.method == AttributionMethod::tree_shap ||
      a.method == AttributionMethod::integrated_gradients)
    return true;
  if (a.method == AttributionMethod::coefficients) {
    auto it = a.metadata.find("form");
    return it != a.metadata.end() && it->second == "local_contribution";
  }
  return false;
}

inline Waterfall waterfall_decomposition(const AttributionVector& attr,
                                         const std::map<std::string, EconomicBlock>& tags,
                                         double point) {
  if (!additive_attribution(attr))
    throw ValidationError("waterfall_decomposition: " + to_string(attr.method) +
                          " importances are not additive; use tree_shap, integrated_gradients, "
                          "or linear contributions for waterfalls");
  if (!std::isfinite(attr.base_value))
    throw ValidationError("waterfall_decomposition: attribution carries no finite base value");
  Waterfall w;
  w.base = attr.base_value;
  w.point = point;
  w.method = attr.method;

  std::map<EconomicBlock, WaterfallBlock> acc;
  double total = 0.0;
  for (std::size_t j = 0; j < attr.features.size(); ++j) {
    auto it = tags.find(attr.features[j]);
    if (it == tags.end())
      throw ValidationError("waterfall_decomposition: feature '" + attr.features[j] +
                            "' has no economic block tag");
    auto& b = acc[it->second];
    b.block = it->second;
    b.contribution += attr.values[j];
    b.members.push_back(attr.features[j]);
    total += attr.values[j];
  }
  for (auto& kv : acc) w.blocks.push_back(std::move(kv.second));
  w.residual = point - w.base - total;
  return w;
}

// ---------------------------------------------------------------------------
// Driver table.

struct DriverRow {
  std::string feature;
  double value = 0.0;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  EconomicBlock block = EconomicBlock::other;
};

/// Top-k features by attribution magnitude, signed, with uncertainty bands
/// joined from an importance profile when one is supplied.
inline std::vector<DriverRow> driver_table(const AttributionVector& attr,
                                           const std::map<std::string, EconomicBlock>& tags,
                                           const ImportanceProfile* bands = nullptr,
                                           std::size_t top_k = 10) {
  if (top_k == 0) throw ValidationError("driver_table: top_k must be positive");
  std::vector<std::size_t> order(attr.features.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(attr.values[a]), mb = std::abs(attr.values[b]);
    if (ma != mb) return ma > mb;
    return attr.features[a] < attr.features[b];
  });
  std::vector<DriverRow> rows;
  for (std::size_t j : order) {
    if (rows.size() == top_k) break;
    DriverRow r;
    r.feature = attr.features[j];
    r.value = attr.values[j];
    if (auto it = tags.find(r.feature); it != tags.end()) r.block = it->second;
    if (bands != nullptr)
      for (std::size_t i = 0; i < bands->features.size(); ++i)
        if (bands->features[i] == r.feature) {
          r.lower = bands->lower[i];
          r.upper = bands->upper[i];
          break;
        }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Fallback protocol.

struct FallbackDecision {
  double point = 0.0;     ///< what gets released
  double ml_point = 0.0;  ///< the model's own point, always kept for transparency
  bool triggered = false;
  std::string benchmark_id;
};

/// Width gate: strictly wider than the tolerance reverts the release to the
/// benchmark point and flags the ML signal as low confidence. Width exactly
/// at the tolerance does not trigger. The tolerance has no default; it is in
/// target units and must come from configuration.
inline FallbackDecision fallback_check(
    const PredictionInterval& interval, double tolerance,
    const std::optional<std::pair<std::string, double>>& benchmark) {
  if (!(tolerance > 0.0) || !std::isfinite(tolerance))
    throw ValidationError(
        "fallback_check: tolerance must be configured as a positive interval width in target "
        "units");
  FallbackDecision d;
  d.ml_point = interval.point;
  const double width = interval.upper - interval.lower;
  if (width > tolerance) {
    if (!benchmark)
      throw ValidationError("fallback_check: interval width " + format_double(width) +
                            " exceeds tolerance " + format_double(tolerance) +
                            " but no benchmark forecast is available");
    d.point = benchmark->second;
    d.triggered = true;
    d.benchmark_id = benchmark->first;
    return d;
  }
  d.point = interval.point;
  return d;
}

/// Deterministic benchmark preference for the fallback protocol: AR(1) first,
/// then the drifting random walk, then the plain random walk.
inline std::optional<std::pair<std::string, double>> fallback_benchmark(
    const std::vector<std::pair<ModelSpec, double>>& candidates) {
  for (Family fam : {Family::ar, Family::rw_drift, Family::rw})
    for (const auto& [spec, point] : candidates)
      if (spec.family == fam) return std::make_pair(spec.id(), point);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Release package.

struct ReleaseFlags {
  bool low_confidence = false;
  bool fallback_used = false;
  bool leakage_clean = true;  ///< always true: dirty verdicts refuse assembly
};

struct Provenance {
  std::string model_version;
  std::string config_hash;
  BlockBootstrapConfig bootstrap;
  std::string fallback_model;  ///< set exactly when low_confidence is
};

struct ReleasePackage {
  int schema_version = 1;
  Date origin;
  double point = 0.0;
  PredictionInterval interval;
  Waterfall waterfall;
  std::vector<DriverRow> driver_table;
  ReleaseFlags flags;
  Provenance provenance;
};

struct ReleaseInputs {
  Date origin;
  PredictionInterval interval;
  AttributionVector attribution;
  std::map<std::string, EconomicBlock> block_tags;
  std::optional<ImportanceProfile> bands;
  /// Leakage audit verdict for the design the forecast came from. Assembly
  /// demands a verdict: absent refuses validation, non-empty refuses release.
  std::optional<std::vector<LeakageViolation>> leakage;
  double tolerance = 0.0;
  std::optional<std::pair<std::string, double>> benchmark;
  std::string model_version = "nowcast-engine/0.1";
  std::string config_hash;
  BlockBootstrapConfig bootstrap;
  std::size_t top_k = 10;
};

inline ReleasePackage assemble_release(const ReleaseInputs& in) {
  if (!in.leakage)
    throw ValidationError(
        "assemble_release: leakage audit verdict is required before any release");
  if (!in.leakage->empty()) {
    const auto& v = in.leakage->front();
    throw ReleaseRefused("release refused: leakage audit flagged feature '" + v.feature +
                         "' on plane " + v.plane + " (" + v.detail + ")");
  }
  const FallbackDecision fb = fallback_check(in.interval, in.tolerance, in.benchmark);

  ReleasePackage pkg;
  pkg.origin = in.origin;
  pkg.point = fb.point;
  pkg.interval = in.interval;
  pkg.waterfall = waterfall_decomposition(in.attribution, in.block_tags, fb.point);
  pkg.driver_table =
      driver_table(in.attribution, in.block_tags, in.bands ? &*in.bands : nullptr, in.top_k);
  pkg.flags.low_confidence = fb.triggered;
  pkg.flags.fallback_used = fb.triggered;
  pkg.flags.leakage_clean = true;
  pkg.provenance.model_version = in.model_version;
  pkg.provenance.config_hash = in.config_hash;
  pkg.provenance.bootstrap = in.bootstrap;
  pkg.provenance.fallback_model = fb.benchmark_id;
  return pkg;
}

// ---------------------------------------------------------------------------
// Serialization: schema-versioned document, text summary, audit trail.

inline nlohmann::json release_json(const ReleasePackage& pkg) {
  nlohmann::json j;
  j["schema_version"] = pkg.schema_version;
  j["origin"] = pkg.origin.str();
  j["point"] = pkg.point;
  j["interval"] = {{"alpha", pkg.interval.alpha},
                   {"lower", pkg.interval.lower},
                   {"upper", pkg.interval.upper},
                   {"point", pkg.interval.point},
                   {"quantile_convention", pkg.interval.quantile_convention}};
  nlohmann::json dist = nlohmann::json::array();
  for (const auto& [p, q] : pkg.interval.distribution_summary)
    dist.push_back({{"probability", p}, {"quantile", q}});
  j["interval"]["distribution_summary"] = dist;
  j["waterfall"] = {{"base", pkg.waterfall.base},
                    {"point", pkg.waterfall.point},
                    {"residual", pkg.waterfall.residual},
                    {"method", to_string(pkg.waterfall.method)}};
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : pkg.waterfall.blocks)
    blocks.push_back({{"block", to_string(b.block)},
                      {"contribution", b.contribution},
                      {"members", b.members}});
  j["waterfall"]["blocks"] = blocks;
  nlohmann::json drivers = nlohmann::json::array();
  for (const auto& r : pkg.driver_table) {
    nlohmann::json row = {{"feature", r.feature},
                          {"value", r.value},
                          {"block", to_string(r.block)}};
    if (std::isfinite(r.lower)) row["lower"] = r.lower;
    if (std::isfinite(r.upper)) row["upper"] = r.upper;
    drivers.push_back(row);
  }
  j["driver_table"] = drivers;
  j["flags"] = {{"low_confidence", pkg.flags.low_confidence},
                {"fallback_used", pkg.flags.fallback_used},
                {"leakage_clean", pkg.flags.leakage_clean}};
  j["provenance"] = {{"model_version", pkg.provenance.model_version},
                     {"config_hash", pkg.provenance.config_hash},
                     {"fallback_model", pkg.provenance.fallback_model},
                     {"bootstrap",
                      {{"scheme", to_string(pkg.provenance.bootstrap.scheme)},
                       {"block_length", pkg.provenance.bootstrap.block_length},
                       {"restart_prob", pkg.provenance.bootstrap.restart_prob},
                       {"replicates", pkg.provenance.bootstrap.replicates},
                       {"seed", pkg.provenance.bootstrap.seed},
                       {"unit", to_string(pkg.provenance.bootstrap.unit)},
                       {"innovation", to_string(pkg.provenance.bootstrap.innovation)}}}};
  return j;
}

inline std::string release_digest(const ReleasePackage& pkg) {
  return digest_hex(release_json(pkg).dump());
}

inline std::string release_text(const ReleasePackage& pkg) {
  std::string out;
  out += "nowcast release for " + pkg.origin.str() + "\n";
  out += "point " + format_double(pkg.point) + "  interval [" +
         format_double(pkg.interval.lower) + ", " + format_double(pkg.interval.upper) +
         "] at alpha " + format_double(pkg.interval.alpha) + "\n";
  out += "flags: low_confidence=" + std::string(pkg.flags.low_confidence ? "yes" : "no") +
         " fallback_used=" + (pkg.flags.fallback_used ? "yes" : "no") +
         " leakage_clean=" + (pkg.flags.leakage_clean ? "yes" : "no") + "\n";
  if (pkg.flags.fallback_used)
    out += "fallback model: " + pkg.provenance.fallback_model +
           " (ml point kept in interval record)\n";
  out += "waterfall (" + to_string(pkg.waterfall.method) + "): base " +
         format_double(pkg.waterfall.base) + "\n";
  for (const auto& b : pkg.waterfall.blocks)
    out += "  " + to_string(b.block) + "  " + format_double(b.contribution) + "\n";
  out += "  residual " + format_double(pkg.waterfall.residual) + "\n";
  out += "drivers:\n";
  for (const auto& r : pkg.driver_table) {
    out += "  " + r.feature + "  " + format_double(r.value);
    if (std::isfinite(r.lower) && std::isfinite(r.upper))
      out += "  [" + format_double(r.lower) + ", " + format_double(r.upper) + "]";
    out += "\n";
  }
  out += "provenance: " + pkg.provenance.model_version + " config " +
         pkg.provenance.config_hash + "\n";
  return out;
}

struct AuditRecord {
  std::string timestamp;  ///< caller-supplied so replays can pin it
  std::string actor;
  std::string config_hash;
  std::string data_log_digest;
  std::string model_version;
  std::string outputs_digest;
};

inline nlohmann::json audit_json(const AuditRecord& r) {
  return {{"timestamp", r.timestamp},
          {"actor", r.actor},
          {"config_hash", r.config_hash},
          {"data_log_digest", r.data_log_digest},
          {"model_version", r.model_version},
          {"outputs_digest", r.outputs_digest}};
}

/// One JSON line per record; the stream is the append-only audit trail.
inline void append_audit(std::ostream& trail, const AuditRecord& r) {
  trail << audit_json(r).dump() << '\n';
}

}  // namespace nowcast
