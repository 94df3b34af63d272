#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/core/digest.hpp"
#include "nowcast/data/recipe.hpp"
#include "nowcast/eval/walkforward.hpp"
#include "nowcast/explain/ig.hpp"
#include "nowcast/select/combination.hpp"
#include "nowcast/select/mcs.hpp"
#include "nowcast/uq/bootstrap.hpp"

namespace nowcast {

inline std::optional<BootstrapScheme> bootstrap_scheme_from_string(std::string_view s) {
  if (s == "moving_block") return BootstrapScheme::moving_block;
  if (s == "stationary") return BootstrapScheme::stationary;
  return std::nullopt;
}

inline std::optional<InnovationMode> innovation_from_string(std::string_view s) {
  if (s == "resample_residual") return InnovationMode::resample_residual;
  if (s == "none") return InnovationMode::none;
  return std::nullopt;
}

inline std::optional<IgBaseline> ig_baseline_from_string(std::string_view s) {
  if (s == "zeros") return IgBaseline::zeros;
  if (s == "window_median") return IgBaseline::window_median;
  if (s == "preshock_mean") return IgBaseline::preshock_mean;
  return std::nullopt;
}

inline std::optional<WeightScheme> weight_scheme_from_string(std::string_view s) {
  if (s == "equal") return WeightScheme::equal;
  if (s == "inverse_cumulative") return WeightScheme::inverse_cumulative;
  if (s == "exponential") return WeightScheme::exponential;
  return std::nullopt;
}

inline std::optional<LossKind> loss_kind_from_string(std::string_view s) {
  if (s == "squared") return LossKind::squared;
  if (s == "absolute") return LossKind::absolute;
  return std::nullopt;
}

struct ExplainConfig {
  IgBaseline ig_baseline = IgBaseline::zeros;
  int ig_steps = 64;
  int ig_preshock_rows = 4;  // preshock_mean baseline: rows averaged from the window start
  int permutation_block = 0;  // 0 resolves to the cube-root default
  int permutation_reps = 20;
  std::uint64_t seed = 0;
  std::map<std::string, int> sign_priors;  // feature -> +1/-1 declared sign
};

struct ReportingConfig {
  double fallback_tolerance = 0.0;  // interval width gate, target units; must be set for releases
  std::size_t top_k = 10;
};

/// One configuration file drives the whole workflow. The canonical parsed
/// document is kept alongside the typed fields; its digest is embedded in
/// every output so artifacts can be traced to the exact configuration.
struct RunConfig {
  std::string data_path;
  std::string recipe_path;
  std::string output_dir = "out";
  EvaluationPlan plan;  // recipe filled in by load_run_config
  double interval_alpha = 0.10;
  BlockBootstrapConfig bootstrap;
  ExplainConfig explain;
  McsConfig mcs;
  double mcs_alpha = 0.10;
  WeightScheme combination = WeightScheme::inverse_cumulative;
  double combination_eta = 1.0;
  ReportingConfig reporting;
  nlohmann::json raw;
  std::string config_hash;
};

inline ModelSpec parse_model_spec(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family"))
    throw ValidationError("model spec must be an object with a 'family'");
  ModelSpec spec;
  const auto fam = j.at("family").get<std::string>();
  auto parsed = family_from_string(fam);
  if (!parsed) throw ValidationError("unknown model family '" + fam + "'");
  spec.family = *parsed;
  if (j.contains("hyper")) {
    if (!j.at("hyper").is_object())
      throw ValidationError("model spec " + fam + ": 'hyper' must be an object");
    for (const auto& [k, v] : j.at("hyper").items()) {
      if (!v.is_number())
        throw ValidationError("model spec " + fam + ": hyperparameter '" + k +
                              "' must be numeric");
      spec.hyper[k] = v.get<double>();
    }
  }
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("label")) spec.label = j.at("label").get<std::string>();
  spec.validate();
  return spec;
}

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

inline std::vector<Date> parse_origins(const nlohmann::json& j) {
  std::vector<Date> out;
  if (j.is_array()) {
    for (const auto& s : j) out.push_back(Date::parse_or_throw(s.get<std::string>()));
    return out;
  }
  if (j.is_object() && j.contains("start") && j.contains("count")) {
    const Date start = Date::parse_or_throw(j.at("start").get<std::string>());
    const auto count = j.at("count").get<std::int64_t>();
    const auto step = get_or<std::int64_t>(j, "step_days", 91);
    if (count < 1) throw ValidationError("plan origins: count must be >= 1");
    if (step < 1) throw ValidationError("plan origins: step_days must be >= 1");
    for (std::int64_t i = 0; i < count; ++i) out.push_back(start.plus_days(i * step));
    return out;
  }
  throw ValidationError(
      "plan origins must be a date array or {start, count, step_days}");
}

}  // namespace detail

/// Pure parse of the config document; file paths stay unresolved and the
/// recipe stays empty. load_run_config layers the filesystem on top.
inline RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  for (const auto& key : {"paths", "plan", "bootstrap"})
    if (!j.contains(key))
      throw ValidationError(std::string("run config: missing section '") + key + "'");
  RunConfig cfg;
  cfg.raw = j;
  cfg.config_hash = digest_hex(j.dump());

  const auto& paths = j.at("paths");
  if (!paths.contains("data")) throw ValidationError("run config paths: missing 'data'");
  if (!paths.contains("recipe")) throw ValidationError("run config paths: missing 'recipe'");
  cfg.data_path = paths.at("data").get<std::string>();
  cfg.recipe_path = paths.at("recipe").get<std::string>();
  cfg.output_dir = detail::get_or<std::string>(paths, "output", "out");

  const auto& plan = j.at("plan");
  if (!plan.contains("origins")) throw ValidationError("run config plan: missing 'origins'");
  cfg.plan.origins = detail::parse_origins(plan.at("origins"));
  if (plan.contains("window")) {
    const auto& w = plan.at("window");
    const auto kind = detail::get_or<std::string>(w, "kind", "expanding");
    if (kind == "expanding") {
      cfg.plan.window = WindowPolicy::expanding();
    } else if (kind == "rolling") {
      if (!w.contains("length"))
        throw ValidationError("run config plan: rolling window needs 'length'");
      cfg.plan.window = WindowPolicy::rolling(w.at("length").get<int>());
    } else {
      throw ValidationError("run config plan: window kind must be expanding or rolling");
    }
  }
  if (!plan.contains("portfolio") || !plan.at("portfolio").is_array() ||
      plan.at("portfolio").empty())
    throw ValidationError("run config plan: 'portfolio' must be a non-empty array");
  for (const auto& m : plan.at("portfolio")) cfg.plan.portfolio.push_back(parse_model_spec(m));
  if (plan.contains("benchmarks"))
    for (const auto& b : plan.at("benchmarks"))
      cfg.plan.benchmark_ids.push_back(b.get<std::string>());
  cfg.plan.margin = detail::get_or(plan, "margin", 0.05);
  if (plan.contains("actuals_vintage")) {
    const auto s = plan.at("actuals_vintage").get<std::string>();
    auto v = actuals_vintage_from_string(s);
    if (!v)
      throw ValidationError("run config plan: actuals_vintage must be 'first' or 'latest'");
    cfg.plan.actuals = *v;
  }

  const auto& boot = j.at("bootstrap");
  if (boot.contains("scheme")) {
    const auto s = boot.at("scheme").get<std::string>();
    auto scheme = bootstrap_scheme_from_string(s);
    if (!scheme) throw ValidationError("run config bootstrap: unknown scheme '" + s + "'");
    cfg.bootstrap.scheme = *scheme;
  }
  cfg.bootstrap.block_length = detail::get_or(boot, "block_length", 0);
  cfg.bootstrap.restart_prob = detail::get_or(boot, "restart_prob", 0.0);
  cfg.bootstrap.replicates = detail::get_or(boot, "replicates", 200);
  cfg.bootstrap.seed = detail::get_or<std::uint64_t>(boot, "seed", 0);
  if (boot.contains("innovation")) {
    const auto s = boot.at("innovation").get<std::string>();
    auto mode = innovation_from_string(s);
    if (!mode) throw ValidationError("run config bootstrap: unknown innovation mode '" + s + "'");
    cfg.bootstrap.innovation = *mode;
  }
  cfg.interval_alpha = detail::get_or(boot, "alpha", 0.10);
  if (!(cfg.interval_alpha > 0.0 && cfg.interval_alpha < 1.0))
    throw ValidationError("run config bootstrap: alpha must lie in (0, 1)");

  if (j.contains("explainability")) {
    const auto& ex = j.at("explainability");
    if (ex.contains("ig_baseline")) {
      const auto s = ex.at("ig_baseline").get<std::string>();
      auto b = ig_baseline_from_string(s);
      if (!b) throw ValidationError("run config explainability: unknown ig baseline '" + s + "'");
      cfg.explain.ig_baseline = *b;
    }
    cfg.explain.ig_steps = detail::get_or(ex, "ig_steps", 64);
    cfg.explain.ig_preshock_rows = detail::get_or(ex, "ig_preshock_rows", 4);
    cfg.explain.permutation_block = detail::get_or(ex, "permutation_block", 0);
    cfg.explain.permutation_reps = detail::get_or(ex, "permutation_reps", 20);
    cfg.explain.seed = detail::get_or<std::uint64_t>(ex, "seed", 0);
    if (ex.contains("priors"))
      for (const auto& [k, v] : ex.at("priors").items()) {
        const int sign = v.get<int>();
        if (sign != 1 && sign != -1)
          throw ValidationError("run config explainability: prior for '" + k +
                                "' must be +1 or -1");
        cfg.explain.sign_priors[k] = sign;
      }
  }

  if (j.contains("mcs")) {
    const auto& mcs = j.at("mcs");
    cfg.mcs_alpha = detail::get_or(mcs, "alpha", 0.10);
    cfg.mcs.block_length = detail::get_or(mcs, "block_length", 0);
    cfg.mcs.replicates = detail::get_or<std::size_t>(mcs, "replicates", 999);
    cfg.mcs.seed = detail::get_or<std::uint64_t>(mcs, "seed", 0);
    if (mcs.contains("loss")) {
      const auto s = mcs.at("loss").get<std::string>();
      auto kind = loss_kind_from_string(s);
      if (!kind) throw ValidationError("run config mcs: loss must be 'squared' or 'absolute'");
      cfg.mcs.loss = *kind;
    }
  }

  if (j.contains("combination")) {
    const auto& comb = j.at("combination");
    if (comb.contains("scheme")) {
      const auto s = comb.at("scheme").get<std::string>();
      auto scheme = weight_scheme_from_string(s);
      if (!scheme) throw ValidationError("run config combination: unknown scheme '" + s + "'");
      cfg.combination = *scheme;
    }
    cfg.combination_eta = detail::get_or(comb, "eta", 1.0);
  }

  if (j.contains("reporting")) {
    const auto& rep = j.at("reporting");
    cfg.reporting.fallback_tolerance = detail::get_or(rep, "tolerance", 0.0);
    cfg.reporting.top_k = detail::get_or<std::size_t>(rep, "top_k", 10);
  }
  return cfg;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Reads the config file, resolves data/recipe/output paths relative to its
/// directory, and loads the recipe into the plan.
inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("run config is not valid JSON: ") + e.what());
  }
  RunConfig cfg = parse_run_config(j);
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  cfg.data_path = resolve(cfg.data_path);
  cfg.recipe_path = resolve(cfg.recipe_path);
  cfg.output_dir = resolve(cfg.output_dir);
  cfg.plan.recipe = parse_recipe_text(read_text_file(cfg.recipe_path));
  cfg.plan.validate();
  return cfg;
}

}  // namespace nowcast
