#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/core/errors.hpp"
#include "nowcast/data/transform.hpp"

namespace nowcast {

enum class EconomicBlock {
  domestic_demand,
  external_demand,
  labor_market,
  prices,
  financial_conditions,
  other
};

inline std::string to_string(EconomicBlock b) {
  switch (b) {
    case EconomicBlock::domestic_demand: return "domestic_demand";
    case EconomicBlock::external_demand: return "external_demand";
    case EconomicBlock::labor_market: return "labor_market";
    case EconomicBlock::prices: return "prices";
    case EconomicBlock::financial_conditions: return "financial_conditions";
    case EconomicBlock::other: return "other";
  }
  return "other";
}

inline std::optional<EconomicBlock> block_from_string(std::string_view s) {
  if (s == "domestic_demand") return EconomicBlock::domestic_demand;
  if (s == "external_demand") return EconomicBlock::external_demand;
  if (s == "labor_market") return EconomicBlock::labor_market;
  if (s == "prices") return EconomicBlock::prices;
  if (s == "financial_conditions") return EconomicBlock::financial_conditions;
  if (s == "other") return EconomicBlock::other;
  return std::nullopt;
}

/// One predictor column: where it comes from and how it is built.
/// fault_peek_days and fault_full_sample_stats are fault-injection knobs for
/// exercising the leakage audit; production recipes leave them at defaults.
struct FeatureSpec {
  std::string name;
  std::string series;
  AggregationRule aggregation = AggregationRule::mean;
  TransformChain chain;
  EconomicBlock block = EconomicBlock::other;
  int lag = 0;                          // quarters back; 0 = contemporaneous
  int fault_peek_days = 0;              // >0: this feature sees publications past the origin
  bool fault_full_sample_stats = false; // standardize stats over all periods, not the train slice
};

struct TargetSpec {
  std::string series;
  TransformChain chain;  // typically pct_change, producing growth in percent
};

struct Recipe {
  TargetSpec target;
  std::vector<FeatureSpec> features;
  PartialQuarterPolicy partial_quarters = PartialQuarterPolicy::drop;
};

inline TransformChain parse_chain(const nlohmann::json& arr, const std::string& where) {
  if (!arr.is_array()) throw ValidationError(where + ": 'chain' must be an array of step names");
  TransformChain chain;
  for (const auto& s : arr) {
    if (!s.is_string()) throw ValidationError(where + ": chain steps must be strings");
    auto step = TransformStep::parse(s.get<std::string>());
    if (!step)
      throw ValidationError(where + ": unknown transform step '" + s.get<std::string>() +
                            "' (expected log, diff, pct_change, standardize)");
    chain.push_back(*step);
  }
  return chain;
}

inline Recipe parse_recipe(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("target") || !j.contains("features"))
    throw ValidationError("recipe must contain 'target' and 'features'");
  Recipe r;
  const auto& t = j.at("target");
  if (!t.contains("series")) throw ValidationError("recipe target: missing 'series'");
  r.target.series = t.at("series").get<std::string>();
  if (t.contains("chain")) r.target.chain = parse_chain(t.at("chain"), "target");
  if (j.contains("partial_quarters")) {
    const auto s = j.at("partial_quarters").get<std::string>();
    if (s == "drop")
      r.partial_quarters = PartialQuarterPolicy::drop;
    else if (s == "mean_available")
      r.partial_quarters = PartialQuarterPolicy::mean_available;
    else
      throw ValidationError("recipe: partial_quarters must be 'drop' or 'mean_available'");
  }
  for (const auto& f : j.at("features")) {
    FeatureSpec fs;
    if (!f.contains("name") || !f.contains("series"))
      throw ValidationError("recipe feature: missing 'name' or 'series'");
    fs.name = f.at("name").get<std::string>();
    fs.series = f.at("series").get<std::string>();
    if (f.contains("aggregation")) {
      auto agg = aggregation_from_string(f.at("aggregation").get<std::string>());
      if (!agg)
        throw ValidationError("feature " + fs.name + ": unknown aggregation rule '" +
                              f.at("aggregation").get<std::string>() + "'");
      fs.aggregation = *agg;
    }
    if (f.contains("chain")) fs.chain = parse_chain(f.at("chain"), "feature " + fs.name);
    if (f.contains("block")) {
      auto b = block_from_string(f.at("block").get<std::string>());
      if (!b)
        throw ValidationError("feature " + fs.name + ": unknown economic block '" +
                              f.at("block").get<std::string>() + "'");
      fs.block = *b;
    }
    if (f.contains("lag")) {
      fs.lag = f.at("lag").get<int>();
      if (fs.lag < 0) throw ValidationError("feature " + fs.name + ": lag must be >= 0");
    }
    if (f.contains("fault_peek_days")) fs.fault_peek_days = f.at("fault_peek_days").get<int>();
    if (f.contains("fault_full_sample_stats"))
      fs.fault_full_sample_stats = f.at("fault_full_sample_stats").get<bool>();
    r.features.push_back(std::move(fs));
  }
  if (r.features.empty()) throw ValidationError("recipe has no features");
  return r;
}

inline Recipe parse_recipe_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("recipe is not valid JSON: ") + e.what());
  }
  return parse_recipe(j);
}

inline nlohmann::json recipe_json(const Recipe& r) {
  nlohmann::json j;
  j["target"]["series"] = r.target.series;
  auto chain_arr = [](const TransformChain& c) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : c) a.push_back(s.str());
    return a;
  };
  j["target"]["chain"] = chain_arr(r.target.chain);
  j["partial_quarters"] =
      r.partial_quarters == PartialQuarterPolicy::drop ? "drop" : "mean_available";
  j["features"] = nlohmann::json::array();
  for (const auto& f : r.features) {
    nlohmann::json e;
    e["name"] = f.name;
    e["series"] = f.series;
    e["aggregation"] = to_string(f.aggregation);
    e["chain"] = chain_arr(f.chain);
    e["block"] = to_string(f.block);
    e["lag"] = f.lag;
    if (f.fault_peek_days > 0) e["fault_peek_days"] = f.fault_peek_days;
    if (f.fault_full_sample_stats) e["fault_full_sample_stats"] = true;
    j["features"].push_back(std::move(e));
  }
  return j;
}

}  // namespace nowcast
