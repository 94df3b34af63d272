#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/core/csv.hpp"
#include "nowcast/core/errors.hpp"

namespace nowcast {

enum class Family {
  rw,
  rw_drift,
  ar,
  ols,
  ridge,
  lasso,
  elastic_net,
  pcr,
  plsr,
  random_forest,
  gbdt,
  mlp,
  gru
};

inline const std::vector<std::pair<Family, std::string>>& family_names() {
  static const std::vector<std::pair<Family, std::string>> names{
      {Family::rw, "rw"},
      {Family::rw_drift, "rw_drift"},
      {Family::ar, "ar"},
      {Family::ols, "ols"},
      {Family::ridge, "ridge"},
      {Family::lasso, "lasso"},
      {Family::elastic_net, "elastic_net"},
      {Family::pcr, "pcr"},
      {Family::plsr, "plsr"},
      {Family::random_forest, "random_forest"},
      {Family::gbdt, "gbdt"},
      {Family::mlp, "mlp"},
      {Family::gru, "gru"}};
  return names;
}

inline std::string to_string(Family f) {
  for (const auto& [fam, name] : family_names())
    if (fam == f) return name;
  return "rw";
}

inline std::optional<Family> family_from_string(std::string_view s) {
  for (const auto& [fam, name] : family_names())
    if (name == s) return fam;
  return std::nullopt;
}

/// A model family plus its hyperparameters and seed. Integer-valued
/// hyperparameters are stored as doubles and read back with get_int.
struct ModelSpec {
  Family family = Family::rw;
  std::map<std::string, double> hyper;
  std::uint64_t seed = 0;
  std::string label;  // optional display name; defaults to id()

  [[nodiscard]] double get(const std::string& name, double fallback) const {
    auto it = hyper.find(name);
    return it == hyper.end() ? fallback : it->second;
  }

  [[nodiscard]] int get_int(const std::string& name, int fallback) const {
    auto it = hyper.find(name);
    if (it == hyper.end()) return fallback;
    return static_cast<int>(it->second);
  }

  [[nodiscard]] bool has(const std::string& name) const { return hyper.count(name) > 0; }

  /// Stable identifier: family plus sorted hyperparameters plus seed.
  [[nodiscard]] std::string id() const {
    if (!label.empty()) return label;
    std::string out = to_string(family);
    for (const auto& [k, v] : hyper) out += "," + k + "=" + format_double(v);
    if (seed != 0) out += ",seed=" + std::to_string(seed);
    return out;
  }

  void validate() const {
    auto require = [&](bool cond, const std::string& msg) {
      if (!cond) throw ValidationError("model spec " + to_string(family) + ": " + msg);
    };
    const double lambda = get("lambda", 0.0);
    require(lambda >= 0.0, "lambda must be >= 0");
    const double alpha = get("alpha", 1.0);
    require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0,1]");
    switch (family) {
      case Family::ar:
        require(get_int("p", 1) >= 1, "lag order p must be >= 1");
        break;
      case Family::pcr:
      case Family::plsr:
        require(get_int("k", 1) >= 1, "component count k must be >= 1");
        break;
      case Family::random_forest:
      case Family::gbdt:
        require(get_int("trees", 1) >= 1, "trees must be >= 1");
        require(get_int("depth", 1) >= 1, "depth must be >= 1");
        require(get_int("min_leaf", 1) >= 1, "min_leaf must be >= 1");
        if (family == Family::gbdt) {
          require(get("learning_rate", 0.1) > 0.0, "learning_rate must be > 0");
          const double sub = get("subsample", 1.0);
          require(sub > 0.0 && sub <= 1.0, "subsample must lie in (0,1]");
        }
        break;
      case Family::mlp:
        require(get_int("hidden", 8) >= 1, "hidden width must be >= 1");
        require(get_int("epochs", 1) >= 1, "epochs must be >= 1");
        require(get("step", 0.01) > 0.0, "step size must be > 0");
        require(get("dropout", 0.0) >= 0.0 && get("dropout", 0.0) < 1.0,
                "dropout must lie in [0,1)");
        break;
      case Family::gru:
        require(get_int("hidden", 4) >= 1, "hidden width must be >= 1");
        require(get_int("epochs", 1) >= 1, "epochs must be >= 1");
        require(get("step", 0.01) > 0.0, "step size must be > 0");
        require(get_int("seq_len", 4) >= 1, "sequence length must be >= 1");
        break;
      default:
        break;
    }
  }
};

}  // namespace nowcast
