#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nowcast/core/errors.hpp"
#include "nowcast/data/design.hpp"
#include "nowcast/models/latent.hpp"
#include "nowcast/models/linear.hpp"
#include "nowcast/models/neural.hpp"
#include "nowcast/models/spec.hpp"
#include "nowcast/models/tree.hpp"

namespace nowcast {

using ModelPayload = std::variant<RwModel, ArModel, LinearModel, PcrModel, PlsrModel, ForestModel,
                                  GbdtModel, MlpModel, GruModel>;

struct FittedModel {
  ModelSpec spec;
  std::vector<std::string> feature_names;  // empty for target-only families
  Period train_start;
  Period train_end;
  int steps_ahead = 1;
  double target_mean = 0.0;
  double target_var = 0.0;
  ModelPayload payload;
};

inline bool family_uses_features(Family f) {
  return f != Family::rw && f != Family::rw_drift && f != Family::ar;
}

inline FittedModel fit(const ModelSpec& spec, const DesignMatrix& d) {
  spec.validate();
  if (d.n_rows() == 0) throw ValidationError("fit: empty design");
  FittedModel m;
  m.spec = spec;
  m.train_start = d.target_periods.front();
  m.train_end = d.target_periods.back();
  m.steps_ahead = d.steps_ahead;
  m.target_mean = mean(d.y);
  m.target_var = variance_population(d.y);
  if (family_uses_features(spec.family)) m.feature_names = d.feature_names();
  if (family_uses_features(spec.family) && d.n_features() == 0)
    throw FitError("fit: design has no usable features for " + to_string(spec.family));

  switch (spec.family) {
    case Family::rw:
      m.payload = fit_rw(d.y, false);
      break;
    case Family::rw_drift:
      m.payload = fit_rw(d.y, true);
      break;
    case Family::ar:
      m.payload = fit_ar(d.y, spec.get_int("p", 1));
      break;
    case Family::ols:
      m.payload = fit_ols(d.X, d.y);
      break;
    case Family::ridge:
      m.payload = fit_ridge(d.X, d.y, spec.get("lambda", 0.0));
      break;
    case Family::lasso:
      m.payload = fit_lasso(d.X, d.y, spec.get("lambda", 0.0)).model;
      break;
    case Family::elastic_net:
      m.payload =
          fit_elastic_net(d.X, d.y, spec.get("lambda", 0.0), spec.get("alpha", 0.5)).model;
      break;
    case Family::pcr:
      m.payload = fit_pcr(d.X, d.y, spec.get_int("k", 1));
      break;
    case Family::plsr:
      m.payload = fit_plsr(d.X, d.y, spec.get_int("k", 1));
      break;
    case Family::random_forest: {
      TreeGrowthConfig cfg;
      cfg.max_depth = spec.get_int("depth", 3);
      cfg.min_leaf = spec.get_int("min_leaf", 2);
      cfg.mtry = spec.has("mtry")
                     ? spec.get_int("mtry", 0)
                     : static_cast<int>((d.n_features() + 2) / 3);
      m.payload = fit_random_forest(d.X, d.y, spec.get_int("trees", 100), cfg,
                                    spec.get("bootstrap", 1.0) != 0.0, spec.seed);
      break;
    }
    case Family::gbdt: {
      TreeGrowthConfig cfg;
      cfg.max_depth = spec.get_int("depth", 2);
      cfg.min_leaf = spec.get_int("min_leaf", 2);
      m.payload = fit_gbdt(d.X, d.y, spec.get_int("trees", 100), cfg,
                           spec.get("learning_rate", 0.1), spec.get("subsample", 1.0), spec.seed);
      break;
    }
    case Family::mlp:
      m.payload = fit_mlp(d.X, d.y, spec.get_int("hidden", 8), spec.get_int("epochs", 200),
                          spec.get("step", 0.05), spec.seed,
                          spec.get("activation", 0.0) != 0.0 ? Activation::identity
                                                             : Activation::tanh_act,
                          spec.get("dropout", 0.0));
      break;
    case Family::gru:
      m.payload = fit_gru(d.X, d.y, spec.get_int("hidden", 4), spec.get_int("seq_len", 4),
                          spec.get_int("epochs", 200), spec.get("step", 0.05), spec.seed);
      break;
  }
  return m;
}

/// Forecast from a static feature row. Sequence models need design context;
/// use predict_design for them.
inline double predict_row(const FittedModel& m, std::span<const double> x) {
  if (family_uses_features(m.spec.family) && x.size() != m.feature_names.size())
    throw ValidationError("predict: feature count mismatch");
  return std::visit(
      [&](const auto& payload) -> double {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, RwModel>) return predict_rw(payload, m.steps_ahead);
        else if constexpr (std::is_same_v<T, ArModel>) return predict_ar(payload, m.steps_ahead);
        else if constexpr (std::is_same_v<T, LinearModel>) return predict_linear(payload, x);
        else if constexpr (std::is_same_v<T, PcrModel>) return predict_linear(payload.coef, x);
        else if constexpr (std::is_same_v<T, PlsrModel>) return predict_linear(payload.coef, x);
        else if constexpr (std::is_same_v<T, ForestModel>) return payload.predict(x);
        else if constexpr (std::is_same_v<T, GbdtModel>) return payload.predict(x);
        else if constexpr (std::is_same_v<T, MlpModel>) return payload.predict(x);
        else
          throw ValidationError("gru forecasts need a sequence; use predict_design");
      },
      m.payload);
}

/// Sequence of design rows feeding the nowcast-quarter forecast of a GRU:
/// the last (seq_len - 1) training rows followed by the nowcast row.
inline std::vector<Vec> nowcast_sequence(const DesignMatrix& d, int seq_len) {
  if (d.n_rows() + 1 < static_cast<std::size_t>(seq_len))
    throw FitError("gru: not enough rows to form the nowcast sequence");
  std::vector<Vec> seq;
  for (std::size_t i = d.n_rows() + 1 - static_cast<std::size_t>(seq_len); i < d.n_rows(); ++i) {
    const auto row = d.X.row(i);
    seq.emplace_back(row.begin(), row.end());
  }
  seq.push_back(d.x_now);
  return seq;
}

inline double predict_design(const FittedModel& m, const DesignMatrix& d) {
  if (family_uses_features(m.spec.family) && d.feature_names() != m.feature_names)
    throw ValidationError("predict: design feature names do not match the fitted model");
  if (std::holds_alternative<GruModel>(m.payload)) {
    const auto& gru = std::get<GruModel>(m.payload);
    return gru.predict_sequence(nowcast_sequence(d, gru.seq_len));
  }
  return predict_row(m, d.x_now);
}

// ---------------------------------------------------------------------------
// Versioned text serialization for audit replay.

namespace detail {

inline nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Vec vec_from_json(const nlohmann::json& a) {
  Vec v;
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json a = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(std::move(row));
  }
  return a;
}

inline Matrix matrix_from_json(const nlohmann::json& a) {
  const std::size_t rows = a.size();
  const std::size_t cols = rows == 0 ? 0 : a[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = a[i][j].get<double>();
  return m;
}

inline nlohmann::json tree_json(const RegressionTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : t.nodes) {
    nodes.push_back({{"feature", nd.feature},
                     {"threshold", nd.threshold},
                     {"left", nd.left},
                     {"right", nd.right},
                     {"value", nd.value},
                     {"cover", nd.cover}});
  }
  return nodes;
}

inline RegressionTree tree_from_json(const nlohmann::json& nodes) {
  RegressionTree t;
  for (const auto& nd : nodes) {
    TreeNode n;
    n.feature = nd.at("feature").get<int>();
    n.threshold = nd.at("threshold").get<double>();
    n.left = nd.at("left").get<int>();
    n.right = nd.at("right").get<int>();
    n.value = nd.at("value").get<double>();
    n.cover = nd.at("cover").get<double>();
    t.nodes.push_back(n);
  }
  return t;
}

}  // namespace detail

inline nlohmann::json model_json(const FittedModel& m) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["family"] = to_string(m.spec.family);
  j["hyperparams"] = nlohmann::json::object();
  for (const auto& [k, v] : m.spec.hyper) j["hyperparams"][k] = v;
  j["seed"] = m.spec.seed;
  j["feature_names"] = m.feature_names;
  j["training_window"] = {{"start", m.train_start.str()}, {"end", m.train_end.str()}};
  j["steps_ahead"] = m.steps_ahead;
  j["target_stats"] = {{"mean", m.target_mean}, {"variance", m.target_var}};
  nlohmann::json p;
  std::visit(
      [&](const auto& payload) {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, RwModel>) {
          p["last"] = payload.last;
          p["drift"] = payload.drift;
        } else if constexpr (std::is_same_v<T, ArModel>) {
          p["phi"] = detail::vec_json(payload.phi);
          p["intercept"] = payload.intercept;
          p["recent"] = detail::vec_json(payload.recent);
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          p["beta"] = detail::vec_json(payload.beta);
          p["intercept"] = payload.intercept;
        } else if constexpr (std::is_same_v<T, PcrModel>) {
          p["beta"] = detail::vec_json(payload.coef.beta);
          p["intercept"] = payload.coef.intercept;
          p["loadings"] = detail::matrix_json(payload.loadings);
          p["gamma"] = detail::vec_json(payload.gamma);
          p["eigenvalues"] = detail::vec_json(payload.eigenvalues);
          p["explained_fraction"] = detail::vec_json(payload.explained_fraction);
        } else if constexpr (std::is_same_v<T, PlsrModel>) {
          p["beta"] = detail::vec_json(payload.coef.beta);
          p["intercept"] = payload.coef.intercept;
          p["weights"] = detail::matrix_json(payload.weights);
          p["loadings"] = detail::matrix_json(payload.loadings);
          p["q"] = detail::vec_json(payload.q);
          p["score_norms"] = detail::vec_json(payload.score_norms);
          p["ssy"] = detail::vec_json(payload.ssy);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          p["trees"] = nlohmann::json::array();
          for (const auto& t : payload.trees) p["trees"].push_back(detail::tree_json(t));
        } else if constexpr (std::is_same_v<T, GbdtModel>) {
          p["base"] = payload.base;
          p["learning_rate"] = payload.learning_rate;
          p["trees"] = nlohmann::json::array();
          for (const auto& t : payload.trees) p["trees"].push_back(detail::tree_json(t));
        } else if constexpr (std::is_same_v<T, MlpModel>) {
          p["w1"] = detail::matrix_json(payload.w1);
          p["b1"] = detail::vec_json(payload.b1);
          p["w2"] = detail::vec_json(payload.w2);
          p["b2"] = payload.b2;
          p["activation"] = payload.activation == Activation::identity ? "identity" : "tanh";
          p["final_loss"] = payload.final_loss;
        } else if constexpr (std::is_same_v<T, GruModel>) {
          p["wz"] = detail::matrix_json(payload.wz);
          p["wr"] = detail::matrix_json(payload.wr);
          p["wh"] = detail::matrix_json(payload.wh);
          p["uz"] = detail::matrix_json(payload.uz);
          p["ur"] = detail::matrix_json(payload.ur);
          p["uh"] = detail::matrix_json(payload.uh);
          p["bz"] = detail::vec_json(payload.bz);
          p["br"] = detail::vec_json(payload.br);
          p["bh"] = detail::vec_json(payload.bh);
          p["wo"] = detail::vec_json(payload.wo);
          p["bo"] = payload.bo;
          p["seq_len"] = payload.seq_len;
          p["final_loss"] = payload.final_loss;
        }
      },
      m.payload);
  j["payload"] = std::move(p);
  return j;
}

inline FittedModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
    throw ValidationError("model file: unsupported format_version");
  FittedModel m;
  auto fam = family_from_string(j.at("family").get<std::string>());
  if (!fam) throw ValidationError("model file: unknown family");
  m.spec.family = *fam;
  for (const auto& [k, v] : j.at("hyperparams").items()) m.spec.hyper[k] = v.get<double>();
  m.spec.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& n : j.at("feature_names")) m.feature_names.push_back(n.get<std::string>());
  m.train_start = Period::parse_or_throw(j.at("training_window").at("start").get<std::string>());
  m.train_end = Period::parse_or_throw(j.at("training_window").at("end").get<std::string>());
  m.steps_ahead = j.at("steps_ahead").get<int>();
  m.target_mean = j.at("target_stats").at("mean").get<double>();
  m.target_var = j.at("target_stats").at("variance").get<double>();
  const auto& p = j.at("payload");
  switch (m.spec.family) {
    case Family::rw:
    case Family::rw_drift: {
      RwModel payload;
      payload.last = p.at("last").get<double>();
      payload.drift = p.at("drift").get<double>();
      m.payload = payload;
      break;
    }
    case Family::ar: {
      ArModel payload;
      payload.phi = detail::vec_from_json(p.at("phi"));
      payload.intercept = p.at("intercept").get<double>();
      payload.recent = detail::vec_from_json(p.at("recent"));
      m.payload = payload;
      break;
    }
    case Family::ols:
    case Family::ridge:
    case Family::lasso:
    case Family::elastic_net: {
      LinearModel payload;
      payload.beta = detail::vec_from_json(p.at("beta"));
      payload.intercept = p.at("intercept").get<double>();
      m.payload = payload;
      break;
    }
    case Family::pcr: {
      PcrModel payload;
      payload.coef.beta = detail::vec_from_json(p.at("beta"));
      payload.coef.intercept = p.at("intercept").get<double>();
      payload.loadings = detail::matrix_from_json(p.at("loadings"));
      payload.gamma = detail::vec_from_json(p.at("gamma"));
      payload.eigenvalues = detail::vec_from_json(p.at("eigenvalues"));
      payload.explained_fraction = detail::vec_from_json(p.at("explained_fraction"));
      m.payload = payload;
      break;
    }
    case Family::plsr: {
      PlsrModel payload;
      payload.coef.beta = detail::vec_from_json(p.at("beta"));
      payload.coef.intercept = p.at("intercept").get<double>();
      payload.weights = detail::matrix_from_json(p.at("weights"));
      payload.loadings = detail::matrix_from_json(p.at("loadings"));
      payload.q = detail::vec_from_json(p.at("q"));
      payload.score_norms = detail::vec_from_json(p.at("score_norms"));
      payload.ssy = detail::vec_from_json(p.at("ssy"));
      m.payload = payload;
      break;
    }
    case Family::random_forest: {
      ForestModel payload;
      for (const auto& t : p.at("trees")) payload.trees.push_back(detail::tree_from_json(t));
      m.payload = payload;
      break;
    }
    case Family::gbdt: {
      GbdtModel payload;
      payload.base = p.at("base").get<double>();
      payload.learning_rate = p.at("learning_rate").get<double>();
      for (const auto& t : p.at("trees")) payload.trees.push_back(detail::tree_from_json(t));
      m.payload = payload;
      break;
    }
    case Family::mlp: {
      MlpModel payload;
      payload.w1 = detail::matrix_from_json(p.at("w1"));
      payload.b1 = detail::vec_from_json(p.at("b1"));
      payload.w2 = detail::vec_from_json(p.at("w2"));
      payload.b2 = p.at("b2").get<double>();
      payload.activation = p.at("activation").get<std::string>() == "identity"
                               ? Activation::identity
                               : Activation::tanh_act;
      payload.final_loss = p.at("final_loss").get<double>();
      m.payload = payload;
      break;
    }
    case Family::gru: {
      GruModel payload;
      payload.wz = detail::matrix_from_json(p.at("wz"));
      payload.wr = detail::matrix_from_json(p.at("wr"));
      payload.wh = detail::matrix_from_json(p.at("wh"));
      payload.uz = detail::matrix_from_json(p.at("uz"));
      payload.ur = detail::matrix_from_json(p.at("ur"));
      payload.uh = detail::matrix_from_json(p.at("uh"));
      payload.bz = detail::vec_from_json(p.at("bz"));
      payload.br = detail::vec_from_json(p.at("br"));
      payload.bh = detail::vec_from_json(p.at("bh"));
      payload.wo = detail::vec_from_json(p.at("wo"));
      payload.bo = p.at("bo").get<double>();
      payload.seq_len = p.at("seq_len").get<int>();
      payload.final_loss = p.at("final_loss").get<double>();
      m.payload = payload;
      break;
    }
  }
  return m;
}

}  // namespace nowcast
