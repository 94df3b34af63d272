#pragma once

#include <vector>

#include "nowcast/explain/attribution.hpp"

namespace nowcast {
namespace detail {

/// One feature along the current decision path: the fraction of cover-weighted
/// paths that flow through when the feature is out of the coalition (zero) or
/// in it (one), plus the permutation weight of the subsets of this size.
struct PathElement {
  int d = -1;
  double zero = 0.0;
  double one = 0.0;
  double w = 0.0;
};

using Path = std::vector<PathElement>;

inline void path_extend(Path& m, double pz, double po, int pi) {
  const int l = static_cast<int>(m.size());
  m.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
  for (int i = l - 1; i >= 0; --i) {
    m[static_cast<std::size_t>(i + 1)].w +=
        po * m[static_cast<std::size_t>(i)].w * static_cast<double>(i + 1) /
        static_cast<double>(l + 1);
    m[static_cast<std::size_t>(i)].w = pz * m[static_cast<std::size_t>(i)].w *
                                       static_cast<double>(l - i) / static_cast<double>(l + 1);
  }
}

inline Path path_unwind(Path m, int k) {
  const int l = static_cast<int>(m.size());
  const double one = m[static_cast<std::size_t>(k)].one;
  const double zero = m[static_cast<std::size_t>(k)].zero;
  double n = m[static_cast<std::size_t>(l - 1)].w;
  for (int j = l - 2; j >= 0; --j) {
    auto& el = m[static_cast<std::size_t>(j)];
    if (one != 0.0) {
      const double t = el.w;
      el.w = n * static_cast<double>(l) / (static_cast<double>(j + 1) * one);
      n = t - el.w * zero * static_cast<double>(l - 1 - j) / static_cast<double>(l);
    } else {
      el.w = el.w * static_cast<double>(l) / (zero * static_cast<double>(l - 1 - j));
    }
  }
  for (int j = k; j < l - 1; ++j) {
    m[static_cast<std::size_t>(j)].d = m[static_cast<std::size_t>(j + 1)].d;
    m[static_cast<std::size_t>(j)].zero = m[static_cast<std::size_t>(j + 1)].zero;
    m[static_cast<std::size_t>(j)].one = m[static_cast<std::size_t>(j + 1)].one;
  }
  m.pop_back();
  return m;
}

inline void shap_recurse(const RegressionTree& tree, std::span<const double> x, Vec& phi, int node,
                         Path m, double pz, double po, int pi) {
  path_extend(m, pz, po, pi);
  const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
  if (nd.feature < 0) {
    for (int i = 1; i < static_cast<int>(m.size()); ++i) {
      Path unwound = path_unwind(m, i);
      double w = 0.0;
      for (const auto& el : unwound) w += el.w;
      phi[static_cast<std::size_t>(m[static_cast<std::size_t>(i)].d)] +=
          w * (m[static_cast<std::size_t>(i)].one - m[static_cast<std::size_t>(i)].zero) *
          nd.value;
    }
    return;
  }
  const bool goes_left = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold;
  const int hot = goes_left ? nd.left : nd.right;
  const int cold = goes_left ? nd.right : nd.left;
  double iz = 1.0, io = 1.0;
  for (int k = 0; k < static_cast<int>(m.size()); ++k) {
    if (m[static_cast<std::size_t>(k)].d == nd.feature) {
      iz = m[static_cast<std::size_t>(k)].zero;
      io = m[static_cast<std::size_t>(k)].one;
      m = path_unwind(std::move(m), k);
      break;
    }
  }
  const double cover = nd.cover;
  shap_recurse(tree, x, phi, hot, m,
               iz * tree.nodes[static_cast<std::size_t>(hot)].cover / cover, io, nd.feature);
  shap_recurse(tree, x, phi, cold, m,
               iz * tree.nodes[static_cast<std::size_t>(cold)].cover / cover, 0.0, nd.feature);
}

}  // namespace detail

/// Exact Shapley values of one tree under path-dependent conditioning (the
/// TreeExplainer algorithm): an out-of-coalition feature splits flow across
/// both children in proportion to training cover. The base value is the
/// cover-weighted leaf mean, which equals the root's stored mean.
inline Vec tree_shap_values(const RegressionTree& tree, std::span<const double> x,
                            std::size_t n_features) {
  Vec phi(n_features, 0.0);
  if (tree.empty()) return phi;
  detail::shap_recurse(tree, x, phi, 0, {}, 1.0, 1.0, -1);
  return phi;
}

/// Local Shapley attribution of a tree-ensemble prediction at x. Forest
/// attributions average per-tree values; boosted attributions sum them scaled
/// by the learning rate on top of the boosting base.
inline AttributionVector tree_shap(const FittedModel& m, const DesignMatrix& d) {
  AttributionVector a;
  a.origin = d.origin;
  a.model_id = m.spec.id();
  a.method = AttributionMethod::tree_shap;
  a.features = m.feature_names;
  const std::size_t nf = a.features.size();
  a.values.assign(nf, 0.0);
  std::span<const double> x(d.x_now);
  if (x.size() != nf) throw ValidationError("tree_shap: feature count mismatch");

  if (m.spec.family == Family::random_forest) {
    const auto& forest = std::get<ForestModel>(m.payload);
    const double t = static_cast<double>(forest.trees.size());
    double base = 0.0;
    for (const auto& tree : forest.trees) {
      Vec phi = tree_shap_values(tree, x, nf);
      for (std::size_t j = 0; j < nf; ++j) a.values[j] += phi[j] / t;
      base += tree.nodes[0].value / t;
    }
    a.base_value = base;
  } else if (m.spec.family == Family::gbdt) {
    const auto& boosted = std::get<GbdtModel>(m.payload);
    double base = boosted.base;
    for (const auto& tree : boosted.trees) {
      Vec phi = tree_shap_values(tree, x, nf);
      for (std::size_t j = 0; j < nf; ++j) a.values[j] += boosted.learning_rate * phi[j];
      base += boosted.learning_rate * tree.nodes[0].value;
    }
    a.base_value = base;
  } else {
    throw ValidationError("tree_shap: family " + to_string(m.spec.family) +
                          " is not a tree ensemble");
  }
  a.metadata["conditioning"] = "path_dependent_cover";
  return a;
}

}  // namespace nowcast
