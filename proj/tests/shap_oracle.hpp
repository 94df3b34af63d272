#pragma once

// Brute-force Shapley oracle for regression trees, independent of the
// production path algorithm. The coalition value v(S) conditions the tree on
// the features in S by traversal: known features follow x, unknown features
// split into both children weighted by training cover. Shapley values are the
// classic permutation-weighted sum over all subsets of the features the tree
// actually uses (everything else is a null player). Tractable to 12 features.

#include <set>
#include <span>
#include <vector>

#include "nowcast/models/tree.hpp"

namespace shap_oracle {

inline double expvalue(const nowcast::RegressionTree& tree, int node, std::span<const double> x,
                       const std::set<int>& known) {
  const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
  if (nd.feature < 0) return nd.value;
  if (known.count(nd.feature) > 0) {
    const int next = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    return expvalue(tree, next, x, known);
  }
  const double cl = tree.nodes[static_cast<std::size_t>(nd.left)].cover;
  const double cr = tree.nodes[static_cast<std::size_t>(nd.right)].cover;
  return (cl * expvalue(tree, nd.left, x, known) + cr * expvalue(tree, nd.right, x, known)) /
         (cl + cr);
}

inline std::vector<int> used_features(const nowcast::RegressionTree& tree) {
  std::set<int> used;
  for (const auto& nd : tree.nodes)
    if (nd.feature >= 0) used.insert(nd.feature);
  return {used.begin(), used.end()};
}

inline nowcast::Vec brute_force_shap(const nowcast::RegressionTree& tree,
                                     std::span<const double> x, std::size_t n_features) {
  nowcast::Vec phi(n_features, 0.0);
  const std::vector<int> used = used_features(tree);
  const std::size_t u = used.size();
  if (u == 0 || u > 12) return phi;

  double fact[13];
  fact[0] = 1.0;
  for (int i = 1; i <= 12; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

  const std::size_t masks = std::size_t{1} << u;
  std::vector<double> value(masks, 0.0);
  for (std::size_t mask = 0; mask < masks; ++mask) {
    std::set<int> known;
    for (std::size_t b = 0; b < u; ++b)
      if (mask & (std::size_t{1} << b)) known.insert(used[b]);
    value[mask] = expvalue(tree, 0, x, known);
  }

  for (std::size_t b = 0; b < u; ++b) {
    const std::size_t bit = std::size_t{1} << b;
    double total = 0.0;
    for (std::size_t mask = 0; mask < masks; ++mask) {
      if (mask & bit) continue;
      const int s = __builtin_popcountll(mask);
      const double weight =
          fact[s] * fact[static_cast<int>(u) - s - 1] / fact[static_cast<int>(u)];
      total += weight * (value[mask | bit] - value[mask]);
    }
    phi[static_cast<std::size_t>(used[b])] = total;
  }
  return phi;
}

}  // namespace shap_oracle
