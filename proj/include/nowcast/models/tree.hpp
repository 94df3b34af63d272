#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "nowcast/core/errors.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/core/rng.hpp"

namespace nowcast {

/// Binary regression tree node. Leaves have feature == -1. A sample goes left
/// when x[feature] <= threshold. cover is the number of training rows that
/// reached the node (the weight used by the Shapley path algorithm).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  double cover = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  [[nodiscard]] bool empty() const { return nodes.empty(); }

  [[nodiscard]] double predict(std::span<const double> x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(idx)];
      idx = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(idx)].value;
  }

  [[nodiscard]] int max_depth() const {
    int best = 0;
    struct Item { int node; int depth; };
    std::vector<Item> stack{{0, 0}};
    while (!stack.empty()) {
      auto [nd, depth] = stack.back();
      stack.pop_back();
      best = std::max(best, depth);
      const auto& n = nodes[static_cast<std::size_t>(nd)];
      if (n.feature >= 0) {
        stack.push_back({n.left, depth + 1});
        stack.push_back({n.right, depth + 1});
      }
    }
    return best;
  }
};

struct TreeGrowthConfig {
  int max_depth = 3;
  int min_leaf = 1;
  int mtry = 0;  // features considered per split; 0 = all
};

namespace detail {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Best variance-reduction split over the allowed features. Ties resolve to
/// the lowest feature index, then the lowest threshold, by scan order.
inline SplitChoice best_split(const Matrix& x, const Vec& y, const std::vector<int>& rows,
                              const std::vector<int>& features, int min_leaf) {
  SplitChoice best;
  const std::size_t n = rows.size();
  double sum = 0.0, sum_sq = 0.0;
  for (int r : rows) {
    sum += y[static_cast<std::size_t>(r)];
    sum_sq += y[static_cast<std::size_t>(r)] * y[static_cast<std::size_t>(r)];
  }
  const double parent_sse = sum_sq - sum * sum / static_cast<double>(n);
  std::vector<std::pair<double, double>> vals(n);  // (x, y) sorted per feature
  for (int f : features) {
    for (std::size_t i = 0; i < n; ++i) {
      const int r = rows[i];
      vals[i] = {x(static_cast<std::size_t>(r), static_cast<std::size_t>(f)),
                 y[static_cast<std::size_t>(r)]};
    }
    std::sort(vals.begin(), vals.end());
    double lsum = 0.0, lsq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      lsum += vals[i].second;
      lsq += vals[i].second * vals[i].second;
      if (vals[i].first == vals[i + 1].first) continue;  // equal values stay together
      const std::size_t cl = i + 1, cr = n - cl;
      if (cl < static_cast<std::size_t>(min_leaf) || cr < static_cast<std::size_t>(min_leaf))
        continue;
      const double rsum = sum - lsum, rsq = sum_sq - lsq;
      const double sse = (lsq - lsum * lsum / static_cast<double>(cl)) +
                         (rsq - rsum * rsum / static_cast<double>(cr));
      const double gain = parent_sse - sse;
      if (gain > best.gain + 1e-15 || !best.found) {
        if (gain <= 0.0) continue;
        best.found = true;
        best.gain = gain;
        best.feature = f;
        best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
      }
    }
  }
  return best;
}

inline int grow_node(RegressionTree& tree, const Matrix& x, const Vec& y, std::vector<int> rows,
                     const TreeGrowthConfig& cfg, int depth, Rng* rng) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  double sum = 0.0;
  for (int r : rows) sum += y[static_cast<std::size_t>(r)];
  tree.nodes[static_cast<std::size_t>(node_id)].value = sum / static_cast<double>(rows.size());
  tree.nodes[static_cast<std::size_t>(node_id)].cover = static_cast<double>(rows.size());
  if (depth >= cfg.max_depth || rows.size() < 2 * static_cast<std::size_t>(cfg.min_leaf))
    return node_id;

  std::vector<int> features(x.cols());
  std::iota(features.begin(), features.end(), 0);
  if (cfg.mtry > 0 && static_cast<std::size_t>(cfg.mtry) < features.size() && rng) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.mtry); ++i) {
      const std::size_t j = i + rng->next_below(features.size() - i);
      std::swap(features[i], features[j]);
    }
    features.resize(static_cast<std::size_t>(cfg.mtry));
    std::sort(features.begin(), features.end());
  }

  const SplitChoice split = best_split(x, y, rows, features, cfg.min_leaf);
  if (!split.found) return node_id;

  std::vector<int> left_rows, right_rows;
  for (int r : rows) {
    if (x(static_cast<std::size_t>(r), static_cast<std::size_t>(split.feature)) <= split.threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  tree.nodes[static_cast<std::size_t>(node_id)].feature = split.feature;
  tree.nodes[static_cast<std::size_t>(node_id)].threshold = split.threshold;
  const int left = grow_node(tree, x, y, std::move(left_rows), cfg, depth + 1, rng);
  tree.nodes[static_cast<std::size_t>(node_id)].left = left;
  const int right = grow_node(tree, x, y, std::move(right_rows), cfg, depth + 1, rng);
  tree.nodes[static_cast<std::size_t>(node_id)].right = right;
  return node_id;
}

}  // namespace detail

inline RegressionTree grow_tree(const Matrix& x, const Vec& y, const TreeGrowthConfig& cfg,
                                Rng* rng = nullptr, const std::vector<int>* row_subset = nullptr) {
  if (x.rows() == 0) throw ValidationError("tree fit on empty design");
  if (static_cast<std::size_t>(cfg.min_leaf) > x.rows())
    throw ValidationError("min_leaf " + std::to_string(cfg.min_leaf) +
                          " exceeds the sample size " + std::to_string(x.rows()));
  std::vector<int> rows;
  if (row_subset) {
    rows = *row_subset;
  } else {
    rows.resize(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
  }
  RegressionTree tree;
  detail::grow_node(tree, x, y, std::move(rows), cfg, 0, rng);
  return tree;
}

/// Bagged ensemble: each tree sees a bootstrap sample (optional) and draws a
/// fresh feature subset per split. Prediction is the unweighted tree mean.
struct ForestModel {
  std::vector<RegressionTree> trees;

  [[nodiscard]] double predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }
};

inline constexpr std::uint64_t kRfStream = 0x52464f52u;    // per-tree substream tag
inline constexpr std::uint64_t kGbdtStream = 0x47424454u;  // per-round substream tag

inline ForestModel fit_random_forest(const Matrix& x, const Vec& y, int trees,
                                     const TreeGrowthConfig& cfg, bool bootstrap,
                                     std::uint64_t seed) {
  if (trees < 1) throw ValidationError("random_forest: trees must be >= 1");
  ForestModel m;
  const std::size_t n = x.rows();
  for (int t = 0; t < trees; ++t) {
    Rng rng = Rng::keyed(seed, {kRfStream, static_cast<std::uint64_t>(t)});
    std::vector<int> rows(n);
    if (bootstrap) {
      for (auto& r : rows) r = static_cast<int>(rng.next_below(n));
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    m.trees.push_back(grow_tree(x, y, cfg, &rng, &rows));
  }
  return m;
}

/// Gradient boosting with squared loss: start from mean(y), then add
/// learning_rate-scaled trees fit to the current residuals.
struct GbdtModel {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  [[nodiscard]] double predict(std::span<const double> x) const {
    double s = base;
    for (const auto& t : trees) s += learning_rate * t.predict(x);
    return s;
  }
};

inline GbdtModel fit_gbdt(const Matrix& x, const Vec& y, int rounds, const TreeGrowthConfig& cfg,
                          double learning_rate, double subsample, std::uint64_t seed) {
  if (rounds < 1) throw ValidationError("gbdt: trees must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("gbdt: learning_rate must be > 0");
  if (!(subsample > 0.0 && subsample <= 1.0))
    throw ValidationError("gbdt: subsample must lie in (0,1]");
  const std::size_t n = x.rows();
  GbdtModel m;
  m.base = mean(y);
  m.learning_rate = learning_rate;
  Vec residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - m.base;
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(subsample * static_cast<double>(n))));
  for (int round = 0; round < rounds; ++round) {
    Rng rng = Rng::keyed(seed, {kGbdtStream, static_cast<std::uint64_t>(round)});
    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (keep < n) {
      for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + rng.next_below(n - i);
        std::swap(rows[i], rows[j]);
      }
      rows.resize(keep);
      std::sort(rows.begin(), rows.end());
    }
    RegressionTree tree = grow_tree(x, residual, cfg, &rng, &rows);
    for (std::size_t i = 0; i < n; ++i)
      residual[i] -= learning_rate * tree.predict(x.row(i));
    m.trees.push_back(std::move(tree));
  }
  return m;
}

}  // namespace nowcast
