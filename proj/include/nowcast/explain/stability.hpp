#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "nowcast/explain/attribution.hpp"

namespace nowcast {
namespace detail {

/// Average ranks (1-based; ties share the mean of their positions).
inline Vec average_ranks(const Vec& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  Vec ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const Vec& a, const Vec& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return saa == sbb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Spearman correlation of |attribution| ranks between two profiles.
inline double rank_correlation(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("rank correlation: need two equally sized profiles");
  Vec am(a.size()), bm(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    am[i] = std::abs(a[i]);
    bm[i] = std::abs(b[i]);
  }
  return detail::pearson(detail::average_ranks(am), detail::average_ranks(bm));
}

struct InstabilityFlag {
  Date from, to;
  std::string feature;
  int rank_from = 0;  // 1 = most important
  int rank_to = 0;
};

struct SignCoherence {
  std::string feature;
  int prior = 0;               // declared sign, +1 or -1
  double share_matching = 0.0;  // fraction of origins whose sign agrees
  bool contradicted = false;    // matches at no more than half the origins
};

struct StabilityReport {
  Vec rank_correlations;  // one per consecutive origin pair
  std::vector<std::string> features;
  Vec iqr;  // per-feature interquartile range of attributions across origins
  std::vector<InstabilityFlag> flags;
  std::vector<SignCoherence> sign_table;
  int rank_move_threshold = 3;
  int top_k = 10;
};

/// Cross-origin stability audit: consecutive Spearman rank correlations,
/// per-feature attribution IQR, rank jumps among the top-k features between
/// origins whose design digest did not change (no new data justifies a move),
/// and sign coherence against declared economic priors. Empty digests treat
/// every transition as data-unchanged.
inline StabilityReport stability_report(const std::vector<AttributionVector>& profiles,
                                        const std::map<std::string, int>& priors,
                                        const std::vector<std::string>& digests = {},
                                        int rank_move_threshold = 3, int top_k = 10) {
  if (profiles.size() < 2) throw ValidationError("stability report: need at least two origins");
  const auto& features = profiles.front().features;
  for (const auto& p : profiles)
    if (p.features != features)
      throw ValidationError("stability report: attribution feature sets do not match");
  if (!digests.empty() && digests.size() != profiles.size())
    throw ValidationError("stability report: need one design digest per origin");

  StabilityReport r;
  r.features = features;
  r.rank_move_threshold = rank_move_threshold;
  r.top_k = top_k;
  const std::size_t nf = features.size();

  // importance ranks per origin: 1 = largest |attribution|
  std::vector<std::vector<int>> ranks(profiles.size(), std::vector<int>(nf, 0));
  for (std::size_t o = 0; o < profiles.size(); ++o) {
    std::vector<std::size_t> order(nf);
    for (std::size_t j = 0; j < nf; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(profiles[o].values[x]) > std::abs(profiles[o].values[y]);
    });
    for (std::size_t pos = 0; pos < nf; ++pos) ranks[o][order[pos]] = static_cast<int>(pos) + 1;
  }

  for (std::size_t o = 0; o + 1 < profiles.size(); ++o) {
    r.rank_correlations.push_back(
        rank_correlation(profiles[o].values, profiles[o + 1].values));
    const bool data_unchanged = digests.empty() || digests[o] == digests[o + 1];
    if (!data_unchanged) continue;
    for (std::size_t j = 0; j < nf; ++j) {
      const int from = ranks[o][j], to = ranks[o + 1][j];
      if (std::min(from, to) > top_k) continue;
      if (std::abs(from - to) > rank_move_threshold)
        r.flags.push_back({profiles[o].origin, profiles[o + 1].origin, features[j], from, to});
    }
  }

  r.iqr.resize(nf);
  for (std::size_t j = 0; j < nf; ++j) {
    Vec vals;
    for (const auto& p : profiles) vals.push_back(p.values[j]);
    r.iqr[j] = quantile_linear(vals, 0.75) - quantile_linear(vals, 0.25);
  }

  for (const auto& [feature, prior] : priors) {
    const auto it = std::find(features.begin(), features.end(), feature);
    if (it == features.end())
      throw ValidationError("stability report: prior declared for unknown feature '" + feature +
                            "'");
    const std::size_t j = static_cast<std::size_t>(it - features.begin());
    std::size_t matching = 0;
    for (const auto& p : profiles)
      if ((p.values[j] > 0.0 && prior > 0) || (p.values[j] < 0.0 && prior < 0)) ++matching;
    SignCoherence row;
    row.feature = feature;
    row.prior = prior;
    row.share_matching = static_cast<double>(matching) / static_cast<double>(profiles.size());
    row.contradicted = row.share_matching < 0.5;
    r.sign_table.push_back(row);
  }
  return r;
}

inline std::string stability_csv(const StabilityReport& r) {
  std::string out = "feature,iqr\n";
  for (std::size_t j = 0; j < r.features.size(); ++j) {
    out += csv_join({r.features[j], format_double(r.iqr[j])});
    out += '\n';
  }
  return out;
}

}  // namespace nowcast
