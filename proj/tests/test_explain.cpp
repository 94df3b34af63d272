#include <doctest.h>

#include <cmath>
#include <set>

#include "nowcast/core/rng.hpp"
#include "nowcast/explain/ig.hpp"
#include "nowcast/explain/stability.hpp"
#include "nowcast/explain/treeshap.hpp"
#include "shap_oracle.hpp"

using namespace nowcast;

namespace {

DesignMatrix make_design(std::size_t n, std::size_t p, std::uint64_t seed, double noise = 0.2) {
  DesignMatrix d;
  Rng rng = Rng::keyed(seed, {0x45585054u});
  d.X = Matrix(n, p);
  d.y.resize(n);
  Period start = Period::parse_or_throw("2013-Q1");
  for (std::size_t i = 0; i < n; ++i) {
    d.target_periods.push_back(start.plus(static_cast<std::int64_t>(i)));
    for (std::size_t j = 0; j < p; ++j) d.X(i, j) = rng.next_gaussian();
    d.y[i] = 0.3 + 2.0 * d.X(i, 0) - 0.7 * d.X(i, std::min<std::size_t>(1, p - 1)) +
             noise * rng.next_gaussian();
  }
  d.nowcast_period = d.target_periods.back().next();
  d.origin = d.nowcast_period.first_date().plus_days(40);
  d.steps_ahead = 1;
  d.x_now.resize(p);
  for (std::size_t j = 0; j < p; ++j) d.x_now[j] = rng.next_gaussian();
  for (std::size_t j = 0; j < p; ++j) {
    FeatureMeta meta;
    meta.name = "f" + std::to_string(j);
    d.feature_meta.push_back(meta);
  }
  return d;
}

ModelSpec spec_of(Family f, std::map<std::string, double> hyper = {}, std::uint64_t seed = 0) {
  ModelSpec s;
  s.family = f;
  s.hyper = std::move(hyper);
  s.seed = seed;
  return s;
}

FittedModel hand_linear(const Vec& beta, double intercept,
                        const std::vector<std::string>& names) {
  FittedModel m;
  m.spec = spec_of(Family::ols);
  m.feature_names = names;
  m.payload = LinearModel{beta, intercept};
  return m;
}

AttributionVector profile_of(const Vec& values, const std::string& origin_day) {
  AttributionVector a;
  a.origin = Date::parse_or_throw(origin_day);
  a.features.resize(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) a.features[j] = "f" + std::to_string(j);
  a.values = values;
  return a;
}

}  // namespace

TEST_SUITE("explain") {

TEST_CASE("coefficient importance scales by the training standard deviation") {
  DesignMatrix d = make_design(4, 2, 601);
  for (std::size_t i = 0; i < 4; ++i) {
    d.X(i, 0) = (i % 2 == 0) ? -1.0 : 1.0;  // population sd 1
    d.X(i, 1) = (i % 2 == 0) ? -2.0 : 2.0;  // population sd 2
  }
  FittedModel m = hand_linear({2.0, -1.0}, 0.5, {"f0", "f1"});
  AttributionVector a = coefficient_importance(m, d);
  CHECK(a.values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.values[1] == doctest::Approx(-2.0).epsilon(1e-12));

  FittedModel zero = hand_linear({0.0, 3.0}, 0.0, {"f0", "f1"});
  CHECK(coefficient_importance(zero, d).values[0] == 0.0);
}

TEST_CASE("standardized importance is invariant to feature rescaling") {
  DesignMatrix d = make_design(40, 3, 602);
  FittedModel m = fit(spec_of(Family::ols), d);
  AttributionVector before = coefficient_importance(m, d);

  DesignMatrix scaled = d;
  for (std::size_t i = 0; i < scaled.n_rows(); ++i) scaled.X(i, 1) *= 5.0;
  scaled.x_now[1] *= 5.0;
  FittedModel m2 = fit(spec_of(Family::ols), scaled);
  AttributionVector after = coefficient_importance(m2, scaled);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(after.values[j] == doctest::Approx(before.values[j]).epsilon(1e-8));
}

TEST_CASE("target-only families carry zero feature weight") {
  DesignMatrix d = make_design(12, 2, 603);
  FittedModel m = fit(spec_of(Family::rw), d);
  AttributionVector global = coefficient_importance(m, d);
  CHECK(global.values == Vec{0.0, 0.0});

  AttributionVector local = linear_contributions(m, d);
  CHECK(local.values == Vec{0.0, 0.0});
  CHECK(local.base_value == predict_design(m, d));
}

TEST_CASE("families without coefficients are rejected") {
  DesignMatrix d = make_design(20, 2, 604);
  FittedModel rf = fit(spec_of(Family::random_forest, {{"trees", 3}, {"depth", 2}}, 5), d);
  CHECK_THROWS_WITH_AS((void)coefficient_importance(rf, d),
                       doctest::Contains("coefficient"), ValidationError);
}

TEST_CASE("linear contributions reconcile to the prediction") {
  DesignMatrix d = make_design(25, 3, 605);
  FittedModel m = fit(spec_of(Family::ridge, {{"lambda", 0.2}}), d);
  AttributionVector a = linear_contributions(m, d);
  double total = 0.0;
  for (double v : a.values) total += v;
  CHECK(a.base_value + total == doctest::Approx(predict_design(m, d)).epsilon(1e-12));
}

TEST_CASE("vip scores keep their normalization through the wrapper") {
  DesignMatrix d = make_design(30, 4, 606);
  FittedModel m = fit(spec_of(Family::plsr, {{"k", 2}}), d);
  AttributionVector a = vip_importance(m, d);
  double sq = 0.0;
  for (double v : a.values) {
    CHECK(v >= 0.0);
    sq += v * v;
  }
  CHECK(sq == doctest::Approx(4.0).epsilon(1e-8));
  FittedModel ols = fit(spec_of(Family::ols), d);
  CHECK_THROWS_AS((void)vip_importance(ols, d), ValidationError);
}

TEST_CASE("a single-block permutation is the identity and scores zero") {
  DesignMatrix d = make_design(20, 3, 607);
  FittedModel m = fit(spec_of(Family::ols), d);
  AttributionVector a = block_permutation_importance(m, d, LossKind::squared,
                                                     static_cast<int>(d.n_rows()), 7, 42);
  for (double v : a.values) CHECK(v == 0.0);
  for (double se : a.stderr_values) CHECK(se == 0.0);
}

TEST_CASE("pure noise importance straddles zero and signal dominates") {
  // feature 1 is independent of the target in both windows; feature 0 drives it
  auto noise_design = [](std::size_t n, std::uint64_t seed) {
    DesignMatrix d = make_design(n, 2, seed, 0.05);
    Rng rng = Rng::keyed(seed, {0x4e4f4953u});
    for (std::size_t i = 0; i < n; ++i) {
      d.X(i, 1) = rng.next_gaussian();
      d.y[i] = 0.3 + 2.0 * d.X(i, 0) + 0.05 * rng.next_gaussian();
    }
    return d;
  };
  DesignMatrix train = noise_design(80, 608);
  DesignMatrix eval = noise_design(60, 609);
  FittedModel m = fit(spec_of(Family::ols), train);
  AttributionVector a = block_permutation_importance(m, eval, LossKind::squared, 5, 50, 43);
  CHECK(std::abs(a.values[1]) <= 2.0 * a.stderr_values[1]);
  CHECK(a.values[0] > 100.0 * std::max(a.values[1], 0.0));
  CHECK(a.values[0] > 0.0);
}

TEST_CASE("duplicating a decisive feature dilutes each copy's importance") {
  DesignMatrix solo = make_design(60, 2, 611, 0.05);
  DesignMatrix dup = make_design(60, 3, 611, 0.05);
  for (std::size_t i = 0; i < 60; ++i) {
    dup.X(i, 0) = solo.X(i, 0);
    dup.X(i, 1) = solo.X(i, 0);  // exact duplicate; ridge splits the weight
    dup.X(i, 2) = solo.X(i, 1);
    dup.y[i] = solo.y[i];
  }
  dup.x_now = {solo.x_now[0], solo.x_now[0], solo.x_now[1]};
  ModelSpec ridge = spec_of(Family::ridge, {{"lambda", 0.1}});
  AttributionVector alone =
      block_permutation_importance(fit(ridge, solo), solo, LossKind::squared, 5, 20, 44);
  AttributionVector split =
      block_permutation_importance(fit(ridge, dup), dup, LossKind::squared, 5, 20, 44);
  CHECK(split.values[0] < alone.values[0]);
  CHECK(split.values[1] < alone.values[0]);
}

TEST_CASE("permutation preconditions") {
  DesignMatrix d = make_design(10, 2, 612);
  FittedModel m = fit(spec_of(Family::ols), d);
  CHECK_THROWS_AS((void)block_permutation_importance(m, d, LossKind::squared, 11, 5, 1),
                  ValidationError);
  CHECK_THROWS_AS((void)block_permutation_importance(m, d, LossKind::squared, 0, 5, 1),
                  ValidationError);
  CHECK_THROWS_AS((void)block_permutation_importance(m, d, LossKind::squared, 2, 0, 1),
                  ValidationError);
}

TEST_CASE("a single-feature tree attributes the whole gap to that feature") {
  DesignMatrix d = make_design(24, 3, 613);
  for (std::size_t i = 0; i < 24; ++i) d.y[i] = d.X(i, 1) > 0.0 ? 4.0 : -4.0;
  FittedModel m = fit(
      spec_of(Family::random_forest, {{"trees", 1}, {"depth", 1}, {"bootstrap", 0}, {"mtry", 3}},
              3),
      d);
  AttributionVector a = tree_shap(m, d);
  const double pred = predict_design(m, d);
  CHECK(a.values[0] == 0.0);
  CHECK(a.values[2] == 0.0);
  CHECK(a.base_value + a.values[1] == doctest::Approx(pred).epsilon(1e-12));
}

TEST_CASE("tree shap equals brute-force coalition enumeration") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    DesignMatrix d = make_design(30, 5, 700 + seed, 1.0);
    FittedModel gb = fit(
        spec_of(Family::gbdt, {{"trees", 3}, {"depth", 3}, {"learning_rate", 0.5}}, seed), d);
    FittedModel rf = fit(
        spec_of(Family::random_forest, {{"trees", 4}, {"depth", 3}, {"min_leaf", 2}}, seed), d);

    std::vector<const RegressionTree*> trees;
    for (const auto& t : std::get<GbdtModel>(gb.payload).trees) trees.push_back(&t);
    for (const auto& t : std::get<ForestModel>(rf.payload).trees) trees.push_back(&t);

    Rng rng = Rng::keyed(seed, {0x584f4cu});
    for (int rep = 0; rep < 3; ++rep) {
      Vec x(5);
      for (auto& v : x) v = rng.next_gaussian();
      for (const auto* tree : trees) {
        Vec fast = tree_shap_values(*tree, x, 5);
        Vec slow = shap_oracle::brute_force_shap(*tree, x, 5);
        for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(fast[j] - slow[j]) <= 1e-9);
      }
    }

    AttributionVector ag = tree_shap(gb, d);
    double total = ag.base_value;
    for (double v : ag.values) total += v;
    CHECK(total == doctest::Approx(predict_design(gb, d)).epsilon(1e-9));

    AttributionVector af = tree_shap(rf, d);
    total = af.base_value;
    for (double v : af.values) total += v;
    CHECK(total == doctest::Approx(predict_design(rf, d)).epsilon(1e-9));
  }
}

TEST_CASE("a constant tree attributes nothing") {
  DesignMatrix d = make_design(15, 2, 614);
  std::fill(d.y.begin(), d.y.end(), 1.5);
  FittedModel m = fit(spec_of(Family::gbdt, {{"trees", 2}, {"depth", 2}}, 2), d);
  AttributionVector a = tree_shap(m, d);
  for (double v : a.values) CHECK(v == 0.0);
  CHECK(a.base_value == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("ensemble attribution is the scaled sum of per-tree values") {
  DesignMatrix d = make_design(28, 3, 615, 0.8);
  FittedModel m = fit(
      spec_of(Family::gbdt, {{"trees", 4}, {"depth", 2}, {"learning_rate", 0.3}}, 9), d);
  const auto& payload = std::get<GbdtModel>(m.payload);
  AttributionVector a = tree_shap(m, d);
  Vec manual(3, 0.0);
  double base = payload.base;
  for (const auto& tree : payload.trees) {
    Vec phi = tree_shap_values(tree, d.x_now, 3);
    for (std::size_t j = 0; j < 3; ++j) manual[j] += payload.learning_rate * phi[j];
    base += payload.learning_rate * tree.nodes[0].value;
  }
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(a.values[j] == doctest::Approx(manual[j]).epsilon(1e-12));
  CHECK(a.base_value == doctest::Approx(base).epsilon(1e-12));

  FittedModel lin = fit(spec_of(Family::ols), d);
  CHECK_THROWS_AS((void)tree_shap(lin, d), ValidationError);
}

TEST_CASE("integrated gradients are exact for affine models at any step count") {
  DesignMatrix d = make_design(10, 3, 616);
  FittedModel m;
  m.spec = spec_of(Family::mlp);
  m.feature_names = {"f0", "f1", "f2"};
  MlpModel mlp;
  mlp.w1 = Matrix(2, 3);
  double vals[] = {0.5, -1.0, 2.0, 1.5, 0.25, -0.75};
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t j = 0; j < 3; ++j) mlp.w1(h, j) = vals[h * 3 + j];
  mlp.b1 = {0.1, -0.2};
  mlp.w2 = {1.2, -0.4};
  mlp.b2 = 0.3;
  mlp.activation = Activation::identity;
  m.payload = mlp;

  Vec baseline = {0.2, -0.5, 1.0};
  Vec w_eff(3, 0.0);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t j = 0; j < 3; ++j) w_eff[j] += mlp.w2[h] * mlp.w1(h, j);

  for (int steps : {16, 64, 257}) {
    AttributionVector a = integrated_gradients(m, d, baseline, steps);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(a.values[j] ==
            doctest::Approx(w_eff[j] * (d.x_now[j] - baseline[j])).epsilon(1e-12));
  }
}

TEST_CASE("an input equal to the baseline attributes nothing") {
  DesignMatrix d = make_design(30, 2, 617);
  FittedModel m = fit(spec_of(Family::mlp, {{"hidden", 4}, {"epochs", 50}, {"step", 0.05}}, 4), d);
  AttributionVector a = integrated_gradients(m, d, d.x_now, 32, "self");
  for (double v : a.values) CHECK(v == 0.0);
  CHECK(a.base_value == doctest::Approx(predict_design(m, d)).epsilon(1e-12));
}

TEST_CASE("completeness holds for a trained mlp at 256 steps") {
  DesignMatrix d = make_design(40, 3, 618);
  FittedModel m =
      fit(spec_of(Family::mlp, {{"hidden", 6}, {"epochs", 300}, {"step", 0.05}}, 11), d);
  AttributionVector a = integrated_gradients(m, d, IgBaseline::window_median, 256);
  const auto& mlp = std::get<MlpModel>(m.payload);
  Vec baseline = ig_baseline(d, IgBaseline::window_median);
  const double delta = mlp.predict(d.x_now) - mlp.predict(baseline);
  double total = 0.0;
  for (double v : a.values) total += v;
  CHECK(std::abs(total - delta) / std::max(1.0, std::abs(delta)) < 1e-3);
  CHECK(std::stod(a.metadata.at("completeness_residual")) < 1e-3);
}

TEST_CASE("midpoint attributions agree with a high-resolution oracle") {
  DesignMatrix d = make_design(40, 3, 619);
  FittedModel m =
      fit(spec_of(Family::mlp, {{"hidden", 5}, {"epochs", 250}, {"step", 0.05}}, 13), d);
  const auto& mlp = std::get<MlpModel>(m.payload);
  Vec baseline = ig_baseline(d, IgBaseline::window_median);

  // oracle: 10,000-step midpoint integral of central finite-difference
  // gradients of the raw prediction, independent of grad_input
  const int oracle_steps = 10000;
  const double h = 1e-6;
  Vec oracle(3, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    double acc = 0.0;
    for (int s = 0; s < oracle_steps; ++s) {
      const double t = (static_cast<double>(s) + 0.5) / oracle_steps;
      Vec point(3);
      for (std::size_t k = 0; k < 3; ++k)
        point[k] = baseline[k] + t * (d.x_now[k] - baseline[k]);
      Vec hi = point, lo = point;
      hi[j] += h;
      lo[j] -= h;
      acc += (mlp.predict(hi) - mlp.predict(lo)) / (2.0 * h);
    }
    oracle[j] = (d.x_now[j] - baseline[j]) * acc / oracle_steps;
  }

  AttributionVector a = integrated_gradients(m, d, IgBaseline::window_median, 256);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(a.values[j] - oracle[j]) < 1e-3);
}

TEST_CASE("gru attributions sum per-step integrals and satisfy completeness") {
  DesignMatrix d = make_design(20, 2, 620);
  FittedModel m = fit(
      spec_of(Family::gru, {{"hidden", 2}, {"seq_len", 3}, {"epochs", 60}, {"step", 0.05}}, 6),
      d);
  AttributionVector a = integrated_gradients(m, d, IgBaseline::window_median, 256);
  CHECK(a.metadata.at("sequence_steps") == "3");
  CHECK(std::stod(a.metadata.at("completeness_residual")) < 1e-3);

  const auto& gru = std::get<GruModel>(m.payload);
  std::vector<Vec> seq = nowcast_sequence(d, gru.seq_len);
  Vec baseline = ig_baseline(d, IgBaseline::window_median);
  std::vector<Vec> base_seq(seq.size(), baseline);
  const double delta = gru.predict_sequence(seq) - gru.predict_sequence(base_seq);
  double total = 0.0;
  for (double v : a.values) total += v;
  CHECK(std::abs(total - delta) <= 1e-3 * std::max(1.0, std::abs(delta)));
}

TEST_CASE("integrated gradients preconditions and metadata") {
  DesignMatrix d = make_design(30, 2, 621);
  FittedModel mlp = fit(spec_of(Family::mlp, {{"hidden", 3}, {"epochs", 30}}, 2), d);
  CHECK_THROWS_AS((void)integrated_gradients(mlp, d, IgBaseline::zeros, 8), ValidationError);
  FittedModel rf = fit(spec_of(Family::random_forest, {{"trees", 2}, {"depth", 2}}, 2), d);
  CHECK_THROWS_AS((void)integrated_gradients(rf, d, IgBaseline::zeros, 64), ValidationError);

  AttributionVector a = integrated_gradients(mlp, d, IgBaseline::zeros, 64);
  CHECK(a.metadata.at("baseline").find("not economically interpretable") != std::string::npos);
  CHECK_THROWS_AS((void)ig_baseline(d, IgBaseline::preshock_mean, 0), ValidationError);
  Vec pre = ig_baseline(d, IgBaseline::preshock_mean, 10);
  CHECK(pre.size() == 2);
}

TEST_CASE("a single identity replicate collapses the importance band") {
  DesignMatrix d = make_design(20, 2, 622);
  BlockBootstrapConfig cfg;
  cfg.replicates = 1;
  cfg.block_length = static_cast<int>(d.n_rows());
  ImportanceProfile p = importance_bands(d, spec_of(Family::ridge, {{"lambda", 0.1}}),
                                         AttributionMethod::coefficients, cfg, 0.2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(p.lower[j] == p.central[j]);
    CHECK(p.upper[j] == p.central[j]);
  }
}

TEST_CASE("importance bands bracket a strong feature away from zero") {
  DesignMatrix d = make_design(60, 2, 623, 0.1);
  BlockBootstrapConfig cfg;
  cfg.replicates = 60;
  cfg.block_length = 4;
  ImportanceProfile p = importance_bands(d, spec_of(Family::ols),
                                         AttributionMethod::coefficients, cfg, 0.1);
  CHECK(p.lower[0] > 0.0);          // beta 2.0 with tight noise
  CHECK(p.upper[1] < 0.0);          // beta -0.7
  CHECK(p.sign_share[0] == 1.0);
  CHECK(p.sign_share[1] == 0.0);
  ImportanceProfile again = importance_bands(d, spec_of(Family::ols),
                                             AttributionMethod::coefficients, cfg, 0.1);
  CHECK(p.central == again.central);
  CHECK(p.lower == again.lower);

  CHECK_THROWS_AS((void)importance_bands(d, spec_of(Family::ols),
                                         AttributionMethod::permutation, cfg, 0.1),
                  ValidationError);
}

TEST_CASE("a constant pipeline yields zero importances with zero-width bands") {
  DesignMatrix d = make_design(18, 2, 624);
  BlockBootstrapConfig cfg;
  cfg.replicates = 10;
  cfg.block_length = 3;
  ImportanceProfile p =
      importance_bands(d, spec_of(Family::rw), AttributionMethod::coefficients, cfg, 0.2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(p.central[j] == 0.0);
    CHECK(p.lower[j] == 0.0);
    CHECK(p.upper[j] == 0.0);
  }
}

TEST_CASE("identical profiles are perfectly stable") {
  std::vector<AttributionVector> profiles = {profile_of({3.0, -1.0, 0.5}, "2020-01-15"),
                                             profile_of({3.0, -1.0, 0.5}, "2020-02-15"),
                                             profile_of({3.0, -1.0, 0.5}, "2020-03-15")};
  StabilityReport r = stability_report(profiles, {});
  for (double c : r.rank_correlations) CHECK(c == doctest::Approx(1.0));
  for (double q : r.iqr) CHECK(q == 0.0);
  CHECK(r.flags.empty());
}

TEST_CASE("sign contradictions against priors are tabled") {
  std::vector<AttributionVector> profiles = {profile_of({-2.0, 1.0}, "2020-01-15"),
                                             profile_of({-1.5, 2.0}, "2020-02-15"),
                                             profile_of({0.5, 1.5}, "2020-03-15")};
  StabilityReport r = stability_report(profiles, {{"f0", +1}, {"f1", +1}});
  REQUIRE(r.sign_table.size() == 2);
  const auto& f0 = r.sign_table[0];
  CHECK(f0.feature == "f0");
  CHECK(f0.share_matching == doctest::Approx(1.0 / 3.0));
  CHECK(f0.contradicted);
  CHECK(r.sign_table[1].share_matching == doctest::Approx(1.0));
  CHECK_FALSE(r.sign_table[1].contradicted);

  CHECK_THROWS_AS((void)stability_report(profiles, {{"ghost", 1}}), ValidationError);
}

TEST_CASE("rank jumps without new data are flagged") {
  // f0 falls from rank 1 to rank 6; every other feature shifts up one
  std::vector<AttributionVector> profiles = {
      profile_of({10.0, 5.0, 4.0, 3.0, 2.0, 1.0}, "2020-01-15"),
      profile_of({0.5, 5.0, 4.0, 3.0, 2.0, 1.0}, "2020-02-15")};
  StabilityReport flagged =
      stability_report(profiles, {}, {"digest-a", "digest-a"});
  REQUIRE_FALSE(flagged.flags.empty());
  bool found = false;
  for (const auto& f : flagged.flags)
    if (f.feature == "f0" && f.rank_from == 1 && f.rank_to == 6) found = true;
  CHECK(found);

  StabilityReport moved = stability_report(profiles, {}, {"digest-a", "digest-b"});
  CHECK(moved.flags.empty());  // the data changed; the move is not suspicious
}

TEST_CASE("randomly permuted profiles decorrelate") {
  Rng rng = Rng::keyed(71, {0x53544142u});
  std::vector<AttributionVector> profiles;
  Period month = Period::parse_or_throw("2018-01");
  for (int o = 0; o < 40; ++o) {
    Vec v(12);
    for (auto& x : v) x = rng.next_gaussian();
    profiles.push_back(profile_of(v, month.plus(o).first_date().str()));
  }
  StabilityReport r = stability_report(profiles, {});
  const double m = mean(r.rank_correlations);
  const double se = std::sqrt(variance_population(r.rank_correlations) /
                              static_cast<double>(r.rank_correlations.size()));
  CHECK(std::abs(m) <= 2.0 * se + 1e-12);
  for (double c : r.rank_correlations) {
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("stability preconditions") {
  std::vector<AttributionVector> one = {profile_of({1.0, 2.0}, "2020-01-15")};
  CHECK_THROWS_AS((void)stability_report(one, {}), ValidationError);
  std::vector<AttributionVector> mismatched = {profile_of({1.0, 2.0}, "2020-01-15"),
                                               profile_of({1.0, 2.0, 3.0}, "2020-02-15")};
  CHECK_THROWS_AS((void)stability_report(mismatched, {}), ValidationError);
}

TEST_CASE("profile summaries use median magnitude and interquartile bands") {
  std::vector<AttributionVector> profiles;
  const Vec series = {-5.0, -1.0, 0.0, 1.0, 5.0};
  for (std::size_t i = 0; i < series.size(); ++i) {
    AttributionVector a = profile_of({series[i]}, "2020-01-15");
    profiles.push_back(a);
  }
  ImportanceProfile p = summarize_profiles(profiles);
  CHECK(p.central[0] == doctest::Approx(1.0));
  CHECK(p.lower[0] == doctest::Approx(1.0));
  CHECK(p.upper[0] == doctest::Approx(5.0));
  CHECK(p.sign_share[0] == doctest::Approx(0.4));

  std::vector<AttributionVector> perms;
  for (double v : {-2.0, 3.0}) {
    AttributionVector a = profile_of({v}, "2020-01-15");
    a.method = AttributionMethod::permutation;
    perms.push_back(a);
  }
  ImportanceProfile floored = summarize_profiles(perms);
  CHECK(floored.central[0] == doctest::Approx(1.5));  // (-2 floored to 0, 3) -> median 1.5
}

TEST_CASE("attribution tables export as csv") {
  DesignMatrix d = make_design(20, 2, 625);
  FittedModel m = fit(spec_of(Family::ols), d);
  std::string csv = attribution_csv({coefficient_importance(m, d)});
  CHECK(csv.rfind("origin,model,method,feature,value,base_value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("coefficients") != std::string::npos);
}

}  // TEST_SUITE
