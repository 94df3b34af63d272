#include <doctest.h>

#include <cmath>

#include "nowcast/core/rng.hpp"
#include "nowcast/models/latent.hpp"

using namespace nowcast;

namespace {

Matrix gaussian_design(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, {0x4c4154u});
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.next_gaussian();
  return x;
}

Vec linear_response(const Matrix& x, const Vec& beta, double noise, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, {0x524553u});
  Vec y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    y[i] = dot(x.row(i), beta) + noise * rng.next_gaussian();
  return y;
}

}  // namespace

TEST_SUITE("latent") {

TEST_CASE("pcr with full rank reproduces ols") {
  Matrix x = gaussian_design(30, 3, 41);
  Vec y = linear_response(x, {1.0, -2.0, 0.5}, 0.2, 41);
  LinearModel ols = fit_ols(x, y);
  PcrModel pcr = fit_pcr(x, y, 3);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(pcr.coef.beta[j] == doctest::Approx(ols.beta[j]).epsilon(1e-6));
  CHECK(pcr.coef.intercept == doctest::Approx(ols.intercept).epsilon(1e-6));
}

TEST_CASE("pcr original-space coefficients equal loadings times score coefficients") {
  Matrix x = gaussian_design(25, 4, 43);
  Vec y = linear_response(x, {0.8, 0.0, -0.3, 0.1}, 0.1, 43);
  PcrModel m = fit_pcr(x, y, 2);
  for (std::size_t j = 0; j < 4; ++j) {
    double b = 0.0;
    for (std::size_t k = 0; k < 2; ++k) b += m.loadings(j, k) * m.gamma[k];
    CHECK(m.coef.beta[j] == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("perfectly collinear predictors collapse onto one component") {
  Matrix x(40, 2);
  Rng rng = Rng::keyed(47, {1});
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 0) = rng.next_gaussian();
    x(i, 1) = 2.0 * x(i, 0);
  }
  Vec y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = 3.0 * x(i, 0);
  PcrModel m = fit_pcr(x, y, 1);
  CHECK(m.explained_fraction[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(fit_pcr(x, y, 2), FitError);  // second eigenvalue is numerically zero
}

TEST_CASE("component loadings are sign-fixed and orthogonal in score space") {
  Matrix x = gaussian_design(50, 5, 53);
  Vec y = linear_response(x, {1.0, 0.5, 0.0, -0.5, 0.2}, 0.3, 53);
  PcrModel m = fit_pcr(x, y, 3);

  for (std::size_t k = 0; k < 3; ++k) {
    double best = 0.0;
    for (std::size_t j = 0; j < 5; ++j)
      if (std::abs(m.loadings(j, k)) > std::abs(best)) best = m.loadings(j, k);
    CHECK(best > 0.0);
  }

  auto c = detail::center(x, y);
  Matrix scores(50, 3);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t k = 0; k < 3; ++k) scores(i, k) = dot(c.xc.row(i), m.loadings.col(k));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      CHECK(std::abs(dot(scores.col(a), scores.col(b))) < 1e-8);
}

TEST_CASE("explained variance fractions are non-increasing and bounded") {
  Matrix x = gaussian_design(60, 4, 59);
  Vec y = linear_response(x, {1.0, 1.0, 1.0, 1.0}, 0.5, 59);
  PcrModel m = fit_pcr(x, y, 4);
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    if (k > 0) CHECK(m.explained_fraction[k] <= m.explained_fraction[k - 1] + 1e-12);
    total += m.explained_fraction[k];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("pcr component count is validated") {
  Matrix x = gaussian_design(10, 4, 61);
  Vec y = linear_response(x, {1.0, 0.0, 0.0, 0.0}, 0.1, 61);
  CHECK_THROWS_AS(fit_pcr(x, y, 5), ValidationError);
  (void)fit_pcr(x, y, 4);
}

TEST_CASE("plsr with one component on one predictor equals ols") {
  Matrix x = gaussian_design(30, 1, 67);
  Vec y = linear_response(x, {1.7}, 0.2, 67);
  LinearModel ols = fit_ols(x, y);
  PlsrModel pls = fit_plsr(x, y, 1);
  CHECK(pls.coef.beta[0] == doctest::Approx(ols.beta[0]).epsilon(1e-10));
  CHECK(pls.coef.intercept == doctest::Approx(ols.intercept).epsilon(1e-10));
}

TEST_CASE("plsr with full components reproduces ols") {
  Matrix x = gaussian_design(40, 3, 71);
  Vec y = linear_response(x, {0.6, -1.1, 0.4}, 0.2, 71);
  LinearModel ols = fit_ols(x, y);
  PlsrModel pls = fit_plsr(x, y, 3);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(pls.coef.beta[j] == doctest::Approx(ols.beta[j]).epsilon(1e-6));
  CHECK(pls.coef.intercept == doctest::Approx(ols.intercept).epsilon(1e-6));
}

TEST_CASE("plsr weight vectors have unit norm") {
  Matrix x = gaussian_design(35, 4, 73);
  Vec y = linear_response(x, {1.0, 0.2, -0.7, 0.0}, 0.3, 73);
  PlsrModel m = fit_plsr(x, y, 2);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(dot(m.weights.col(k), m.weights.col(k)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vip scores square-sum to the feature count") {
  Matrix x = gaussian_design(45, 6, 79);
  Vec y = linear_response(x, {2.0, 0.0, 0.0, 0.1, 0.0, -0.2}, 0.3, 79);
  PlsrModel m = fit_plsr(x, y, 3);
  Vec vip = vip_scores(m);
  double sq = 0.0;
  for (double v : vip) sq += v * v;
  CHECK(sq == doctest::Approx(6.0).epsilon(1e-8));
  for (std::size_t j = 1; j < 6; ++j) CHECK(vip[0] > vip[j]);  // dominant predictor leads
}

}  // TEST_SUITE
