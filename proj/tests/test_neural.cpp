#include <doctest.h>

#include <cmath>

#include "nowcast/core/rng.hpp"
#include "nowcast/models/neural.hpp"

using namespace nowcast;

namespace {

Matrix gaussian_design(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng = Rng::keyed(seed, {0x4e4555u});
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x(i, j) = rng.next_gaussian();
  return x;
}

bool close(double a, double b, double rel, double abs) {
  return std::abs(a - b) <= abs + rel * std::max(std::abs(a), std::abs(b));
}

constexpr double kFdStep = 1e-5;

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("mlp analytic gradients match central finite differences") {
  Matrix x = gaussian_design(8, 3, 201);
  Rng rng = Rng::keyed(201, {1});
  Vec y(8);
  for (std::size_t i = 0; i < 8; ++i) y[i] = std::sin(x(i, 0)) + 0.3 * rng.next_gaussian();
  MlpModel m = fit_mlp(x, y, 4, 3, 0.05, 33);
  MlpGradients g = m.gradients(x, y);

  auto fd = [&](double& slot) {
    const double keep = slot;
    slot = keep + kFdStep;
    const double up = m.loss(x, y);
    slot = keep - kFdStep;
    const double down = m.loss(x, y);
    slot = keep;
    return (up - down) / (2.0 * kFdStep);
  };

  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(close(g.w1(h, j), fd(m.w1(h, j)), 1e-5, 1e-8));
    CHECK(close(g.b1[h], fd(m.b1[h]), 1e-5, 1e-8));
    CHECK(close(g.w2[h], fd(m.w2[h]), 1e-5, 1e-8));
  }
  CHECK(close(g.b2, fd(m.b2), 1e-5, 1e-8));
}

TEST_CASE("mlp gradients under a dropout mask match finite differences of the masked loss") {
  Matrix x = gaussian_design(6, 2, 203);
  Vec y{0.5, -0.2, 1.1, 0.0, -0.7, 0.4};
  MlpModel m = fit_mlp(x, y, 3, 2, 0.05, 35);
  Vec mask{2.0, 0.0, 2.0};  // inverted dropout at rate 0.5
  MlpGradients g = m.gradients(x, y, &mask);

  MlpModel masked = m;  // loss with the mask folded into the output weights
  for (std::size_t h = 0; h < 3; ++h) masked.w2[h] *= mask[h];
  auto masked_loss = [&]() {
    for (std::size_t h = 0; h < 3; ++h) masked.w2[h] = m.w2[h] * mask[h];
    masked.w1 = m.w1;
    masked.b1 = m.b1;
    masked.b2 = m.b2;
    return masked.loss(x, y);
  };
  auto fd = [&](double& slot) {
    const double keep = slot;
    slot = keep + kFdStep;
    const double up = masked_loss();
    slot = keep - kFdStep;
    const double down = masked_loss();
    slot = keep;
    return (up - down) / (2.0 * kFdStep);
  };
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t j = 0; j < 2; ++j) CHECK(close(g.w1(h, j), fd(m.w1(h, j)), 1e-5, 1e-8));
    CHECK(close(g.b1[h], fd(m.b1[h]), 1e-5, 1e-8));
  }
  // the returned w2 gradient already includes the mask factor
  for (std::size_t h = 0; h < 3; ++h) CHECK(close(g.w2[h], fd(m.w2[h]), 1e-5, 1e-8));
}

TEST_CASE("mlp input gradient matches finite differences of the forecast") {
  Matrix x = gaussian_design(10, 3, 205);
  Rng rng = Rng::keyed(205, {1});
  Vec y(10);
  for (std::size_t i = 0; i < 10; ++i) y[i] = x(i, 1) + 0.2 * rng.next_gaussian();
  MlpModel m = fit_mlp(x, y, 5, 40, 0.05, 37);
  Vec probe{0.3, -0.8, 0.5};
  Vec g = m.grad_input(probe);
  for (std::size_t j = 0; j < 3; ++j) {
    Vec up = probe, down = probe;
    up[j] += kFdStep;
    down[j] -= kFdStep;
    const double fd = (m.predict(up) - m.predict(down)) / (2.0 * kFdStep);
    CHECK(close(g[j], fd, 1e-5, 1e-8));
  }
}

TEST_CASE("identity-activation mlp learns a noiseless linear law") {
  Matrix x = gaussian_design(40, 2, 207);
  Vec y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = 0.5 * x(i, 0) - 0.3 * x(i, 1);
  MlpModel m = fit_mlp(x, y, 4, 2000, 0.1, 39, Activation::identity);
  CHECK(m.final_loss < 1e-6);
  CHECK(m.final_loss == m.loss(x, y));
  CHECK(close(m.predict(Vec{1.0, 1.0}), 0.2, 1e-2, 1e-3));
}

TEST_CASE("mlp training is seed-deterministic, dropout included") {
  Matrix x = gaussian_design(20, 3, 209);
  Rng rng = Rng::keyed(209, {1});
  Vec y(20);
  for (std::size_t i = 0; i < 20; ++i) y[i] = x(i, 0) + 0.3 * rng.next_gaussian();
  MlpModel a = fit_mlp(x, y, 4, 30, 0.05, 55, Activation::tanh_act, 0.3);
  MlpModel b = fit_mlp(x, y, 4, 30, 0.05, 55, Activation::tanh_act, 0.3);
  MlpModel plain = fit_mlp(x, y, 4, 30, 0.05, 55, Activation::tanh_act, 0.0);
  CHECK(a.final_loss == b.final_loss);
  for (std::size_t i = 0; i < 20; ++i) CHECK(a.predict(x.row(i)) == b.predict(x.row(i)));
  CHECK(a.final_loss != plain.final_loss);
}

TEST_CASE("mlp divergence is reported with the epoch") {
  Matrix x = gaussian_design(10, 2, 211);
  Vec y(10, 1.0);
  CHECK_THROWS_WITH_AS(fit_mlp(x, y, 4, 50, 1e4, 41), doctest::Contains("diverged at epoch"),
                       FitError);
}

TEST_CASE("saturated gates reduce the recurrent state to the current input") {
  GruModel m;
  m.wz = Matrix(1, 1, 0.0);
  m.wr = Matrix(1, 1, 0.0);
  m.wh = Matrix(1, 1, 0.8);
  m.uz = Matrix(1, 1, 0.0);
  m.ur = Matrix(1, 1, 0.0);
  m.uh = Matrix(1, 1, 5.0);  // silenced by the closed reset gate
  m.bz = {50.0};             // update gate pinned open: h_t = c_t
  m.br = {-50.0};            // reset gate pinned shut: c_t ignores h_{t-1}
  m.bh = {0.1};
  m.wo = {1.3};
  m.bo = -0.2;
  m.seq_len = 2;

  auto expect = [&](double s) { return 1.3 * std::tanh(0.8 * s + 0.1) - 0.2; };
  const double base = m.predict_sequence({Vec{0.4}, Vec{-0.6}});
  CHECK(close(base, expect(-0.6), 1e-10, 1e-10));
  for (double first : {-3.0, 0.0, 2.5}) {
    const double moved = m.predict_sequence({Vec{first}, Vec{-0.6}});
    CHECK(std::abs(moved - base) < 1e-8);
  }
}

TEST_CASE("gru input gradients match finite differences across all steps") {
  Matrix x = gaussian_design(12, 2, 213);
  Rng rng = Rng::keyed(213, {1});
  Vec y(12);
  for (std::size_t i = 0; i < 12; ++i) y[i] = x(i, 0) + 0.2 * rng.next_gaussian();
  GruModel m = fit_gru(x, y, 2, 3, 5, 0.05, 43);

  std::vector<Vec> seq{Vec{0.5, -0.1}, Vec{-0.7, 0.9}, Vec{0.2, 0.3}};
  auto gs = m.grad_input(seq);
  REQUIRE(gs.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 2; ++j) {
      auto up = seq, down = seq;
      up[t][j] += kFdStep;
      down[t][j] -= kFdStep;
      const double fd =
          (m.predict_sequence(up) - m.predict_sequence(down)) / (2.0 * kFdStep);
      CHECK(close(gs[t][j], fd, 1e-5, 1e-8));
    }
  }
}

TEST_CASE("gru training lowers the loss and stays seed-deterministic") {
  Matrix x = gaussian_design(24, 2, 215);
  Vec y(24);
  for (std::size_t i = 1; i < 24; ++i) y[i] = 0.6 * x(i, 0) + 0.3 * x(i - 1, 1);
  GruModel one = fit_gru(x, y, 3, 4, 1, 0.02, 45);
  GruModel many = fit_gru(x, y, 3, 4, 200, 0.02, 45);
  GruModel again = fit_gru(x, y, 3, 4, 200, 0.02, 45);
  CHECK(many.final_loss < one.final_loss);
  CHECK(many.final_loss == again.final_loss);
}

TEST_CASE("gru rejects windows shorter than the sequence length") {
  Matrix x = gaussian_design(3, 2, 217);
  Vec y{1.0, 2.0, 3.0};
  CHECK_THROWS_WITH_AS(fit_gru(x, y, 2, 4, 10, 0.05, 47),
                       doctest::Contains("shorter than the sequence length"), ValidationError);
}

TEST_CASE("gru divergence is reported with the epoch") {
  Matrix x = gaussian_design(12, 2, 219);
  Vec y(12, 0.5);
  CHECK_THROWS_WITH_AS(fit_gru(x, y, 3, 3, 50, 1e5, 49),
                       doctest::Contains("diverged at epoch"), FitError);
}

}  // TEST_SUITE
