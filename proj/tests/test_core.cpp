#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nowcast/core/csv.hpp"
#include "nowcast/core/digest.hpp"
#include "nowcast/core/linalg.hpp"
#include "nowcast/core/rng.hpp"

using namespace nowcast;

TEST_SUITE("core") {

TEST_CASE("rng determinism and keyed substreams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng k1 = Rng::keyed(42, {1, 7});
  Rng k2 = Rng::keyed(42, {1, 7});
  Rng k3 = Rng::keyed(42, {1, 8});
  CHECK(k1.next_u64() == k2.next_u64());
  CHECK(k1.next_u64() != k3.next_u64());
}

TEST_CASE("rng uniform and bounded draws") {
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    double u = r.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    auto k = r.next_below(10);
    CHECK(k < 10);
  }
}

TEST_CASE("rng gaussian moments") {
  Rng r(123);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double g = r.next_gaussian();
    s += g;
    s2 += g * g;
  }
  const double m = s / n;
  const double v = s2 / n - m * m;
  CHECK(std::abs(m) < 0.01);
  CHECK(std::abs(v - 1.0) < 0.02);
}

TEST_CASE("cholesky solves an spd system") {
  Matrix a(2, 2);
  a(0, 0) = 4;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 3;
  Vec x = cholesky_solve(a, {1.0, 2.0});
  CHECK(x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("cholesky rejects rank-deficient systems") {
  Matrix a(2, 2);
  a(0, 0) = 1;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 1;
  CHECK_THROWS_AS(cholesky_solve(a, {1.0, 1.0}), FitError);
}

TEST_CASE("jacobi eigendecomposition reconstructs the matrix") {
  // symmetric 3x3 with known spectrum: diag(1,2,3) rotated
  Matrix a(3, 3);
  a(0, 0) = 2;   a(0, 1) = 1;   a(0, 2) = 0;
  a(1, 0) = 1;   a(1, 1) = 2;   a(1, 2) = 1;
  a(2, 0) = 0;   a(2, 1) = 1;   a(2, 2) = 2;
  auto e = jacobi_eigh(a);
  // eigenvalues of the tridiagonal (2,1) matrix: 2 + sqrt(2), 2, 2 - sqrt(2)
  CHECK(e.values[0] == doctest::Approx(2 + std::sqrt(2.0)).epsilon(1e-10));
  CHECK(e.values[1] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(e.values[2] == doctest::Approx(2 - std::sqrt(2.0)).epsilon(1e-10));
  // descending order and V diag(w) V^T = A
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      CHECK(s == doctest::Approx(a(i, j)).epsilon(1e-9));
    }
}

TEST_CASE("quantile uses linear interpolation between order statistics") {
  Vec v(100);
  std::iota(v.begin(), v.end(), 1.0);  // 1..100
  CHECK(quantile_linear(v, 0.05) == doctest::Approx(5.95).epsilon(1e-12));
  CHECK(quantile_linear(v, 0.95) == doctest::Approx(95.05).epsilon(1e-12));
  CHECK(quantile_linear(v, 0.5) == doctest::Approx(50.5).epsilon(1e-12));
  CHECK(quantile_linear({3.0}, 0.25) == 3.0);
  CHECK(median({1.0, 2.0, 3.0}) == 2.0);
}

TEST_CASE("population variance convention") {
  Vec v{1.0, 2.0, 3.0};
  CHECK(variance_population(v) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("digest is stable and order-sensitive") {
  CHECK(digest_hex("") == "cbf29ce484222325");  // FNV-1a offset basis
  CHECK(digest_hex("a") != digest_hex("b"));
  CHECK(digest_hex("ab") != digest_hex("ba"));
  Digest d1, d2;
  d1.update("hello").update(" world");
  d2.update("hello world");
  CHECK(d1.hex() == d2.hex());
}

TEST_CASE("csv split and join round trip with quoting") {
  auto f = csv_split("a,\"b,c\",\"d\"\"e\",f");
  REQUIRE(f.size() == 4);
  CHECK(f[0] == "a");
  CHECK(f[1] == "b,c");
  CHECK(f[2] == "d\"e");
  CHECK(f[3] == "f");
  CHECK(csv_join({"a", "b,c", "d\"e"}) == "a,\"b,c\",\"d\"\"e\"");
  CHECK(csv_split(csv_join({"x", "y,z"})) == std::vector<std::string>{"x", "y,z"});
}

TEST_CASE("format_double round trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0, 2.0}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(2.0) == "2");
}

}  // TEST_SUITE
