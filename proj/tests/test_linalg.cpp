#include <doctest.h>

#include <cmath>

#include "dtrans/linalg.hpp"
#include "dtrans/parse.hpp"
#include "dtrans/random.hpp"
#include "dtrans/strata.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

LinearSubspace random_subspace(Rng& rng, int n, int k) {
  Mat a(n, k);
  for (int j = 0; j < k; ++j) a.col(j) = rng.normal_vector(n);
  return LinearSubspace::span_of(a);
}

}  // namespace

TEST_CASE("span_of returns an orthonormal basis of the column span") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + static_cast<int>(rng.next() % 5);
    const int k = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(n));
    const LinearSubspace s = random_subspace(rng, n, k);
    CHECK(s.dim() == k);
    CHECK(s.orthonormality_error() < 1e-10);
    const Mat p = s.projector();
    CHECK((p * p - p).norm() < 1e-10);
  }
  Mat dup(3, 2);
  dup << 1, 2, 0, 0, 1, 2;
  CHECK(LinearSubspace::span_of(dup).dim() == 1);
}

TEST_CASE("numeric rank uses a relative threshold") {
  Mat a = Mat::Identity(3, 3);
  a(2, 2) = 1e-9;
  CHECK(numeric_rank(a).rank == 2);
  a(2, 2) = 1e-7;
  CHECK(numeric_rank(a).rank == 3);
  CHECK(numeric_rank(1e6 * a).rank == 3);
  CHECK(numeric_rank(Mat::Zero(2, 3)).rank == 0);
}

TEST_CASE("exact rank by elimination") {
  std::vector<std::vector<Rational>> rows{{1, 2, 3}, {2, 4, 6}, {Rational(1, 3), 0, 1}};
  CHECK(exact_rank(rows) == 2);
  rows[1][2] = Rational(6000001, 1000000);
  CHECK(exact_rank(rows) == 3);
  CHECK(exact_rank({}) == 0);
}

TEST_CASE("span_sum is commutative and associative up to gap 1e-9") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + static_cast<int>(rng.next() % 4);
    auto dim = [&] { return static_cast<int>(rng.next() % static_cast<std::uint64_t>(n)); };
    const LinearSubspace a = dim() ? random_subspace(rng, n, dim()) : LinearSubspace::zero(n);
    const LinearSubspace b = random_subspace(rng, n, 1 + dim() % (n - 1));
    const LinearSubspace c = random_subspace(rng, n, 1);
    const LinearSubspace ab = span_sum(a, b).space, ba = span_sum(b, a).space;
    CHECK(ab.dim() == ba.dim());
    CHECK(gap(ab, ba) <= 1e-9);
    CHECK(ab.dim() <= a.dim() + b.dim());
    const LinearSubspace l = span_sum(ab, c).space, r = span_sum(a, span_sum(b, c).space).space;
    CHECK(gap(l, r) <= 1e-9);
  }
  CHECK_THROWS_AS(span_sum(LinearSubspace::whole(2), LinearSubspace::whole(3)), Error);
}

TEST_CASE("asym_deviation vanishes exactly when the basis is contained") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const int n = 4;
    const LinearSubspace big = random_subspace(rng, n, 3);
    LinearSubspace y;
    if (t % 2 == 0) {
      y = LinearSubspace::span_of(big.basis() * rng.normal_vector(3));
    } else {
      y = random_subspace(rng, n, 1);
    }
    const double dev = asym_deviation(y, big);
    bool all_in = true;
    for (int j = 0; j < y.dim(); ++j) all_in = all_in && contains(big, y.basis().col(j), 1e-9).contained;
    CHECK((dev <= 1e-9) == all_in);
  }
  CHECK_THROWS_AS(contains(LinearSubspace::whole(2), Vec::Zero(2), 1e-9), Error);
}

TEST_CASE("gap and principal angles of two lines") {
  const double th = 0.3;
  Mat a(2, 1), b(2, 1);
  a << 1, 0;
  b << std::cos(th), std::sin(th);
  const auto la = LinearSubspace::span_of(a), lb = LinearSubspace::span_of(b);
  CHECK(gap(la, lb) == doctest::Approx(std::sin(th)).epsilon(1e-12));
  CHECK(principal_angles(la, lb)(0) == doctest::Approx(th).epsilon(1e-12));
  CHECK(gap(la, LinearSubspace::whole(2)) == 1.0);
  CHECK(asym_deviation(la, LinearSubspace::whole(2)) == doctest::Approx(0.0));
}

TEST_CASE("exact and floating ranks agree on fixture tangent data") {
  const char* names[] = {"flat.json", "circle.json", "cone.json", "umbrella.json"};
  Rng rng(9);
  for (const char* name : names) {
    const Problem p = oracle::load_problem(name);
    for (const auto& s : p.stratification->strata()) {
      if (!s.is_polynomial()) continue;
      for (int t = 0; t < 20; ++t) {
        const auto x = oracle::random_rational_point(rng, s.ambient_dim());
        const auto jac = s.equation_map().jacobian_exact(x);
        const int er = exact_rank(jac);
        const auto xd = to_double(x);
        const Mat jd = s.equation_map().jacobian(std::span<const double>(xd));
        CHECK(numeric_rank(jd).rank == er);
        CHECK(exact_equation_rank(s, x) == er);
      }
    }
  }
}

TEST_CASE("sequence_limit of curve tangents matches the differentiated tangent") {
  // c(t) = (t, t^2, t^3), tangent (1, 2t, 3t^2) -> (1, 0, 0)
  std::vector<LinearSubspace> items;
  for (int j = 3; j <= 30; ++j) {
    const double t = std::ldexp(1.0, -j);
    Mat v(3, 1);
    v << 1, 2 * t, 3 * t * t;
    items.push_back(LinearSubspace::span_of(v));
  }
  const SequenceLimit lim = sequence_limit(items, 1e-5);
  REQUIRE(lim.converged);
  CHECK(gap(*lim.limit, LinearSubspace::coordinate(3, {0})) <= 1e-6);
  CHECK_THROWS_AS(sequence_limit({items[0]}, 1e-5), Error);

  std::vector<LinearSubspace> spin;
  for (int j = 0; j < 8; ++j) {
    Mat v(2, 1);
    v << std::cos(j), std::sin(j);
    spin.push_back(LinearSubspace::span_of(v));
  }
  CHECK_FALSE(sequence_limit(spin, 1e-5).converged);
}

TEST_CASE("gauss_newton handles underdetermined systems") {
  const ResidualFn f = [](const Vec& z) {
    Vec r(1);
    r << z.squaredNorm() - 1;
    return r;
  };
  const JacobianFn jac = [](const Vec& z) { return Mat(2 * z.transpose()); };
  Vec z0(3);
  z0 << 2, 0.5, -1;
  const SolveResult s = gauss_newton(f, jac, z0);
  CHECK(s.converged);
  CHECK(s.z.norm() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK((s.z.normalized() - z0.normalized()).norm() < 1e-8);
}
