#include <doctest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <cmath>

#include "dtrans/approx.hpp"
#include "dtrans/expr.hpp"
#include "dtrans/parse.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

struct ExprFixture {
  std::string text;
  Expr e;
  bool polynomial;
};

std::vector<ExprFixture> expression_fixtures(Box& box) {
  const Json j = Json::parse(oracle::read_file(oracle::fixture("expressions.json")));
  box = box_from_json(j.at("box"));
  std::vector<ExprFixture> out;
  for (const auto& e : j.at("expressions"))
    out.push_back({e.at("text"), parse_expr(e.at("text").get<std::string>()), e.at("polynomial")});
  return out;
}

}  // namespace

TEST_CASE("partials match central differences on the expression fixtures") {
  Box box;
  const auto fixtures = expression_fixtures(box);
  Rng rng(11);
  for (const auto& fx : fixtures) {
    CAPTURE(fx.text);
    for (const auto& alpha : multi_indices(3, 3, 1)) {
      const int i = alpha.first_nonzero();
      std::vector<int> beta = alpha.entries();
      --beta[static_cast<std::size_t>(i)];
      const Expr lower = fx.e.derivative(MultiIndex(beta));
      const Expr full = fx.e.derivative(alpha);
      for (int p = 0; p < 100; ++p) {
        std::vector<double> x(3);
        for (int d = 0; d < 3; ++d) x[static_cast<std::size_t>(d)] = rng.uniform(box.lo[0], box.hi[0]);
        const double fd = oracle::central_difference([&](const std::vector<double>& y) { return lower.evaluate(y); }, x, i);
        const double sym = full.evaluate(x);
        REQUIRE(std::abs(fd - sym) <= 1e-5 * std::max(1.0, std::abs(sym)));
      }
    }
  }
  CHECK(fixtures.size() >= 10);
}

TEST_CASE("polynomial partials are exact against an independent expansion") {
  Box box;
  Rng rng(5);
  for (const auto& fx : expression_fixtures(box)) {
    if (!fx.polynomial) continue;
    CAPTURE(fx.text);
    REQUIRE(fx.e.is_polynomial());
    const oracle::Poly p = oracle::expand(fx.e, 3);
    for (const auto& alpha : multi_indices(3, 3)) {
      oracle::Poly q = p;
      for (int v = 0; v < 3; ++v)
        for (int k = 0; k < alpha[v]; ++k) q = q.derivative(v);
      const Expr d = fx.e.derivative(alpha);
      for (int t = 0; t < 10; ++t) {
        const auto x = oracle::random_rational_point(rng, 3);
        REQUIRE(d.evaluate_exact(x) == q.evaluate(x));
      }
    }
  }
}

TEST_CASE("exact evaluation of a DefMap keeps every digit") {
  const DefMap f(2, {parse_expr("x^2 - 1/3*y"), parse_expr("x*y + 2/7")});
  const std::vector<Rational> x{Rational(1, 3), Rational(-5, 11)};
  const auto v = f.evaluate_exact(x);
  CHECK(v[0] == Rational(1, 9) + Rational(5, 33));
  CHECK(v[1] == Rational(-5, 33) + Rational(2, 7));
  const auto jac = f.jacobian_exact(x);
  CHECK(jac[0][0] == Rational(2, 3));
  CHECK(jac[0][1] == Rational(-1, 3));
  CHECK(jac[1][0] == Rational(-5, 11));
  CHECK(jac[1][1] == Rational(1, 3));
  CHECK_THROWS_AS(DefMap(1, {parse_expr("exp(x)")}).evaluate_exact(std::vector<Rational>{Rational(1)}), Error);
}

TEST_CASE("grlex rank and unrank round-trip") {
  for (int m = 1; m <= 4; ++m) {
    for (std::uint64_t i = 0; i < 10000; ++i) REQUIRE(MultiIndex::unrank(m, i).rank() == i);
  }
}

TEST_CASE("grlex order agrees with a direct sort") {
  for (int m = 1; m <= 3; ++m) {
    std::vector<std::vector<int>> all;
    std::vector<int> e(static_cast<std::size_t>(m), 0);
    const int kmax = 5;
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == m) {
        all.push_back(e);
        return;
      }
      for (int v = 0; v <= left; ++v) {
        e[static_cast<std::size_t>(pos)] = v;
        rec(pos + 1, left - v);
      }
    };
    rec(0, kmax);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      const int da = std::accumulate(a.begin(), a.end(), 0), db = std::accumulate(b.begin(), b.end(), 0);
      if (da != db) return da < db;
      return a > b;
    });
    const auto idx = multi_indices(m, kmax);
    REQUIRE(idx.size() == all.size());
    REQUIRE(count_multi_indices(m, kmax) == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(idx[i].entries() == all[i]);
      CHECK(idx[i].rank() == i);
    }
  }
  CHECK(multi_indices(2, 2)[1] == MultiIndex({1, 0}));
  CHECK(multi_indices(2, 2)[5] == MultiIndex({0, 2}));
}

TEST_CASE("bump plateau, support, range and symmetry") {
  const std::vector<double> c{0.3, -0.2};
  const double r_in = 0.5, r_out = 1.25;
  const Expr b = bump(c, r_in, r_out);
  Rng rng(3);
  for (int k = 0; k < 400; ++k) {
    const Vec u = rng.unit_vector(2);
    double prev = 2.0;
    for (int s = 0; s <= 60; ++s) {
      const double r = 1.5 * s / 60.0;
      const std::vector<double> p{c[0] + r * u(0), c[1] + r * u(1)};
      const std::vector<double> q{c[0] - r * u(0), c[1] - r * u(1)};
      const double v = b.evaluate(p);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      if (r <= r_in) REQUIRE(v == doctest::Approx(1.0).epsilon(1e-14));
      if (r >= r_out) REQUIRE(v == 0.0);
      REQUIRE(v <= prev + 1e-14);
      REQUIRE(std::abs(v - b.evaluate(q)) <= 1e-14);
      prev = v;
    }
  }
  CHECK_THROWS_AS(bump(c, 1.0, 0.5), Error);
}

TEST_CASE("guards stop evaluation outside the domain") {
  const Expr s = parse_expr("sqrt(x)");
  const std::vector<double> neg{-1.0};
  try {
    (void)s.evaluate(neg);
    FAIL("no guard violation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GuardViolation);
  }
  CHECK_THROWS_AS(parse_expr("recip(x)").evaluate(std::vector<double>{0.0}), Error);
  const DefMap f(1, {parse_expr("sqrt(1 + x)")});
  const std::vector<Vec> pts{Vec::Constant(1, 0.0), Vec::Constant(1, 2.0)};
  const auto cert = certify_guards(f, pts, 0.5);
  CHECK(cert.certified);
  CHECK(cert.min_argument == doctest::Approx(1.0));
  CHECK_FALSE(certify_guards(f, pts, 1.5).certified);
}

TEST_CASE("flat function and its derivatives vanish below zero") {
  const Expr f = parse_expr("flat(x, 2)");
  for (int k = 0; k <= 3; ++k) {
    const Expr d = f.derivative(MultiIndex({k}));
    CHECK(d.evaluate(std::vector<double>{-0.5}) == 0.0);
    CHECK(std::abs(d.evaluate(std::vector<double>{1e-3})) < 1e-100);
  }
  CHECK(f.evaluate(std::vector<double>{1.0}) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("expression JSON round-trip preserves structure") {
  Box box;
  for (const auto& fx : expression_fixtures(box)) {
    CAPTURE(fx.text);
    const Expr back = expr_from_json(expr_to_json(fx.e));
    CHECK(structurally_equal(back, fx.e));
    CHECK(expr_to_json(back) == expr_to_json(fx.e));
  }
  CHECK(parse_rational("-0.125") == Rational(-1, 8));
  CHECK(parse_rational("3e-2") == Rational(3, 100));
  CHECK(parse_rational("2/6") == Rational(1, 3));
  CHECK_THROWS_AS(parse_expr("x + "), Error);
  CHECK_THROWS_AS(parse_expr("foo(x)"), Error);
}

TEST_CASE("positive minorant holds on a grid twice as fine") {
  struct Case {
    const char* eps;
    int k;
    Box region;
  };
  const std::vector<Case> cases{{"recip(1 + x^2)", 2, Box::unbounded(1)},
                                {"exp(-x)", 1, Box{{0.0}, {8.0}}},
                                {"1/10", 3, Box::cube(2, -1.0, 1.0)},
                                {"recip(1 + x^2 + y^2)", 1, Box::unbounded(2)}};
  for (const auto& c : cases) {
    CAPTURE(c.eps);
    const Expr eps = parse_expr(c.eps);
    const MinorantResult r = positive_minorant(eps, c.k, c.region);
    CHECK(r.worst_margin > 0.0);
    const int dim = c.region.dim();
    const GridOptions g;
    const auto fine = certification_grid(c.region, 2 * grid_points_for(g, dim) - 1, g.truncation);
    const auto idx = multi_indices(dim, c.k);
    std::vector<Expr> parts;
    for (const auto& a : idx) parts.push_back(r.phi.derivative(a));
    for (const auto& x : fine) {
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
      REQUIRE(r.phi.evaluate(xs) > 0.0);
      double worst = 0.0;
      for (const auto& p : parts) worst = std::max(worst, std::abs(p.evaluate(xs)));
      REQUIRE(worst < eps.evaluate(xs));
    }
  }
  CHECK_THROWS_AS(positive_minorant(parse_expr("x"), 0, Box{{-1.0}, {1.0}}), Error);
}

TEST_CASE("smooth approximation of a piecewise polynomial") {
  PiecewisePolynomial f;
  f.breakpoints = {Rational(0)};
  f.pieces = {Expr(0), parse_expr("x^2")};
  const SmoothApproximation s = smooth_approximate(f, parse_expr("1/10"), 1, -1.0, 1.0);
  CHECK(s.worst_margin > 0.0);
  const Expr g = s.g.component(0);
  const Expr dg = g.derivative(0);
  for (int i = 0; i <= 400; ++i) {
    const double x = -1.0 + i / 200.0;
    const std::vector<double> xs{x};
    CHECK(std::abs(g.evaluate(xs) - f.evaluate_partial(0, x)) < 0.1);
    CHECK(std::abs(dg.evaluate(xs) - f.evaluate_partial(1, x)) < 0.1);
  }

  PiecewisePolynomial kink;
  kink.breakpoints = {Rational(0)};
  kink.pieces = {parse_expr("-x"), parse_expr("x")};
  try {
    (void)smooth_approximate(kink, parse_expr("1/10"), 1, -1.0, 1.0);
    FAIL("kink accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotCm);
  }
}
