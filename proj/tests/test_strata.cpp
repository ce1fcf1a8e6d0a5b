#include <doctest.h>

#include <cmath>

#include "dtrans/parse.hpp"
#include "dtrans/strata.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Stratum circle() { return Stratum("circle", 2, 1, ImplicitPatch{{parse_expr("x^2 + y^2 - 1")}, {}}); }

}  // namespace

TEST_CASE("membership of implicit strata with strict inequalities") {
  const Stratum c = circle();
  CHECK(membership(c, v2(0.6, 0.8)).member);
  CHECK_FALSE(membership(c, v2(0.6, 0.81)).member);
  CHECK(membership(c, v2(0.6, 0.8 + 1e-9)).member);

  const Stratum upper("upper", 2, 2, ImplicitPatch{{}, {parse_expr("y")}});
  CHECK(membership(upper, v2(0, 1e-12)).member);
  CHECK_FALSE(membership(upper, v2(0, 0)).member);
  CHECK(std::isinf(membership(c, v2(0.6, 0.8)).inequality_min));
}

TEST_CASE("parametric strata through a chart") {
  const ParamPatch patch{DefMap(1, {parse_expr("x"), parse_expr("x^2")}), Box{{-1.0}, {1.0}}};
  const Stratum graph("graph", 1, patch);
  CHECK(graph.ambient_dim() == 2);
  const Membership m = membership(graph, v2(0.5, 0.25));
  REQUIRE(m.member);
  CHECK((*m.parameter)(0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(membership(graph, v2(0.5, 0.3)).member);
  CHECK_FALSE(membership(graph, v2(1.5, 2.25)).member);
  const LinearSubspace t = tangent_space(graph, v2(0.5, 0.25));
  CHECK(gap(t, LinearSubspace::span_of(v2(1, 1))) < 1e-9);
}

TEST_CASE("tangent spaces are orthogonal to every equation gradient") {
  const char* names[] = {"flat.json", "circle.json", "cone.json", "umbrella.json"};
  Rng rng(21);
  for (const char* name : names) {
    const Problem p = oracle::load_problem(name);
    for (const auto& s : p.stratification->strata()) {
      CAPTURE(s.id());
      const auto pts = sample_stratum(s, 10, rng, p.stratification->sampling_box(s));
      CHECK_FALSE(pts.empty());
      for (const auto& x : pts) {
        REQUIRE(membership(s, x).member);
        const LinearSubspace t = tangent_space(s, x);
        CHECK(t.dim() == s.dim());
        CHECK(t.orthonormality_error() < 1e-10);
        if (s.implicit().equations.empty() || t.dim() == 0) continue;
        const Mat jac = s.equation_map().jacobian(x);
        CHECK((jac * t.basis()).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, jac.norm()));
      }
    }
  }
}

TEST_CASE("tangent space errors") {
  CHECK_THROWS_AS(tangent_space(circle(), v2(2, 0)), Error);
  const Stratum bad("bad", 2, 1, ImplicitPatch{{parse_expr("(x^2 + y^2 - 1)^2")}, {}});
  try {
    (void)tangent_space(bad, v2(1, 0));
    FAIL("rank defect not reported");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDefect);
  }
}

TEST_CASE("project_to_equations lands on the zero set") {
  const SolveResult r = project_to_equations(circle(), v2(3, 4));
  CHECK(r.converged);
  CHECK(r.z(0) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(r.z(1) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("pullback along a submersion carries tangents onto tangents") {
  // pi(x, y, z) = (x, y + z^2) is a submersion of R^3 onto R^2
  const DefMap pi(3, {parse_expr("x"), parse_expr("y + z^2")});
  const Stratification sigma(2, {circle()}, {}, Box::cube(2, -2, 2));
  Rng rng(8);
  const Stratification pulled = pullback_stratification(sigma, pi, rng, Box::cube(3, -2, 2));
  REQUIRE(pulled.strata().size() == 1);
  const Stratum& n = pulled.strata()[0];
  CHECK(n.dim() == 2);
  for (const auto& x : sample_stratum(n, 15, rng, Box::cube(3, -2, 2))) {
    const Vec y = pi.evaluate(x);
    REQUIRE(membership(circle(), y).member);
    const LinearSubspace tn = tangent_space(n, x);
    const LinearSubspace ts = tangent_space(circle(), y);
    const LinearSubspace img = tn.image(pi.jacobian(x));
    CHECK(span_sum(img, ts).space.dim() == ts.dim());
    CHECK(img.dim() == ts.dim());
  }

  const DefMap diagonal(2, {parse_expr("x"), parse_expr("x")});
  const Stratification upper(2, {Stratum("upper", 2, 2, ImplicitPatch{{}, {parse_expr("y")}})}, {});
  try {
    (void)pullback_stratification(upper, diagonal, rng, Box::cube(2, -1, 1));
    FAIL("rank-one map accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSubmersion);
  }
}

TEST_CASE("validation accepts valid fixtures and rejects invalid ones") {
  struct Expect {
    const char* name;
    bool valid;
  };
  const Expect corpus[] = {{"flat.json", true},           {"circle.json", true},          {"cone.json", true},
                           {"umbrella.json", true},       {"invalid_overlap.json", false}, {"invalid_frontier.json", false}};
  for (const auto& e : corpus) {
    CAPTURE(e.name);
    const Problem p = oracle::load_problem(e.name);
    Rng rng(7);
    const ValidationReport r = validate_stratification(*p.stratification, 20, rng);
    CHECK(r.valid == e.valid);
    if (!e.valid) CHECK_FALSE(r.problems.empty());
  }
  const Problem bad = oracle::load_problem("invalid_overlap.json");
  Rng rng(7);
  const ValidationReport r = validate_stratification(*bad.stratification, 20, rng);
  CHECK_FALSE(r.disjointness.empty());
}
