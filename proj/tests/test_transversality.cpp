#include <doctest.h>

#include <cmath>

#include "dtrans/parse.hpp"
#include "dtrans/transversality.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

DefMap map_of(int m, std::vector<const char*> comps) {
  std::vector<Expr> e;
  for (auto* c : comps) e.push_back(parse_expr(c));
  return DefMap(m, std::move(e));
}

Vec v1(double a) { return Vec::Constant(1, a); }

Stratum implicit(const char* id, int n, int dim, std::vector<const char*> eqs) {
  std::vector<Expr> e;
  for (auto* c : eqs) e.push_back(parse_expr(c));
  return Stratum(id, n, dim, ImplicitPatch{e, {}});
}

RegionSampler line_sampler(double lo, double hi, int n) {
  RegionSampler s;
  s.box = Box{{lo}, {hi}};
  s.points_per_dim = n;
  return s;
}

}  // namespace

TEST_CASE("pointwise verdicts") {
  const Stratum axis = implicit("axis", 2, 1, {"y"});
  const DefMap flat = map_of(1, {"x", "0"});
  const auto v = is_transverse_at(flat, axis, v1(0.3));
  CHECK(v.status == TransStatus::Fail);
  CHECK(v.exact);
  const DefMap crossing = map_of(1, {"x", "x - 1/2"});
  CHECK(is_transverse_at(crossing, axis, v1(0.5)).status == TransStatus::Transverse);
  CHECK(is_transverse_at(crossing, axis, v1(0.2)).status == TransStatus::NotInStratum);
  const auto near = is_transverse_at(crossing, axis, v1(0.5 + 1e-6));
  CHECK(near.status == TransStatus::NotInStratum);

  const Stratum upper("upper", 2, 2, ImplicitPatch{{}, {parse_expr("y")}});
  CHECK(is_transverse_at(crossing, upper, v1(1.0)).status == TransStatus::Transverse);
  CHECK_THROWS_AS(is_transverse_at(map_of(2, {"x", "y"}), axis, v1(0.0)), Error);

  TransOptions exact_only;
  exact_only.exact_only = true;
  CHECK_THROWS_AS(is_transverse_at(map_of(1, {"exp(x)", "0"}), axis, v1(0.0), exact_only), Error);
}

TEST_CASE("ambiguous points next to a stratum with inequalities") {
  const Stratum half("half", 2, 1, ImplicitPatch{{parse_expr("y")}, {parse_expr("x")}});
  const DefMap f = map_of(1, {"1", "x"});
  const auto v = is_transverse_at(f, half, v1(5e-6));
  CHECK(v.status == TransStatus::NotInStratum);
  CHECK(v.ambiguous);
  CHECK_FALSE(is_transverse_at(f, half, v1(1.0)).ambiguous);
}

TEST_CASE("region checks on the shipped fixtures") {
  struct Expect {
    const char* name;
    bool transverse;
    int intersections;
  };
  const Expect cases[] = {{"example23.json", false, 11}, {"circle.json", true, 2}, {"circle_tangent.json", false, 3}};
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const Problem p = oracle::load_problem(c.name);
    const RegionReport r = is_transverse_on(*p.map, *p.stratification, *p.sampler);
    CHECK(r.transverse == c.transverse);
    int hits = 0;
    for (const auto& s : r.strata) hits += s.transverse + s.fail;
    CHECK(hits == c.intersections);
  }
}

TEST_CASE("verdicts survive changes of coordinates") {
  // h(z) = z + z^3 on the domain; psi(u, v) = (u, v + u^2) on the target,
  // which maps the stratum E = 0 to E o psi^-1 = 0.
  const DefMap h = map_of(1, {"x + x^3"});
  std::vector<Expr> psi_comps{parse_expr("x"), parse_expr("y + x^2")};
  const DefMap psi(2, psi_comps);
  const std::vector<Expr> psi_inv{parse_expr("x"), parse_expr("y - x^2")};
  struct Pair {
    DefMap f;
    Stratum s;
  };
  const std::vector<Pair> pairs{{map_of(1, {"x", "0"}), implicit("axis", 2, 1, {"y"})},
                                {map_of(1, {"x", "x - 1/2"}), implicit("axis", 2, 1, {"y"})},
                                {map_of(1, {"x", "x^2 - 1/2"}), implicit("circle", 2, 1, {"x^2 + y^2 - 1"})},
                                {map_of(1, {"x", "x^2 - 1"}), implicit("circle", 2, 1, {"x^2 + y^2 - 1"})}};
  Rng rng(3);
  int matched = 0;
  for (const auto& pr : pairs) {
    std::vector<Expr> moved;
    for (const auto& e : pr.s.implicit().equations) moved.push_back(e.substitute(psi_inv));
    const Stratum s2(pr.s.id() + "_moved", 2, pr.s.dim(), ImplicitPatch{moved, {}});
    const DefMap pre = pr.f.compose(h);
    const DefMap post = psi.compose(pr.f);
    RegionSampler sampler = line_sampler(-1.5, 1.5, 7);
    const RegionReport rep = is_transverse_on(pr.f, Stratification(2, {pr.s}, {}), sampler);
    for (const auto& v : rep.strata[0].verdicts) {
      if (v.status == TransStatus::NotInStratum) continue;
      // z with h(z) = x, by bisection on the increasing h
      double lo = -3, hi = 3;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mid + mid * mid * mid < v.x(0) ? lo : hi) = mid;
      }
      CHECK(is_transverse_at(pre, pr.s, v1(0.5 * (lo + hi))).status == v.status);
      CHECK(is_transverse_at(post, s2, v.x).status == v.status);
      ++matched;
    }
  }
  CHECK(matched >= 8);
}

TEST_CASE("jet transversality checks the jet space dimension") {
  const Stratification wrong(2, {implicit("axis", 2, 1, {"y"})}, {});
  CHECK_THROWS_AS(jet_transverse(map_of(1, {"x"}), wrong, 1, line_sampler(-1, 1, 5)), Error);
  // J^1(R, R) = (x, y, y'); the stratum y' = 0 meets j^1 (x^3) tangentially at 0
  const Stratification crit(3, {implicit("crit", 3, 2, {"x2"})}, {});
  CHECK_FALSE(jet_transverse(map_of(1, {"x^3"}), crit, 1, line_sampler(-1, 1, 5)).transverse);
  CHECK(jet_transverse(map_of(1, {"x^2"}), crit, 1, line_sampler(-1, 1, 5)).transverse);
}

TEST_CASE("composition of transverse maps") {
  const DefMap f = map_of(1, {"x", "x^2"});
  const DefMap g = map_of(2, {"x", "y - 1/4"});
  const Stratum axis = implicit("axis", 2, 1, {"y"});
  const Stratum pre = preimage_stratum(g, axis);
  CHECK(pre.dim() == 1);
  std::vector<Vec> samples;
  for (int i = -4; i <= 4; ++i) samples.push_back(v1(0.25 * i));
  const CompositionReport r = compose_transversality_check(f, g, axis, samples);
  CHECK(r.conclusion_holds);
  int hits = 0;
  for (const auto& v : r.composite) hits += v.status == TransStatus::Transverse;
  CHECK(hits == 2);
  const DefMap fold = map_of(2, {"x", "y^2"});
  CHECK_THROWS_AS(compose_transversality_check(map_of(1, {"x", "0"}), fold, axis, samples), Error);
}

TEST_CASE("perturbation stays in the neighborhood on a fresh, doubled sample set") {
  const char* names[] = {"perturb_flat.json", "perturb_cubic.json", "perturb_saddle.json"};
  for (const char* name : names) {
    CAPTURE(name);
    const Problem p = oracle::load_problem(name);
    PerturbOptions opts;
    opts.seed = *p.seed;
    const PerturbResult r = perturb_to_transverse(*p.map, *p.stratification, p.k, p.l, *p.epsilon, *p.sampler, opts);
    CHECK(r.draws <= 100);
    CHECK(r.report.transverse);

    RegionSampler fresh = *p.sampler;
    fresh.points_per_dim = 2 * p.sampler->points_per_dim + 1;
    fresh.random_points = 25;
    fresh.seed = 12345;
    const std::vector<Vec> pts = fresh.generate();
    CHECK(jet_transverse(r.g, *p.stratification, p.k, fresh).transverse);
    CHECK(in_neighborhood(*p.map, r.g, NeighborhoodSpec{p.l, *p.epsilon, pts}).inside);
    const int m = p.map->domain_dim();
    for (const auto& x : pts) {
      const double eps = p.epsilon->evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(m)));
      for (const auto& alpha : multi_indices(m, p.l)) {
        const Vec d = r.g.partial(alpha, std::span<const double>(x.data(), static_cast<std::size_t>(m))) -
                      p.map->partial(alpha, std::span<const double>(x.data(), static_cast<std::size_t>(m)));
        REQUIRE(d.cwiseAbs().maxCoeff() < eps);
      }
    }
  }
}

TEST_CASE("a non-decaying minorant exhausts the draws") {
  const Problem p = oracle::load_problem("perturb_exhausted.json");
  PerturbOptions opts;
  opts.seed = 7;
  opts.max_draws = 20;
  opts.phi_override = parse_expr("1/100");
  try {
    (void)perturb_to_transverse(*p.map, *p.stratification, p.k, p.l, *p.epsilon, *p.sampler, opts);
    FAIL("constant minorant accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ExhaustedDraws);
  }
}

TEST_CASE("prescribed derivative on the cone") {
  const Problem p = oracle::load_problem("prescribed.json");
  Mat hb(3, 2);
  hb << 0, 0, 1, 0, 0, 1;
  const LinearSubspace h = LinearSubspace::span_of(hb);
  PrescribedOptions opts;
  opts.seed = 7;
  const PrescribedResult r = transverse_with_derivative(2, *p.stratification, Vec::Zero(3), h, opts);
  CHECK(r.report.transverse);
  CHECK(r.image_gap <= 1e-8);
  CHECK(r.value_exact);
  const Mat df = r.f.jacobian(r.x0);
  CHECK(gap(LinearSubspace::span_of(df), h) <= 1e-8);
  CHECK(r.f.evaluate(r.x0).norm() <= 1e-10);
  CHECK(r.stratum == "Y");

  // H + T_p Y is only the xy-plane
  Mat bad(3, 2);
  bad << 1, 0, 0, 1, 0, 0;
  CHECK_THROWS_AS(transverse_with_derivative(2, *p.stratification, Vec::Zero(3), LinearSubspace::span_of(bad), opts), Error);
}

TEST_CASE("density of transverse parameters in a translation family") {
  const Stratification origin(2, {implicit("O", 2, 0, {"x", "y"})}, {});
  const DefMap phi = map_of(3, {"x0 + x1", "x0 + x2"});
  std::vector<Vec> grid;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      Vec s(2);
      s << -1 + i / 4.0, -1 + j / 4.0;
      grid.push_back(s);
    }
  const DensityReport r = parametric_density_experiment(phi, origin, grid, line_sampler(-2, 2, 11));
  CHECK(r.grid_size == 81);
  // failing parameters are exactly the diagonal s1 = s2
  CHECK(r.failing == 9);
  for (const auto& s : r.failing_parameters) CHECK(s(0) == s(1));
  const DefMap degenerate = map_of(3, {"x0", "x0"});
  CHECK_THROWS_AS(parametric_density_experiment(degenerate, origin, grid, line_sampler(-2, 2, 11)), Error);
}

TEST_CASE("sampler generation") {
  RegionSampler s;
  s.box = Box{{-1, 0}, {1, 2}};
  s.points_per_dim = 3;
  s.points = {Vec::Constant(2, 5.0)};
  s.random_points = 4;
  s.seed = 1;
  const auto pts = s.generate();
  CHECK(pts.size() == 9 + 1 + 4);
  const auto again = s.generate();
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i] == again[i]);
}
