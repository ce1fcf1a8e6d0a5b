// One PASS/FAIL line per acceptance criterion, with runtime and tolerances.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "dtrans/cli.hpp"
#include "dtrans/experiments.hpp"
#include "dtrans/io.hpp"
#include "dtrans/parse.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<PinnedPoint> pinned_of(const Problem& p) {
  std::vector<PinnedPoint> out;
  if (p.sections.contains("regularity"))
    for (const auto& j : p.sections.at("regularity").at("pinned")) out.push_back(pinned_from_json(j));
  return out;
}

Outcome derivative_engine() {
  const Json j = Json::parse(oracle::read_file(oracle::fixture("expressions.json")));
  const Box box = box_from_json(j.at("box"));
  Rng rng(1);
  std::size_t checks = 0, exact_checks = 0;
  double worst = 0.0;
  for (const auto& item : j.at("expressions")) {
    const Expr e = parse_expr(item.at("text").get<std::string>());
    for (const auto& alpha : multi_indices(3, 3, 1)) {
      const int i = alpha.first_nonzero();
      std::vector<int> beta = alpha.entries();
      --beta[static_cast<std::size_t>(i)];
      const Expr lower = e.derivative(MultiIndex(beta)), full = e.derivative(alpha);
      for (int p = 0; p < 100; ++p) {
        std::vector<double> x(3);
        for (int d = 0; d < 3; ++d)
          x[static_cast<std::size_t>(d)] = rng.uniform(box.lo[static_cast<std::size_t>(d)], box.hi[static_cast<std::size_t>(d)]);
        const double fd = oracle::central_difference([&](const std::vector<double>& y) { return lower.evaluate(y); }, x, i);
        const double sym = full.evaluate(x);
        worst = std::max(worst, std::abs(fd - sym) / std::max(1.0, std::abs(sym)));
        ++checks;
      }
    }
    if (!item.at("polynomial").get<bool>()) continue;
    const oracle::Poly poly = oracle::expand(e, 3);
    for (const auto& alpha : multi_indices(3, 3)) {
      oracle::Poly q = poly;
      for (int v = 0; v < 3; ++v)
        for (int k = 0; k < alpha[v]; ++k) q = q.derivative(v);
      const Expr d = e.derivative(alpha);
      for (int t = 0; t < 10; ++t) {
        const auto x = oracle::random_rational_point(rng, 3);
        if (d.evaluate_exact(x) != q.evaluate(x)) return {false, "exact partial mismatch"};
        ++exact_checks;
      }
    }
  }
  return {worst <= 1e-5, std::to_string(checks) + " finite-difference checks, worst rel err " + fmt("%.2e", worst) +
                             " (tol 1e-5); " + std::to_string(exact_checks) + " exact rational checks"};
}

Outcome jet_machinery() {
  const Json j = Json::parse(oracle::read_file(oracle::fixture("jet_pairs.json")));
  Rng rng(2);
  int pairs = 0, checks = 0;
  for (const auto& fj : j.at("inner"))
    for (const auto& pj : j.at("outer")) {
      const DefMap f = map_from_json(fj), pi = map_from_json(pj);
      for (int k = 1; k <= 3; ++k) {
        const auto x = oracle::random_rational_point(rng, 2);
        const ExactJetPoint a = compute_jet_exact(pi.compose(f), x, k);
        const ExactJetPoint b = jet_pushforward(compute_jet_exact(f, x, k), pi);
        if (!(a.spec == b.spec && a.x == b.x && a.y == b.y && a.coeffs == b.coeffs))
          return {false, "pushforward differs from the jet of the composite"};
        ++checks;
      }
      ++pairs;
    }
  return {pairs >= 20, std::to_string(pairs) + " pairs, " + std::to_string(checks) + " exact jet equalities (k = 1..3)"};
}

Outcome perturbation_contract() {
  const char* names[] = {"perturb_flat.json", "perturb_cubic.json", "perturb_saddle.json"};
  std::ostringstream os;
  bool ok = true;
  for (const char* name : names) {
    const Problem p = oracle::load_problem(name);
    PerturbOptions opts;
    opts.seed = p.seed.value_or(0);
    const PerturbResult r = perturb_to_transverse(*p.map, *p.stratification, p.k, p.l, *p.epsilon, *p.sampler, opts);
    RegionSampler fresh = *p.sampler;
    fresh.points_per_dim = 2 * p.sampler->points_per_dim + 1;
    fresh.random_points = 50;
    fresh.seed = 424242;
    const bool transverse = r.report.transverse && jet_transverse(r.g, *p.stratification, p.k, fresh).transverse;
    double worst = -1e300;
    const int m = p.map->domain_dim();
    for (const auto& x : fresh.generate()) {
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(m));
      const double eps = p.epsilon->evaluate(xs);
      for (const auto& alpha : multi_indices(m, p.l))
        worst = std::max(worst, (r.g.partial(alpha, xs) - p.map->partial(alpha, xs)).cwiseAbs().maxCoeff() / eps);
    }
    const bool good = transverse && worst < 1.0 && r.draws <= 100;
    ok = ok && good;
    os << name << ": " << r.draws << " draw(s), max |d(g-f)|/eps " << fmt("%.3g", worst) << "; ";
  }
  return {ok, os.str() + "fresh grid 2n+1 per axis plus 50 random points"};
}

Outcome prescribed_derivative() {
  const Problem p = oracle::load_problem("prescribed.json");
  const Json& b = p.sections.at("prescribed");
  const LinearSubspace h = subspace_from_json(b.at("h"), 3);
  const Vec point = vec_from_json(b.at("point"));
  PrescribedOptions opts;
  opts.seed = p.seed.value_or(0);
  const PrescribedResult r = transverse_with_derivative(b.at("m_dim"), *p.stratification, point, h, opts);
  const bool exact = r.f.is_polynomial() &&
                     r.f.evaluate_exact(to_rational(std::span<const double>(r.x0.data(), static_cast<std::size_t>(r.x0.size())))) ==
                         to_rational(std::span<const double>(point.data(), static_cast<std::size_t>(point.size())));
  const double g = gap(LinearSubspace::span_of(r.f.jacobian(r.x0)), h);
  int fails = r.report.fail_count();
  return {exact && g <= 1e-8 && r.report.transverse && fails == 0,
          std::string("f(x0) = p exactly: ") + (exact ? "yes" : "no") + ", image gap " + fmt("%.2e", g) +
              " (tol 1e-8), transverse on " + std::to_string(r.report.samples) + " samples"};
}

Outcome regularity_detector() {
  RegularityOptions opts;
  opts.seed = 7;
  std::ostringstream os;
  bool ok = true;
  struct Case {
    const char* name;
    RegStatus expected;
  };
  for (const Case c : {Case{"flat.json", RegStatus::Regular}, Case{"cone.json", RegStatus::Fault},
                       Case{"umbrella.json", RegStatus::Regular}}) {
    const Problem p = oracle::load_problem(c.name);
    const RegularityReport r = whitney_a_stratification(*p.stratification, opts, pinned_of(p));
    ok = ok && r.status == c.expected;
    os << c.name << " " << to_string(r.status) << "; ";
  }
  // tangent-limit oracles: cone 1/sqrt(10) along the pinned diagonal, umbrella 0
  const Problem cone = oracle::load_problem("cone.json");
  const PinnedPoint pin = pinned_of(cone)[0];
  const RegularityVerdict v =
      whitney_a_pair(cone.stratification->find("X"), cone.stratification->find("Y"), pin.point, pin.probes, opts);
  const double oracle_dev = 0.5 / std::sqrt(0.25 + 0.25 + 2.0);
  const bool cone_ok = v.status == RegStatus::Fault && std::abs(v.deviation - oracle_dev) < 1e-6 && v.recheck_deviation &&
                       *v.recheck_deviation >= 1e-3;
  const Problem umb = oracle::load_problem("umbrella.json");
  const DefMap curve(1, {parse_expr("x"), parse_expr("x"), Expr(1)});
  Vec y(3);
  y << 0, 0, 1;
  const RegularityVerdict u = whitney_a_pair(umb.stratification->find("X"), umb.stratification->find("Yp"), y,
                                             {ProbeCurve::explicit_curve(curve, y)}, opts);
  const bool umb_ok = u.status == RegStatus::Regular && u.deviation < 1e-6;
  os << "cone deviation " << fmt("%.6f", v.deviation) << " vs oracle " << fmt("%.6f", oracle_dev) << ", recheck on j=4..31 "
     << fmt("%.6f", v.recheck_deviation.value_or(0.0)) << "; umbrella handle deviation " << fmt("%.1e", u.deviation)
     << " (pass < 1e-6, fault > 1e-3)";
  return {ok && cone_ok && umb_ok, os.str()};
}

Outcome trotman() {
  const Problem p = oracle::load_problem("cone.json");
  TrotmanOptions opts;
  opts.seed = 7;
  opts.pinned = pinned_of(p);
  opts.steps = 8;
  const TrotmanResult r = trotman_experiment(*p.stratification, opts);
  bool ok = r.steps.size() == 8;
  double worst_sigma = 0.0;
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const auto& s = r.steps[i];
    worst_sigma = std::max(worst_sigma, s.sigma_min);
    ok = ok && s.status == TransStatus::Fail && s.sigma_min < 1e-8;
    if (i > 0) ok = ok && s.jet_distance < 1.01 * r.steps[i - 1].jet_distance;
  }
  ok = ok && !r.steps.empty() && r.steps.back().jet_distance < r.steps.front().jet_distance && r.passed;
  return {ok, "8 steps, max sigma_min " + fmt("%.1e", worst_sigma) + " (tol 1e-8), jet distance " +
                  fmt("%.4g", r.steps.empty() ? 0.0 : r.steps.front().jet_distance) + " -> " +
                  fmt("%.4g", r.steps.empty() ? 0.0 : r.steps.back().jet_distance) + " (1% band)"};
}

Outcome density() {
  const Problem p = oracle::load_problem("density.json");
  const Json& d = p.sections.at("density");
  const DensityResult r = density_experiment(map_from_json(d.at("family")), *p.stratification, box_from_json(d.at("s_box")),
                                             *p.sampler, d.at("n0"), d.at("levels"), 1.5);
  std::ostringstream os;
  for (const auto& l : r.levels) os << fmt("%.4f", l.report.fraction) << " ";
  os << "failing fractions; ratios";
  for (double q : r.ratios) os << " " << fmt("%.3f", q);
  os << " (min 1.5)";
  bool ok = r.passed && r.levels.size() == 3;
  for (double q : r.ratios) ok = ok && q >= 1.5;
  return {ok, os.str()};
}

Outcome counterexamples() {
  Rng rng(2024);
  double max_x = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int degree = static_cast<int>(rng.next() % 21);
    std::vector<double> a(static_cast<std::size_t>(degree + 1));
    for (auto& c : a) c = std::round(rng.uniform(-1e6, 1e6));
    if (a.back() == 0) a.back() = 1;
    const EscapeResult r = escape_experiment(a);
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * std::pow(static_cast<long double>(r.x_star), i);
    if (std::log(std::fabs(s)) + r.x_star < -1e-9L) return {false, "escape witness fails |q(x*)| >= e^-x*"};
    max_x = std::max(max_x, r.x_star);
  }
  const Problem p = oracle::load_problem("d0.json");
  const Json& d = p.sections.at("d0");
  std::vector<Expr> catalog;
  for (const auto& e : d.at("catalog")) catalog.push_back(expr_from_json(e));
  std::vector<double> samples;
  for (const auto& x : d.at("samples")) samples.push_back(x.get<double>());
  const D0Result r = d0_convergence_experiment(catalog, d.at("i_max"), samples);
  bool ok = r.passed;
  std::ostringstream os;
  os << "1000 escape witnesses (largest x* " << fmt("%.4g", max_x) << "); i0 =";
  for (const auto& e : r.entries) {
    ok = ok && e.i0 && e.differs_at_10;
    os << " " << (e.i0 ? std::to_string(*e.i0) : "none");
  }
  os << ", f_i(10) != f(10) throughout";
  return {ok, os.str()};
}

Outcome determinism() {
  const std::string cases = oracle::read_file(std::string(DTRANS_SOURCE_DIR) + "/fixtures/golden/cases.txt");
  std::istringstream in(cases);
  std::string line;
  int n = 0;
  std::vector<std::string> bad;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    CliOptions o;
    std::size_t i = 1;
    o.command = tok[i++];
    if (o.command == "experiment") o.experiment = tok[i++];
    o.problem_path = std::string(DTRANS_SOURCE_DIR) + "/" + tok[i++];
    for (; i < tok.size(); ++i) {
      if (tok[i] == "--seed") o.seed = std::stoull(tok[++i]);
      else if (tok[i] == "--samples") o.samples = std::stoi(tok[++i]);
      else if (tok[i] == "--tol") o.tol = std::stod(tok[++i]);
      else if (tok[i] == "--exact") o.exact = true;
    }
    const std::string a = run_command(o).report.dump(2) + "\n";
    const std::string b = run_command(o).report.dump(2) + "\n";
    const std::string golden = oracle::read_file(std::string(DTRANS_SOURCE_DIR) + "/fixtures/golden/" + tok[0] + ".json");
    if (a != b || a != golden) bad.push_back(tok[0]);
    ++n;
  }
  std::string detail = std::to_string(n) + " golden reports, two runs each, byte comparison";
  for (const auto& b : bad) detail += "; differs: " + b;
  return {bad.empty() && n > 0, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "derivative engine", 10, derivative_engine},
      {2, "jet machinery", 5, jet_machinery},
      {3, "perturbation contract", 60, perturbation_contract},
      {4, "prescribed derivative", 30, prescribed_derivative},
      {5, "regularity detector", 30, regularity_detector},
      {6, "non-openness at a fault", 60, trotman},
      {7, "parametric density", 60, density},
      {8, "counterexamples", 20, counterexamples},
      {9, "determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit <= 0 || secs < c.limit;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.limit > 0 ? (" < " + fmt("%.0f", c.limit) + " s").c_str() : "");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
