#include "dtrans/cli.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "dtrans/experiments.hpp"
#include "dtrans/io.hpp"

namespace dtrans {

namespace {

struct Context {
  const CliOptions& opts;
  JsonDocument doc;
  Problem problem;
  std::uint64_t seed = 0;
  TransOptions trans;

  const Stratification& sigma() const {
    if (!problem.stratification) doc.fail("/stratification", "this command needs a stratification");
    return *problem.stratification;
  }
  const DefMap& map() const {
    if (!problem.map) doc.fail("/map", "this command needs a map");
    return *problem.map;
  }
  RegionSampler sampler() const {
    if (!problem.sampler) doc.fail("/sampler", "this command needs a sampler");
    RegionSampler s = *problem.sampler;
    if (opts.samples) s.points_per_dim = *opts.samples;
    return s;
  }
  bool has(const std::string& ptr) const { return doc.find(ptr) != nullptr; }
  int get_int(const std::string& ptr, int fallback) const {
    return has(ptr) ? doc.convert(ptr, [](const Json& j) { return j.get<int>(); }) : fallback;
  }
  double get_double(const std::string& ptr, double fallback) const {
    return has(ptr) ? doc.convert(ptr, double_from_json) : fallback;
  }
  bool get_bool(const std::string& ptr, bool fallback) const {
    return has(ptr) ? doc.convert(ptr, [](const Json& j) { return j.get<bool>(); }) : fallback;
  }
  std::vector<double> get_doubles(const std::string& ptr, std::vector<double> fallback) const {
    if (!has(ptr)) return fallback;
    return doc.convert(ptr, [](const Json& j) {
      std::vector<double> v;
      for (const auto& e : j) v.push_back(double_from_json(e));
      return v;
    });
  }
  std::vector<PinnedPoint> pinned(const std::string& ptr) const {
    if (!has(ptr)) return {};
    return doc.convert(ptr, [](const Json& j) {
      std::vector<PinnedPoint> out;
      for (const auto& p : j) out.push_back(pinned_from_json(p));
      return out;
    });
  }
  RegularityOptions regularity(const std::string& base) const {
    RegularityOptions r;
    r.seed = seed;
    r.base_points = get_int(base + "/base_points", r.base_points);
    r.random_rays = get_int(base + "/random_rays", r.random_rays);
    r.j_last = get_int(base + "/j_last", r.j_last);
    r.pass_threshold = get_double(base + "/pass_threshold", r.pass_threshold);
    r.fault_threshold = get_double(base + "/fault_threshold", r.fault_threshold);
    if (opts.tol) r.membership_tol = *opts.tol;
    return r;
  }
  void check_map_target(const DefMap& f, int target, const std::string& where) const {
    if (f.codomain_dim() != target)
      doc.fail(where, "map target dimension " + std::to_string(f.codomain_dim()) + " differs from " +
                          std::to_string(target));
  }
};

struct Verdict {
  int exit_code = 0;
  std::string status;
  Json results;
  std::string summary;
};

Verdict cmd_validate(const Context& c) {
  Rng rng(c.seed);
  const ValidationReport v = validate_stratification(c.sigma(), c.opts.samples.value_or(20), rng);
  Verdict out;
  out.results["validation"] = to_json(v);
  bool ok = v.valid;
  if (c.has("/refinement")) {
    const Stratification fine = c.doc.convert("/refinement/fine", stratification_from_json);
    std::vector<DefMap> maps;
    if (c.has("/refinement/maps"))
      maps = c.doc.convert("/refinement/maps", [](const Json& j) {
        std::vector<DefMap> ms;
        for (const auto& m : j) ms.push_back(map_from_json(m));
        return ms;
      });
    const RefinementReport r = refinement_inclusion_check(c.sigma(), fine, maps, c.sampler(), c.seed);
    out.results["refinement"] = to_json(r);
    ok = ok && r.inclusion_holds;
  }
  out.exit_code = ok ? 0 : 1;
  out.status = ok ? "valid" : "invalid";
  out.summary = "stratification " + out.status;
  return out;
}

Verdict region_verdict(const RegionReport& r) {
  Verdict out;
  out.results = to_json(r);
  out.exit_code = r.transverse ? 0 : 1;
  out.status = r.transverse ? "transverse" : "not transverse";
  int hits = 0;
  for (const auto& s : r.strata) hits += s.transverse + s.fail;
  std::ostringstream os;
  os << out.status << ": " << hits << " intersection points, " << r.fail_count() << " failures over " << r.samples
     << " samples";
  out.summary = os.str();
  return out;
}

Verdict cmd_check_transversality(const Context& c) {
  const DefMap& f = c.map();
  const Stratification& s = c.sigma();
  if (c.problem.mode == "jet") {
    return region_verdict(jet_transverse(f, s, c.problem.k, c.sampler(), c.trans));
  }
  c.check_map_target(f, s.ambient_dim(), "/map");
  if (c.problem.mode == "region") return region_verdict(is_transverse_on(f, s, c.sampler(), c.trans));

  if (c.problem.points.empty()) c.doc.fail("/points", "point mode needs points");
  Verdict out;
  out.results = Json::array();
  int fails = 0;
  for (const auto& x : c.problem.points)
    for (const auto& st : s.strata()) {
      const TransversalityVerdict v = is_transverse_at(f, st, x, c.trans);
      if (v.status == TransStatus::Fail) ++fails;
      if (v.status != TransStatus::NotInStratum || v.ambiguous) out.results.push_back(to_json(v));
    }
  out.exit_code = fails ? 1 : 0;
  out.status = fails ? "not transverse" : "transverse";
  out.summary = out.status + ": " + std::to_string(fails) + " failing points";
  return out;
}

Verdict cmd_check_jet(const Context& c) {
  return region_verdict(jet_transverse(c.map(), c.sigma(), c.problem.k, c.sampler(), c.trans));
}

Verdict cmd_check_regularity(const Context& c) {
  const RegularityReport r = whitney_a_stratification(c.sigma(), c.regularity("/regularity"), c.pinned("/regularity/pinned"));
  Verdict out;
  out.results = to_json(r);
  out.status = std::string(to_string(r.status));
  out.exit_code = r.status == RegStatus::Regular ? 0 : 1;
  out.summary = "Whitney (a): " + out.status;
  return out;
}

Verdict cmd_perturb(const Context& c) {
  if (!c.problem.epsilon) c.doc.fail("/epsilon", "perturb needs epsilon");
  PerturbOptions po;
  po.seed = c.seed;
  po.trans = c.trans;
  po.max_draws = c.get_int("/perturb/max_draws", po.max_draws);
  if (c.has("/perturb/phi_override")) po.phi_override = c.doc.convert("/perturb/phi_override", expr_from_json);
  const PerturbResult r =
      perturb_to_transverse(c.map(), c.sigma(), c.problem.k, c.problem.l, *c.problem.epsilon, c.sampler(), po);
  Verdict out;
  out.results = to_json(r);
  out.status = "transverse";
  out.summary = "accepted draw " + std::to_string(r.draws) + " after " + std::to_string(r.rejections) + " rejections";
  return out;
}

Verdict cmd_prescribed(const Context& c) {
  const Stratification& s = c.sigma();
  const int m = c.get_int("/prescribed/m_dim", 0);
  const Vec p = c.doc.convert("/prescribed/point", vec_from_json);
  if (p.size() != s.ambient_dim()) c.doc.fail("/prescribed/point", "point dimension differs from the ambient");
  const LinearSubspace h =
      c.doc.convert("/prescribed/h", [&](const Json& j) { return subspace_from_json(j, s.ambient_dim()); });
  PrescribedOptions po;
  po.seed = c.seed;
  po.trans = c.trans;
  po.max_draws = c.get_int("/prescribed/max_draws", po.max_draws);
  if (c.problem.sampler) po.sampler = c.sampler();
  const PrescribedResult r = transverse_with_derivative(m, s, p, h, po);
  Verdict out;
  out.results = to_json(r);
  const bool ok = r.report.transverse && r.image_gap <= 1e-8;
  out.exit_code = ok ? 0 : 1;
  out.status = ok ? "constructed" : "certificate failed";
  std::ostringstream os;
  os << out.status << " on stratum " << r.stratum << ", image gap " << r.image_gap;
  out.summary = os.str();
  return out;
}

Verdict cmd_tubular(const Context& c) {
  const std::string id = c.doc.convert("/tubular/stratum", [](const Json& j) { return j.get<std::string>(); });
  if (!c.sigma().has(id)) c.doc.fail("/tubular/stratum", "unknown stratum " + id);
  const Stratum& m = c.sigma().find(id);
  std::optional<Box> box;
  if (c.has("/tubular/box")) box = c.doc.convert("/tubular/box", box_from_json);
  else box = c.sigma().sampling_box(m);
  Rng rng(c.seed);
  const RadiusEstimate est = estimate_radius(m, c.get_int("/tubular/budget", c.opts.samples.value_or(12)), rng, box);
  Verdict out;
  out.results["radius"] = to_json(est);
  Json probes = Json::array();
  if (c.has("/tubular/probes")) {
    const auto ws = c.doc.convert("/tubular/probes", [](const Json& j) {
      std::vector<Vec> v;
      for (const auto& e : j) v.push_back(vec_from_json(e));
      return v;
    });
    const TubularNeighborhood tube(m, est.radius, rng, box);
    for (const auto& w : ws) {
      Json o{{"w", vec_to_json(w)}};
      try {
        const auto r = tube.retract(w);
        o["x"] = vec_to_json(r.x);
        o["orthogonality"] = double_to_json(r.orthogonality);
      } catch (const Error& e) {
        o["error"] = std::string(to_string(e.code()));
      }
      probes.push_back(o);
    }
  }
  out.results["retractions"] = probes;
  out.status = "certified";
  out.summary = "tube radius " + to_string(est.radius) + " (" + est.family + ")";
  return out;
}

Verdict experiment_verdict(Json results, bool passed, const std::string& what) {
  Verdict out;
  out.results = std::move(results);
  out.exit_code = passed ? 0 : 1;
  out.status = passed ? "passed" : "failed";
  out.summary = what + ": " + out.status;
  return out;
}

Verdict cmd_escape(const Context& c) {
  Json results;
  bool ok = true;
  Json listed = Json::array();
  if (c.has("/escape/polynomials")) {
    const auto polys = c.doc.convert("/escape/polynomials", [](const Json& j) {
      std::vector<std::vector<double>> ps;
      for (const auto& p : j) {
        std::vector<double> q;
        for (const auto& v : p) q.push_back(double_from_json(v));
        ps.push_back(q);
      }
      return ps;
    });
    for (const auto& q : polys) listed.push_back(to_json(escape_experiment(q)));
  }
  results["polynomials"] = listed;
  if (c.has("/escape/random")) {
    const int count = c.get_int("/escape/random/count", 1000);
    const int max_degree = c.get_int("/escape/random/max_degree", 20);
    const double bound = c.get_double("/escape/random/coef_bound", 1e6);
    Rng rng(c.seed);
    int found = 0;
    double max_x = 0.0;
    for (int t = 0; t < count; ++t) {
      const int d = static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_degree + 1));
      std::vector<double> q(static_cast<std::size_t>(d + 1));
      for (auto& v : q) v = rng.uniform(-bound, bound);
      if (q.back() == 0.0) q.back() = bound;
      const EscapeResult r = escape_experiment(q);
      if (r.certificate >= 0.0L) ++found;
      max_x = std::max(max_x, r.x_star);
    }
    results["random"] = Json{{"count", count}, {"witnesses", found}, {"max_x_star", double_to_json(max_x)}};
    ok = found == count;
  }
  return experiment_verdict(results, ok, "escape");
}

Verdict cmd_d0(const Context& c) {
  std::vector<Expr> catalog;
  if (c.has("/d0/catalog"))
    catalog = c.doc.convert("/d0/catalog", [](const Json& j) {
      std::vector<Expr> es;
      for (const auto& e : j) es.push_back(expr_from_json(e));
      return es;
    });
  const D0Result r = d0_convergence_experiment(catalog, c.get_int("/d0/i_max", 20),
                                               c.get_doubles("/d0/samples", {1.5, 2.0, 4.0, 8.0}));
  return experiment_verdict(to_json(r), r.passed, "D0 convergence");
}

TrotmanOptions trotman_options(const Context& c) {
  TrotmanOptions to;
  to.seed = c.seed;
  to.m_dim = c.get_int("/trotman/m_dim", to.m_dim);
  to.steps = c.get_int("/trotman/steps", to.steps);
  to.bump_inner = c.get_double("/trotman/bump_inner", to.bump_inner);
  to.bump_outer = c.get_double("/trotman/bump_outer", to.bump_outer);
  to.regularity = c.regularity("/regularity");
  to.pinned = c.pinned("/regularity/pinned");
  if (c.has("/trotman/sampler")) to.sampler = c.doc.convert("/trotman/sampler", sampler_from_json);
  return to;
}

Verdict cmd_trotman(const Context& c) {
  const TrotmanResult r = trotman_experiment(c.sigma(), trotman_options(c));
  Verdict v = experiment_verdict(to_json(r), r.passed, "non-openness at the fault");
  std::ostringstream os;
  os << v.summary << " (" << r.steps.size() << " steps, deviation " << r.deviation << ")";
  v.summary = os.str();
  return v;
}

Verdict cmd_openness(const Context& c) {
  OpennessOptions oo;
  oo.seed = c.seed;
  oo.deltas = c.get_doubles("/openness/deltas", oo.deltas);
  oo.trials = c.get_int("/openness/trials", oo.trials);
  oo.degree = c.get_int("/openness/degree", oo.degree);
  oo.require_regular = c.get_bool("/openness/require_regular", true);
  oo.regularity = c.regularity("/regularity");
  oo.pinned = c.pinned("/regularity/pinned");
  const bool control = c.get_bool("/openness/trotman_control", false);
  DefMap f;
  RegionSampler sampler;
  if (control) {
    // The base map and its non-transverse approximants come from the fault construction.
    TrotmanResult t = trotman_experiment(c.sigma(), trotman_options(c));
    f = t.base.f;
    oo.adversarial = std::move(t.g);
    sampler = c.has("/trotman/sampler") ? c.doc.convert("/trotman/sampler", sampler_from_json) : RegionSampler{};
    if (sampler.box.dim() == 0) {
      sampler.box = Box::cube(f.domain_dim(), -1.0, 1.0);
      sampler.points_per_dim = 9;
    }
  } else {
    f = c.map();
    sampler = c.sampler();
  }
  const OpennessResult r = openness_experiment(c.sigma(), f, sampler, oo);
  // A control run expects no positive stability radius.
  const bool passed = control ? r.stability_radius == 0.0 : r.stability_radius > 0.0;
  Verdict v = experiment_verdict(to_json(r), passed, "openness");
  std::ostringstream os;
  os << v.summary << " (stability radius " << r.stability_radius << ")";
  v.summary = os.str();
  return v;
}

Verdict cmd_density(const Context& c) {
  const DefMap phi = c.doc.convert("/density/family", map_from_json);
  const Box s_box = c.doc.convert("/density/s_box", box_from_json);
  const DensityResult r = density_experiment(phi, c.sigma(), s_box, c.sampler(), c.get_int("/density/n0", 9),
                                             c.get_int("/density/levels", 3), c.get_double("/density/min_ratio", 1.5));
  return experiment_verdict(to_json(r), r.passed, "density");
}

Verdict dispatch(const Context& c) {
  const std::string& cmd = c.opts.command;
  if (cmd == "validate") return cmd_validate(c);
  if (cmd == "check-transversality") return cmd_check_transversality(c);
  if (cmd == "check-jet-transversality") return cmd_check_jet(c);
  if (cmd == "check-regularity") return cmd_check_regularity(c);
  if (cmd == "perturb") return cmd_perturb(c);
  if (cmd == "construct-prescribed") return cmd_prescribed(c);
  if (cmd == "tubular") return cmd_tubular(c);
  if (cmd == "experiment") {
    const std::string& e = c.opts.experiment;
    if (e == "escape") return cmd_escape(c);
    if (e == "d0") return cmd_d0(c);
    if (e == "openness") return cmd_openness(c);
    if (e == "trotman") return cmd_trotman(c);
    if (e == "density") return cmd_density(c);
    throw Error(ErrorCode::InvalidArgument, "unknown experiment \"" + e + "\"");
  }
  throw Error(ErrorCode::InvalidArgument, "unknown command \"" + cmd + "\"");
}

}  // namespace

CliOutcome run_command(const CliOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  CliOutcome out;
  std::string command = opts.command;
  if (!opts.experiment.empty()) command += " " + opts.experiment;
  out.report = Json{{"command", command},
                    {"problem", std::filesystem::path(opts.problem_path).filename().string()},
                    {"options", Json{{"exact", opts.exact}}}};
  if (opts.tol) out.report["options"]["tol"] = *opts.tol;
  if (opts.samples) out.report["options"]["samples"] = *opts.samples;
  try {
    Context c{opts, JsonDocument::load(opts.problem_path), {}, 0, {}};
    c.problem = problem_from_document(c.doc);
    c.seed = opts.seed ? *opts.seed : c.problem.seed.value_or(0);
    out.report["seed"] = c.seed;
    if (opts.tol) c.trans.membership_tol = *opts.tol;
    c.trans.exact_only = opts.exact;
    if (opts.exact) {
      if (c.problem.map && !c.problem.map->is_polynomial())
        throw Error(ErrorCode::NotPolynomial, "--exact needs a polynomial map");
      if (c.problem.stratification)
        for (const auto& s : c.problem.stratification->strata())
          if (!s.is_polynomial()) throw Error(ErrorCode::NotPolynomial, "--exact needs polynomial strata");
      if (c.problem.epsilon && !c.problem.epsilon->is_polynomial())
        throw Error(ErrorCode::NotPolynomial, "--exact needs a polynomial epsilon");
    }
    Verdict v = dispatch(c);
    out.exit_code = v.exit_code;
    out.report["status"] = v.status;
    out.report["results"] = std::move(v.results);
    out.summary = v.summary;
  } catch (const Error& e) {
    out.exit_code = 2;
    out.report["status"] = "error";
    out.report["error"] = Json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
    out.summary = std::string("error: ") + e.what();
  }
  out.report["exit_code"] = out.exit_code;
  if (opts.timing)
    out.report["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace dtrans
