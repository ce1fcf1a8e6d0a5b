#include "dtrans/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtrans/tubular.hpp"

namespace dtrans {

std::string_view to_string(RegStatus s) {
  switch (s) {
    case RegStatus::Regular: return "Regular";
    case RegStatus::Fault: return "Fault";
    case RegStatus::Inconclusive: return "Inconclusive";
  }
  return "Unknown";
}

ProbeCurve ProbeCurve::explicit_curve(DefMap c, Vec y, std::string label) {
  if (c.domain_dim() != 1) throw Error(ErrorCode::ProbeInvalid, "probe curves take one parameter");
  if (c.codomain_dim() != y.size()) throw Error(ErrorCode::DimMismatch, "probe curve and landing point disagree");
  ProbeCurve p;
  p.curve = std::move(c);
  p.landing = std::move(y);
  p.label = std::move(label);
  return p;
}

ProbeCurve ProbeCurve::projected_ray(Vec y, Vec v, std::string label) {
  if (v.size() != y.size()) throw Error(ErrorCode::DimMismatch, "ray direction and landing point disagree");
  if (v.norm() == 0.0) throw Error(ErrorCode::ZeroVector, "ray direction is zero");
  ProbeCurve p;
  p.landing = std::move(y);
  p.direction = std::move(v);
  p.label = std::move(label);
  return p;
}

std::optional<Vec> ProbeCurve::at(const Stratum& x, double t) const {
  try {
    if (curve) return curve->evaluate(Vec::Constant(1, t));
    const Vec z0 = landing + t * direction;
    if (!x.is_implicit()) {
      const Membership mem = membership(x, z0, std::numeric_limits<double>::infinity());
      if (!mem.parameter) return std::nullopt;
      return x.parametric().chart.evaluate(*mem.parameter);
    }
    if (x.implicit().equations.empty()) return z0;
    const DefMap& e = x.equation_map();
    const SolveResult r = gauss_newton([&](const Vec& z) { return e.evaluate(z); },
                                       [&](const Vec& z) { return e.jacobian(z); }, z0, 0.0, 100);
    return r.z;
  } catch (const Error&) {
    return std::nullopt;
  }
}

ProbeOutcome follow_probe(const Stratum& x, const LinearSubspace& ty, const ProbeCurve& probe, int j_first, int j_last,
                          const RegularityOptions& opts) {
  ProbeOutcome out;
  out.label = probe.label;
  out.explicit_curve = probe.is_explicit();
  if (!probe.is_explicit()) out.direction = probe.direction;
  std::vector<LinearSubspace> tangents;
  double prev = std::numeric_limits<double>::infinity();
  for (int j = j_first; j <= j_last; ++j) {
    const double t = std::ldexp(1.0, -j);
    const auto p = probe.at(x, t);
    if (!p) {
      out.reason = "projection failed at j = " + std::to_string(j);
      return out;
    }
    const double dist = (*p - probe.landing).norm();
    if (!(dist < prev)) {
      out.reason = "distance to the landing point stopped decreasing at j = " + std::to_string(j);
      return out;
    }
    if (!probe.is_explicit() && dist > 2.0 * t * probe.direction.norm()) {
      out.reason = "projected ray drifted away at j = " + std::to_string(j);
      return out;
    }
    prev = dist;
    try {
      if (!membership(x, *p, opts.membership_tol).member) {
        out.reason = "probe point leaves " + x.id() + " at j = " + std::to_string(j);
        return out;
      }
      tangents.push_back(tangent_space(x, *p, opts.membership_tol));
    } catch (const Error& e) {
      out.reason = std::string(to_string(e.code())) + " at j = " + std::to_string(j) + ": " + e.what();
      return out;
    }
    out.t.push_back(t);
    out.points.push_back(*p);
    out.deviations.push_back(asym_deviation(ty, tangents.back()));
  }
  if (prev > kFrontierTol) {
    out.reason = "probe does not reach the landing point";
    return out;
  }
  out.valid = true;
  const SequenceLimit lim = sequence_limit(tangents, opts.limit_tol);
  out.converged = lim.converged;
  out.tail_gap = lim.tail_gap;
  if (lim.converged) {
    out.limit = lim.limit;
    out.deviation = asym_deviation(ty, *lim.limit);
  } else {
    out.deviation = out.deviations.back();
  }
  return out;
}

RegularityVerdict whitney_a_pair(const Stratum& x, const Stratum& y, const Vec& point,
                                 const std::vector<ProbeCurve>& probes, const RegularityOptions& opts) {
  RegularityVerdict v;
  v.x = x.id();
  v.y_id = y.id();
  v.y = point;
  if (!membership(y, point, opts.membership_tol).member)
    throw Error(ErrorCode::NotOnStratum, "base point is not on " + y.id());
  if (y.dim() == 0) {
    v.status = RegStatus::Regular;
    return v;
  }
  const LinearSubspace ty = tangent_space(y, point, opts.membership_tol);
  for (const auto& p : probes) {
    if ((p.landing - point).norm() > 1e-12 * std::max(1.0, point.norm()))
      throw Error(ErrorCode::ProbeInvalid, "probe " + p.label + " does not land at the base point");
    ProbeOutcome o = follow_probe(x, ty, p, opts.j_first, opts.j_last, opts);
    if (!o.valid && p.is_explicit()) throw Error(ErrorCode::ProbeInvalid, "probe " + p.label + ": " + o.reason);
    v.probes.push_back(std::move(o));
  }

  bool any_valid = false, all_pass = true, fault = false;
  for (std::size_t i = 0; i < v.probes.size(); ++i) {
    const auto& o = v.probes[i];
    if (!o.valid) continue;
    any_valid = true;
    if (!v.witness || o.deviation > v.deviation) {
      v.witness = i;
      v.deviation = o.deviation;
    }
    if (o.converged && o.deviation > opts.fault_threshold) fault = true;
    if (!o.converged || !(o.deviation < opts.pass_threshold)) all_pass = false;
  }
  if (!any_valid) throw Error(ErrorCode::ProbeInvalid, "no usable probe at the base point");

  if (fault) {
    // Worst converged probe, recomputed on the shifted schedule.
    std::size_t w = *v.witness;
    double worst = -1.0;
    for (std::size_t i = 0; i < v.probes.size(); ++i)
      if (v.probes[i].valid && v.probes[i].converged && v.probes[i].deviation > worst) {
        worst = v.probes[i].deviation;
        w = i;
      }
    v.witness = w;
    v.deviation = worst;
    const ProbeOutcome re = follow_probe(x, ty, probes[w], opts.j_first + 1, opts.j_last + 1, opts);
    if (re.valid && re.converged) v.recheck_deviation = re.deviation;
    v.status = v.recheck_deviation && *v.recheck_deviation > opts.fault_threshold ? RegStatus::Fault
                                                                                   : RegStatus::Inconclusive;
  } else {
    v.status = all_pass ? RegStatus::Regular : RegStatus::Inconclusive;
  }
  return v;
}

namespace {

RegStatus combine(RegStatus a, RegStatus b) {
  if (a == RegStatus::Fault || b == RegStatus::Fault) return RegStatus::Fault;
  if (a == RegStatus::Inconclusive || b == RegStatus::Inconclusive) return RegStatus::Inconclusive;
  return RegStatus::Regular;
}

}  // namespace

RegularityReport whitney_a_stratification(const Stratification& sigma, const RegularityOptions& opts,
                                          const std::vector<PinnedPoint>& pinned) {
  RegularityReport rep;
  Rng rng(opts.seed);
  for (const auto& [xid, yid] : sigma.adjacency()) {
    const Stratum& x = sigma.find(xid);
    const Stratum& y = sigma.find(yid);
    PairReport pr;
    pr.x = xid;
    pr.y = yid;

    std::vector<std::pair<Vec, std::vector<ProbeCurve>>> bases;
    for (const auto& p : pinned)
      if (p.x == xid && p.y == yid) bases.emplace_back(p.point, p.probes);
    for (auto& b : sample_stratum(y, opts.base_points, rng, sigma.sampling_box(y)))
      bases.emplace_back(b, std::vector<ProbeCurve>{});

    for (auto& [b, probes] : bases) {
      RegularityVerdict v;
      try {
        if (y.dim() > 0) {
          const LinearSubspace nsp = normal_space(y, b, opts.membership_tol);
          for (int r = 0; r < opts.random_rays && nsp.dim() > 0; ++r)
            probes.push_back(ProbeCurve::projected_ray(b, nsp.basis() * rng.unit_vector(nsp.dim()),
                                                       "ray" + std::to_string(r)));
        }
        v = whitney_a_pair(x, y, b, probes, opts);
      } catch (const Error& e) {
        v.x = xid;
        v.y_id = yid;
        v.y = b;
        v.status = RegStatus::Inconclusive;
        ProbeOutcome o;
        o.label = "error";
        o.reason = std::string(to_string(e.code())) + ": " + e.what();
        v.probes.push_back(std::move(o));
      }
      pr.status = combine(pr.status, v.status);
      pr.verdicts.push_back(std::move(v));
    }
    rep.status = combine(rep.status, pr.status);
    rep.pairs.push_back(std::move(pr));
  }
  return rep;
}

RefinementReport refinement_inclusion_check(const Stratification& coarse, const Stratification& fine,
                                            const std::vector<DefMap>& maps, const RegionSampler& sampler,
                                            std::uint64_t seed, int samples_per_stratum) {
  if (coarse.ambient_dim() != fine.ambient_dim())
    throw Error(ErrorCode::AmbientMismatch, "stratifications live in different spaces");
  RefinementReport rep;
  Rng rng(seed);
  for (const auto& s : fine.strata()) {
    const auto pts = sample_stratum(s, samples_per_stratum, rng, fine.sampling_box(s));
    if (pts.empty()) throw Error(ErrorCode::NotARefinement, "no sample found on " + s.id());
    std::optional<std::size_t> parent;
    for (const auto& p : pts) {
      ++rep.membership_samples;
      const auto c = stratum_containing(coarse, p);
      if (!c) throw Error(ErrorCode::NotARefinement, s.id() + " leaves the coarse stratification");
      if (parent && *parent != *c)
        throw Error(ErrorCode::NotARefinement, s.id() + " meets two coarse strata");
      parent = c;
    }
    rep.parent.emplace_back(s.id(), coarse.strata()[*parent].id());
  }
  auto check_covered = [&](const Stratum& s, const Vec& p) {
    ++rep.membership_samples;
    const auto c = stratum_containing(fine, p);
    if (!c || rep.parent[*c].second != s.id())
      throw Error(ErrorCode::NotARefinement, "a point of " + s.id() + " is not covered by its refinement");
  };
  for (const auto& s : coarse.strata()) {
    for (const auto& p : sample_stratum(s, samples_per_stratum, rng, coarse.sampling_box(s))) check_covered(s, p);
  }
  // Gaps of a refinement sit where an inequality of a fine stratum vanishes,
  // a set random samples never hit: solve for such points and check them too.
  for (std::size_t fi = 0; fi < fine.strata().size(); ++fi) {
    const Stratum& t = fine.strata()[fi];
    const Stratum& s = coarse.find(rep.parent[fi].second);
    if (!t.is_implicit() || !s.is_implicit()) continue;
    const auto starts = sample_stratum(t, 4, rng, fine.sampling_box(t));
    for (const auto& g : t.implicit().inequalities) {
      std::vector<Expr> eqs = s.implicit().equations;
      eqs.push_back(g);
      const DefMap sys(coarse.ambient_dim(), eqs);
      for (const auto& x0 : starts) {
        SolveResult r;
        try {
          r = gauss_newton([&](const Vec& z) { return sys.evaluate(z); }, [&](const Vec& z) { return sys.jacobian(z); },
                           x0, 1e-12, 100);
        } catch (const Error&) {
          continue;
        }
        if (!r.converged) continue;
        bool in_s = false;
        try {
          in_s = membership(s, r.z).member;
        } catch (const Error&) {
        }
        if (in_s) check_covered(s, r.z);
      }
    }
  }
  for (std::size_t i = 0; i < maps.size(); ++i) {
    RefinementMapResult r;
    r.index = i;
    r.fine_transverse = is_transverse_on(maps[i], fine, sampler).transverse;
    r.coarse_transverse = is_transverse_on(maps[i], coarse, sampler).transverse;
    r.violation = r.fine_transverse && !r.coarse_transverse;
    if (r.violation) rep.inclusion_holds = false;
    rep.maps.push_back(r);
  }
  return rep;
}

}  // namespace dtrans
