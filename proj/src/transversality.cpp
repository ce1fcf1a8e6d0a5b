#include "dtrans/transversality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

namespace dtrans {

std::string_view to_string(TransStatus s) {
  switch (s) {
    case TransStatus::NotInStratum: return "NotInStratum";
    case TransStatus::Transverse: return "Transverse";
    case TransStatus::Fail: return "Fail";
  }
  return "Unknown";
}

namespace {

std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

bool exact_on_stratum(const Stratum& s, const std::vector<Rational>& y) {
  for (const auto& e : s.implicit().equations)
    if (e.evaluate_exact(y) != 0) return false;
  for (const auto& g : s.implicit().inequalities)
    if (!(g.evaluate_exact(y) > 0)) return false;
  return true;
}

std::vector<std::vector<Rational>> mat_mul(const std::vector<std::vector<Rational>>& a,
                                           const std::vector<std::vector<Rational>>& b) {
  const std::size_t r = a.size(), inner = b.size(), c = b.empty() ? 0 : b.front().size();
  std::vector<std::vector<Rational>> out(r, std::vector<Rational>(c, Rational(0)));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < inner; ++k) {
      if (a[i][k] == 0) continue;
      for (std::size_t j = 0; j < c; ++j) out[i][j] += a[i][k] * b[k][j];
    }
  return out;
}

}  // namespace

TransversalityVerdict is_transverse_at(const DefMap& f, const Stratum& s, const Vec& x, const TransOptions& opts) {
  if (f.codomain_dim() != s.ambient_dim())
    throw Error(ErrorCode::DimMismatch, "map target dimension differs from the stratum's ambient space");
  if (opts.exact_only && (!f.is_polynomial() || !s.is_polynomial()))
    throw Error(ErrorCode::NotPolynomial, "exact mode needs polynomial maps and strata");
  TransversalityVerdict v;
  v.x = x;
  v.stratum = s.id();
  v.y = f.evaluate(x);
  Membership mem;
  try {
    mem = membership(s, v.y, opts.membership_tol);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::GuardViolation) throw;
    v.distance = std::numeric_limits<double>::infinity();
    return v;
  }
  v.distance = mem.residual;
  if (!mem.member) {
    v.ambiguous = mem.inequality_min > 0.0 && mem.residual > opts.membership_tol && mem.residual <= opts.ambiguity_tol;
    return v;
  }

  const int n = s.ambient_dim();
  const Mat df = f.jacobian(x);
  const LinearSubspace t = tangent_space(s, v.y, opts.membership_tol);
  Mat span(n, df.cols() + t.dim());
  span << df, t.basis();
  const RankInfo info = numeric_rank(span, opts.rank_tol);
  v.witness = info.singular_values.size() >= n ? info.singular_values(n - 1) : 0.0;
  v.status = info.rank == n ? TransStatus::Transverse : TransStatus::Fail;

  if (opts.allow_exact && f.is_polynomial() && s.is_implicit() && s.is_polynomial()) {
    const auto xq = to_rational(as_span(x));
    const auto yq = f.evaluate_exact(xq);
    if (exact_on_stratum(s, yq)) {
      if (s.implicit().equations.empty()) {
        v.status = TransStatus::Transverse;
      } else {
        const auto je = s.equation_map().jacobian_exact(yq);
        if (exact_rank(je) != s.codim())
          throw Error(ErrorCode::RankDefect, "equation Jacobian of stratum " + s.id() + " is singular at the point");
        const int r = exact_rank(mat_mul(je, f.jacobian_exact(xq)));
        v.status = r == s.codim() ? TransStatus::Transverse : TransStatus::Fail;
      }
      v.exact = true;
    }
  }
  return v;
}

std::vector<Vec> RegionSampler::generate() const {
  std::vector<Vec> out;
  if (box.dim() > 0 && points_per_dim > 0) {
    Box b = box;
    for (std::size_t i = 0; i < b.lo.size(); ++i) {
      if (!std::isfinite(b.lo[i])) b.lo[i] = -2.0;
      if (!std::isfinite(b.hi[i])) b.hi[i] = 2.0;
    }
    out = certification_grid(b, points_per_dim, 0.0);
  }
  for (const auto& p : points) out.push_back(p);
  if (random_points > 0) {
    Rng rng(seed);
    for (int i = 0; i < random_points; ++i) {
      Vec p(box.dim());
      for (int d = 0; d < box.dim(); ++d) {
        const double lo = std::isfinite(box.lo[static_cast<std::size_t>(d)]) ? box.lo[static_cast<std::size_t>(d)] : -2.0;
        const double hi = std::isfinite(box.hi[static_cast<std::size_t>(d)]) ? box.hi[static_cast<std::size_t>(d)] : 2.0;
        p(d) = rng.uniform(lo, hi);
      }
      out.push_back(p);
    }
  }
  return out;
}

int RegionReport::fail_count() const {
  int c = 0;
  for (const auto& s : strata) c += s.fail;
  return c;
}

namespace {

std::optional<Vec> locate_intersection(const DefMap& f, const Stratum& s, const DefMap& composite, const Vec& x0) {
  if (s.is_implicit()) {
    if (s.implicit().equations.empty()) return x0;
    SolveResult r;
    try {
      r = gauss_newton([&](const Vec& x) { return composite.evaluate(x); },
                       [&](const Vec& x) { return composite.jacobian(x); }, x0, 0.0, 200);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!(r.residual <= 1e-10)) return std::nullopt;
    return r.z;
  }
  const int m = f.domain_dim();
  const DefMap& chart = s.parametric().chart;
  const int d = chart.domain_dim();
  Vec z(m + d);
  try {
    const Membership mem = membership(s, f.evaluate(x0), std::numeric_limits<double>::infinity());
    if (!mem.parameter) return std::nullopt;
    z.head(m) = x0;
    z.tail(d) = *mem.parameter;
    const SolveResult r = gauss_newton(
        [&](const Vec& v) { return Vec(f.evaluate(Vec(v.head(m))) - chart.evaluate(Vec(v.tail(d)))); },
        [&](const Vec& v) {
          Mat j(f.codomain_dim(), m + d);
          j << f.jacobian(Vec(v.head(m))), -chart.jacobian(Vec(v.tail(d)));
          return j;
        },
        z, 0.0, 200);
    if (!(r.residual <= 1e-10)) return std::nullopt;
    return Vec(r.z.head(m));
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool exact_hit(const DefMap& f, const Stratum& s, const Vec& x, const TransOptions& opts) {
  if (!opts.allow_exact || !f.is_polynomial() || !s.is_implicit() || !s.is_polynomial()) return false;
  if (s.implicit().equations.empty()) return false;
  try {
    const auto y = f.evaluate_exact(to_rational(as_span(x)));
    for (const auto& e : s.implicit().equations)
      if (e.evaluate_exact(y) != 0) return false;
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

RegionReport is_transverse_on(const DefMap& f, const Stratification& sigma, const RegionSampler& sampler,
                              const TransOptions& opts) {
  if (f.codomain_dim() != sigma.ambient_dim())
    throw Error(ErrorCode::DimMismatch, "map target dimension differs from the stratification's ambient space");
  const std::vector<Vec> samples = sampler.generate();
  RegionReport rep;
  rep.samples = static_cast<int>(samples.size());
  const Box& box = sampler.box;

  for (const auto& s : sigma.strata()) {
    StratumReport sr;
    sr.id = s.id();
    sr.min_margin = std::numeric_limits<double>::infinity();
    const DefMap composite = s.is_implicit() ? s.equation_map().compose(f) : DefMap();
    // Samples that hit S exactly go first so that Gauss-Newton endpoints
    // stalling next to a tangential root are absorbed by the exact point.
    std::vector<std::pair<Vec, bool>> order;
    for (const auto& x0 : samples)
      if (exact_hit(f, s, x0, opts)) order.emplace_back(x0, true);
    for (const auto& x0 : samples)
      if (!exact_hit(f, s, x0, opts)) order.emplace_back(x0, false);
    std::vector<Vec> seen;
    for (const auto& [x0, hit] : order) {
      std::optional<Vec> located;
      if (hit) {
        located = x0;
      } else {
        try {
          located = locate_intersection(f, s, composite, x0);
        } catch (const Error&) {
        }
      }
      if (located && box.dim() > 0 && !box.contains(as_span(*located), 1e-9)) located.reset();
      if (!located) {
        ++sr.not_in_stratum;
        continue;
      }
      bool dup = false;
      for (const auto& q : seen)
        if ((q - *located).norm() <= 1e-6 * (1.0 + q.norm())) dup = true;
      if (dup) continue;
      seen.push_back(*located);
      TransversalityVerdict v;
      try {
        v = is_transverse_at(f, s, *located, opts);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NotPolynomial) throw;
        std::ostringstream os;
        os << s.id() << ": " << to_string(e.code()) << ": " << e.what();
        rep.errors.push_back(os.str());
        continue;
      }
      if (v.ambiguous) ++sr.ambiguous;
      switch (v.status) {
        case TransStatus::NotInStratum:
          ++sr.not_in_stratum;
          if (!v.ambiguous) continue;
          break;
        case TransStatus::Transverse:
          ++sr.transverse;
          sr.min_margin = std::min(sr.min_margin, v.witness);
          break;
        case TransStatus::Fail:
          ++sr.fail;
          rep.transverse = false;
          break;
      }
      sr.verdicts.push_back(std::move(v));
    }
    if (!std::isfinite(sr.min_margin)) sr.min_margin = 0.0;
    rep.strata.push_back(std::move(sr));
  }
  return rep;
}

RegionReport jet_transverse(const DefMap& f, const Stratification& sigma, int k, const RegionSampler& sampler,
                            const TransOptions& opts) {
  const JetSpaceSpec spec{f.domain_dim(), f.codomain_dim(), k};
  if (sigma.ambient_dim() != spec.total_dim())
    throw Error(ErrorCode::SpecMismatch, "stratification lives in dimension " + std::to_string(sigma.ambient_dim()) +
                                             " but J^" + std::to_string(k) + " has dimension " +
                                             std::to_string(spec.total_dim()));
  return is_transverse_on(jet_prolongation(f, k), sigma, sampler, opts);
}

Stratum preimage_stratum(const DefMap& g, const Stratum& s) {
  if (!s.is_implicit()) throw Error(ErrorCode::InvalidArgument, "preimages need implicit strata");
  ImplicitPatch p;
  for (const auto& e : s.implicit().equations) p.equations.push_back(e.substitute(g.components()));
  for (const auto& e : s.implicit().inequalities) p.inequalities.push_back(e.substitute(g.components()));
  return Stratum(s.id() + "_preimage", g.domain_dim(), s.dim() + g.domain_dim() - g.codomain_dim(), std::move(p));
}

CompositionReport compose_transversality_check(const DefMap& f, const DefMap& g, const Stratum& s,
                                               const std::vector<Vec>& samples, const TransOptions& opts) {
  if (f.codomain_dim() != g.domain_dim()) throw Error(ErrorCode::DimMismatch, "f and g do not compose");
  const Stratum pre = preimage_stratum(g, s);
  const DefMap gf = g.compose(f);
  CompositionReport rep;
  for (const auto& x : samples) {
    const Vec fx = f.evaluate(x);
    rep.outer.push_back(is_transverse_at(g, s, fx, opts));
    if (rep.outer.back().status == TransStatus::Fail)
      throw Error(ErrorCode::HypothesisFailed, "g is not transverse to " + s.id() + " at f(x)");
    rep.inner.push_back(is_transverse_at(f, pre, x, opts));
    if (rep.inner.back().status == TransStatus::Fail)
      throw Error(ErrorCode::HypothesisFailed, "f is not transverse to the preimage of " + s.id());
    rep.composite.push_back(is_transverse_at(gf, s, x, opts));
    if (rep.composite.back().status == TransStatus::Fail) rep.conclusion_holds = false;
  }
  return rep;
}

PerturbResult perturb_to_transverse(const DefMap& f, const Stratification& sigma, int k, int l, const Expr& eps,
                                    const RegionSampler& sampler, const PerturbOptions& opts) {
  if (k < 0 || l < k) throw Error(ErrorCode::InvalidArgument, "need 0 <= k <= l");
  const int m = f.domain_dim();
  const int n = f.codomain_dim();
  if (sampler.box.dim() != m) throw Error(ErrorCode::DimMismatch, "sampler box must live in the domain");
  PerturbResult res;
  res.R = count_multi_indices(m, l);
  mpz_class lf = 1;
  for (int i = 2; i <= l; ++i) lf *= i;
  res.C = Rational(mpz_class(res.R) * mpz_class(res.R) * lf * lf);

  std::vector<Expr> coords;
  for (int i = 0; i < m; ++i) coords.push_back(Expr::var(i));
  if (opts.phi_override) {
    res.phi = *opts.phi_override;
    res.phi_family = "override";
  } else {
    Expr bound = Expr(Rational(1) / (2 * res.C)) * eps;
    const int half = (l + 1) / 2;
    if (half > 0) bound = bound * recip(pow(Expr(1) + squared_norm(coords), half));
    const MinorantResult mr = positive_minorant(bound, l, sampler.box, opts.grid);
    res.phi = mr.phi;
    res.phi_family = mr.family;
  }

  const auto monos = multi_indices(m, k);
  const std::vector<Vec> samples = sampler.generate();
  Rng rng(opts.seed);
  double best_margin = -std::numeric_limits<double>::infinity();
  int best_fail = std::numeric_limits<int>::max();
  for (int draw = 1; draw <= opts.max_draws; ++draw) {
    std::vector<double> s(static_cast<std::size_t>(n) * monos.size());
    for (auto& v : s) v = rng.uniform_open();
    std::vector<Expr> comps;
    for (int i = 0; i < n; ++i) {
      std::vector<Expr> terms;
      for (std::size_t a = 0; a < monos.size(); ++a)
        terms.push_back(Expr(s[static_cast<std::size_t>(i) * monos.size() + a]) * monomial(monos[a]));
      comps.push_back(f.component(i) + res.phi * Expr::sum(std::move(terms)));
    }
    DefMap g(m, std::move(comps), f.domain());
    const NeighborhoodResult nb = in_neighborhood(f, g, NeighborhoodSpec{l, eps, samples});
    best_margin = std::max(best_margin, nb.margin);
    if (!nb.inside) {
      ++res.rejections;
      continue;
    }
    RegionReport rep = jet_transverse(g, sigma, k, sampler, opts.trans);
    if (!rep.transverse) {
      best_fail = std::min(best_fail, rep.fail_count());
      ++res.rejections;
      continue;
    }
    res.g = std::move(g);
    res.s = std::move(s);
    res.draws = draw;
    res.report = std::move(rep);
    res.neighborhood = nb;
    return res;
  }
  std::ostringstream os;
  os << "all " << opts.max_draws << " draws rejected; best neighborhood margin " << best_margin;
  if (best_fail != std::numeric_limits<int>::max()) os << ", fewest transversality failures " << best_fail;
  throw Error(ErrorCode::ExhaustedDraws, os.str());
}

DensityReport parametric_density_experiment(const DefMap& phi, const Stratification& sigma,
                                            const std::vector<Vec>& s_grid, const RegionSampler& sampler,
                                            const TransOptions& opts) {
  const int m = sampler.box.dim();
  const int p = phi.domain_dim() - m;
  if (p < 0) throw Error(ErrorCode::DimMismatch, "family has fewer variables than the sampler");
  const int n = phi.codomain_dim();
  DensityReport rep;
  rep.grid_size = static_cast<int>(s_grid.size());
  if (sigma.strata().empty()) return rep;

  const std::vector<Vec> xs = sampler.generate();
  const std::size_t s_step = std::max<std::size_t>(1, s_grid.size() / 8);
  const std::size_t x_step = std::max<std::size_t>(1, xs.size() / 8);
  for (std::size_t a = 0; a < s_grid.size(); a += s_step)
    for (std::size_t b = 0; b < xs.size(); b += x_step) {
      Vec z(m + p);
      z << xs[b], s_grid[a];
      ++rep.submersion_checks;
      if (numeric_rank(phi.jacobian(z)).rank < n) {
        std::ostringstream os;
        os << "family is not a submersion at (" << z.transpose() << ")";
        throw Error(ErrorCode::NotSubmersion, os.str());
      }
    }

  for (const auto& s : s_grid) {
    if (s.size() != p) throw Error(ErrorCode::DimMismatch, "parameter dimension mismatch");
    std::vector<Expr> repl;
    for (int i = 0; i < m; ++i) repl.push_back(Expr::var(i));
    for (int i = 0; i < p; ++i) repl.push_back(Expr(s(i)));
    std::vector<Expr> comps;
    for (const auto& c : phi.components()) comps.push_back(c.substitute(repl));
    const DefMap slice(m, std::move(comps));
    if (!is_transverse_on(slice, sigma, sampler, opts).transverse) {
      ++rep.failing;
      rep.failing_parameters.push_back(s);
    }
  }
  rep.fraction = s_grid.empty() ? 0.0 : static_cast<double>(rep.failing) / static_cast<double>(s_grid.size());
  return rep;
}

std::optional<std::size_t> stratum_containing(const Stratification& sigma, const Vec& y, double tol) {
  for (std::size_t i = 0; i < sigma.strata().size(); ++i) {
    try {
      if (membership(sigma.strata()[i], y, tol).member) return i;
    } catch (const Error&) {
    }
  }
  return std::nullopt;
}

PrescribedResult transverse_with_derivative(int m_dim, const Stratification& sigma, const Vec& p,
                                            const LinearSubspace& h, const PrescribedOptions& opts) {
  const int n = sigma.ambient_dim();
  if (p.size() != n || h.ambient_dim() != n) throw Error(ErrorCode::DimMismatch, "point or subspace dimension mismatch");
  const int k = h.dim();
  if (m_dim < k) throw Error(ErrorCode::HypothesisFailed, "domain dimension is smaller than dim H");
  const auto si = stratum_containing(sigma, p, opts.trans.membership_tol);
  if (!si) throw Error(ErrorCode::HypothesisFailed, "the point lies on no stratum");
  const Stratum& s = sigma.strata()[*si];
  const LinearSubspace tp = tangent_space(s, p, opts.trans.membership_tol);
  if (span_sum(h, tp).space.dim() != n)
    throw Error(ErrorCode::HypothesisFailed, "H + T_p S is not the whole space");

  PrescribedResult res;
  res.stratum = s.id();
  res.x0 = Vec::Zero(m_dim);
  res.frame = Mat(n, n);
  res.frame << h.basis(), h.orthogonal_complement().basis();

  RegionSampler sampler = opts.sampler;
  if (sampler.box.dim() == 0) {
    sampler.box = Box::cube(m_dim, -1.0, 1.0);
    sampler.points_per_dim = m_dim == 1 ? 21 : m_dim == 2 ? 9 : 5;
  }
  if (sampler.box.dim() != m_dim) throw Error(ErrorCode::DimMismatch, "sampler must live in R^M");

  std::vector<Expr> z;
  for (int i = 0; i < k; ++i) z.push_back(Expr::var(i));
  const Expr r2 = squared_norm(z);
  Rng rng(opts.seed);
  for (int draw = 1; draw <= opts.max_draws; ++draw) {
    std::vector<double> s_par(static_cast<std::size_t>(n - k));
    for (auto& v : s_par) v = rng.uniform_open();
    std::vector<Expr> psi = z;
    for (double v : s_par) psi.push_back(Expr(v) * r2);
    std::vector<Expr> comps;
    for (int i = 0; i < n; ++i) {
      std::vector<Expr> t{Expr(p(i))};
      for (int j = 0; j < n; ++j)
        if (res.frame(i, j) != 0.0) t.push_back(Expr(res.frame(i, j)) * psi[static_cast<std::size_t>(j)]);
      comps.push_back(Expr::sum(std::move(t)));
    }
    DefMap f(m_dim, std::move(comps));
    RegionReport rep = is_transverse_on(f, sigma, sampler, opts.trans);
    if (!rep.transverse) continue;
    if (is_transverse_at(f, s, res.x0, opts.trans).status != TransStatus::Transverse) continue;
    res.f = std::move(f);
    res.s = std::move(s_par);
    res.draws = draw;
    res.report = std::move(rep);
    const auto x0q = to_rational(as_span(res.x0));
    res.value_exact = res.f.evaluate_exact(x0q) == to_rational(as_span(p));
    res.image_gap = gap(LinearSubspace::span_of(res.f.jacobian(res.x0)), h);
    return res;
  }
  throw Error(ErrorCode::ExhaustedDraws, "no parameter made the prescribed map transverse on the samples");
}

}  // namespace dtrans
