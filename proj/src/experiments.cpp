#include "dtrans/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtrans/jets.hpp"

namespace dtrans {

EscapeResult escape_experiment(const std::vector<double>& coeffs) {
  std::vector<long double> a(coeffs.begin(), coeffs.end());
  while (!a.empty() && a.back() == 0.0L) a.pop_back();
  if (a.empty()) throw Error(ErrorCode::ZeroPolynomial, "the zero polynomial never escapes");
  for (double c : coeffs)
    if (!std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "coefficients must be finite");
  auto log_abs = [&](long double x) {
    long double v = 0.0L;
    for (std::size_t i = a.size(); i-- > 0;) v = v * x + a[i];
    return std::log(std::fabs(v));
  };

  EscapeResult r;
  // Constants start the ladder at 0, everything else at the Cauchy bound.
  long double x = 1.0L;
  if (a.size() == 1) {
    if (std::fabs(a.front()) >= 1.0L) {
      r.certificate = std::log(std::fabs(a.front()));
      return r;
    }
  } else {
    long double bound = 0.0L;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) bound = std::max(bound, std::fabs(a[i] / a.back()));
    x = 1.0L + bound;
  }
  r.start = static_cast<double>(x);
  for (; r.doublings < 4000; ++r.doublings, x *= 2.0L) {
    const long double c = log_abs(x) + x;
    if (c >= 0.0L) {
      r.x_star = static_cast<double>(x);
      r.certificate = c;
      return r;
    }
  }
  throw Error(ErrorCode::NoConvergence, "doubling search did not escape");
}

namespace {

double max_jet_distance(const DefMap& a, const DefMap& b, const std::vector<Vec>& samples, int k) {
  double d = 0.0;
  for (const auto& x : samples) d = std::max(d, jet_distance(compute_jet(a, x, k), compute_jet(b, x, k)));
  return d;
}

}  // namespace

D0Result d0_convergence_experiment(const std::vector<Expr>& catalog, int i_max, const std::vector<double>& samples) {
  for (double s : samples)
    if (!(std::fabs(s) > 1.0)) throw Error(ErrorCode::InvalidArgument, "samples must satisfy |x| > 1");
  const Expr x = Expr::var(0);
  const DefMap f(1, {x, Expr(0)});
  const Vec ten = Vec::Constant(1, 10.0);
  D0Result res;
  res.passed = true;
  for (const auto& eps : catalog) {
    D0Entry e;
    e.epsilon = to_string(eps);
    bool differs = true;
    for (int i = 1; i <= i_max && !e.i0; ++i) {
      const DefMap fi(1, {x, recip(pow(x, 2 * i))});
      if (fi.evaluate(ten) == f.evaluate(ten)) differs = false;
      bool inside = true;
      for (double s : samples) {
        const Vec p = Vec::Constant(1, s);
        const double d = jet_distance(compute_jet(fi, p, 0), compute_jet(f, p, 0));
        if (!(d < eps.evaluate(std::span<const double>(&s, 1)))) inside = false;
      }
      if (inside) e.i0 = i;
    }
    e.differs_at_10 = differs;
    if (!e.i0 || !e.differs_at_10) res.passed = false;
    res.entries.push_back(std::move(e));
  }
  return res;
}

OpennessResult openness_experiment(const Stratification& sigma, const DefMap& f, const RegionSampler& sampler,
                                   const OpennessOptions& opts) {
  OpennessResult res;
  if (opts.require_regular) {
    res.regularity = whitney_a_stratification(sigma, opts.regularity, opts.pinned).status;
    if (res.regularity != RegStatus::Regular)
      throw Error(ErrorCode::HypothesisFailed,
                  "stratification is classified " + std::string(to_string(res.regularity)) + ", not Regular");
  } else {
    res.regularity = RegStatus::Inconclusive;
  }
  if (!is_transverse_on(f, sigma, sampler).transverse)
    throw Error(ErrorCode::HypothesisFailed, "the base map is not transverse on the samples");

  const int m = f.domain_dim();
  const auto samples = sampler.generate();
  const auto monos = multi_indices(m, opts.degree);
  std::vector<double> adv_dist;
  for (const auto& g : opts.adversarial) adv_dist.push_back(max_jet_distance(g, f, samples, 1));

  Rng rng(opts.seed);
  for (double delta : opts.deltas) {
    OpennessLevel lv;
    lv.delta = delta;
    lv.min_margin = std::numeric_limits<double>::infinity();
    auto test = [&](const DefMap& g) {
      const RegionReport rep = is_transverse_on(g, sigma, sampler);
      ++lv.tested;
      if (rep.transverse) ++lv.transverse;
      for (const auto& s : rep.strata)
        if (s.transverse > 0) lv.min_margin = std::min(lv.min_margin, s.min_margin);
    };
    for (int t = 0; t < opts.trials; ++t) {
      std::vector<std::vector<double>> c(static_cast<std::size_t>(f.codomain_dim()));
      for (auto& row : c)
        for (std::size_t a = 0; a < monos.size(); ++a) row.push_back(rng.normal());
      auto build = [&](double scale) {
        std::vector<Expr> comps;
        for (int i = 0; i < f.codomain_dim(); ++i) {
          std::vector<Expr> terms{f.component(i)};
          for (std::size_t a = 0; a < monos.size(); ++a)
            terms.push_back(Expr(scale * c[static_cast<std::size_t>(i)][a]) * monomial(monos[a]));
          comps.push_back(Expr::sum(std::move(terms)));
        }
        return DefMap(m, std::move(comps), f.domain());
      };
      const double d = max_jet_distance(build(1.0), f, samples, 1);
      if (!(d > 0.0)) continue;
      test(build(0.9 * delta / d));
    }
    for (std::size_t a = 0; a < opts.adversarial.size(); ++a)
      if (adv_dist[a] < delta) test(opts.adversarial[a]);
    if (!std::isfinite(lv.min_margin)) lv.min_margin = 0.0;
    res.levels.push_back(lv);
  }

  std::vector<OpennessLevel> sorted = res.levels;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.delta < b.delta; });
  for (const auto& lv : sorted) {
    if (lv.tested == 0 || lv.transverse != lv.tested) break;
    res.stability_radius = lv.delta;
  }
  return res;
}

LinearSubspace trotman_complement(const LinearSubspace& t, const LinearSubspace& tau) {
  const int n = t.ambient_dim();
  if (tau.ambient_dim() != n) throw Error(ErrorCode::AmbientMismatch, "T and tau live in different spaces");
  // Direction of T farthest from tau.
  const Mat resid = (Mat::Identity(n, n) - tau.projector()) * t.basis();
  if (resid.cols() == 0) throw Error(ErrorCode::HypothesisFailed, "T is zero; no complement avoids tau");
  Eigen::JacobiSVD<Mat> svd(resid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(0) <= 1e-12) throw Error(ErrorCode::HypothesisFailed, "T is contained in tau");
  const Vec nu = svd.matrixU().col(0);
  // P = nu^perp contains tau but not all of T.
  const LinearSubspace p = LinearSubspace::span_of(nu).orthogonal_complement();
  const LinearSubspace pt =
      span_sum(p.orthogonal_complement(), t.orthogonal_complement()).space.orthogonal_complement();
  // H = complement of P cap T inside P.
  Mat proj = p.projector() - pt.projector();
  return LinearSubspace::span_of(proj, 1e-8);
}

namespace {

LinearSubspace intersect(const LinearSubspace& a, const LinearSubspace& b) {
  return span_sum(a.orthogonal_complement(), b.orthogonal_complement()).space.orthogonal_complement();
}

// Orthonormal basis of the part of a orthogonal to b (b inside a).
Mat relative_complement(const LinearSubspace& a, const LinearSubspace& b) {
  const int n = a.ambient_dim();
  if (a.dim() == b.dim()) return Mat(n, 0);
  return LinearSubspace::span_of(a.projector() - b.projector()).basis();
}

}  // namespace

TrotmanResult trotman_experiment(const Stratification& sigma, const TrotmanOptions& opts) {
  RegularityOptions ro = opts.regularity;
  ro.seed = opts.seed;
  const RegularityReport reg = whitney_a_stratification(sigma, ro, opts.pinned);
  const RegularityVerdict* fault = nullptr;
  const ProbeOutcome* probe = nullptr;
  for (const auto& pr : reg.pairs)
    for (const auto& v : pr.verdicts) {
      if (fault || v.status != RegStatus::Fault) continue;
      fault = &v;
      probe = &v.probes[*v.witness];
      // An explicit faulting curve is the preferred witness.
      for (const auto& o : v.probes)
        if (o.explicit_curve && o.valid && o.converged && o.deviation > ro.fault_threshold) {
          probe = &o;
          break;
        }
    }
  if (!fault) throw Error(ErrorCode::HypothesisFailed, "no Whitney (a) fault was detected");
  if (static_cast<int>(probe->points.size()) < opts.steps)
    throw Error(ErrorCode::InvalidArgument, "witness probe is shorter than the requested number of steps");

  TrotmanResult res;
  res.x = fault->x;
  res.y = fault->y_id;
  res.point = fault->y;
  res.deviation = probe->deviation;
  res.tau = *probe->limit;
  const Stratum& xs = sigma.find(res.x);
  const Stratum& ys = sigma.find(res.y);
  const int n = sigma.ambient_dim();
  const LinearSubspace ty = tangent_space(ys, res.point);
  res.h = trotman_complement(ty, res.tau);

  PrescribedOptions po;
  po.seed = opts.seed;
  po.sampler = opts.sampler;
  res.base = transverse_with_derivative(opts.m_dim, sigma, res.point, res.h, po);
  res.base_transverse = res.base.report.transverse;
  const DefMap& f = res.base.f;

  // Reference basis [H' | H cap tau | tau' | rest]; the tau block is C and T'.
  const LinearSubspace c = intersect(res.h, res.tau);
  const Mat hp = relative_complement(res.h, c);
  const Mat tp = relative_complement(res.tau, c);
  const LinearSubspace ht = span_sum(res.h, res.tau).space;
  const Mat rest = ht.orthogonal_complement().basis();
  Mat v(n, n);
  v << hp, c.basis(), tp, rest;
  std::vector<bool> in_tau(static_cast<std::size_t>(n), false);
  for (long j = hp.cols(); j < hp.cols() + c.dim() + tp.cols(); ++j) in_tau[static_cast<std::size_t>(j)] = true;
  const Mat v_inv = v.inverse();

  RegionSampler sampler = opts.sampler;
  if (sampler.box.dim() == 0) {
    sampler.box = Box::cube(opts.m_dim, -1.0, 1.0);
    sampler.points_per_dim = opts.m_dim == 1 ? 21 : opts.m_dim == 2 ? 9 : 5;
  }
  const auto samples = sampler.generate();
  const Vec x0 = res.base.x0;
  const Expr lambda = bump(std::vector<double>(static_cast<std::size_t>(opts.m_dim), 0.0), opts.bump_inner,
                           opts.bump_outer);

  res.fact_a = res.fact_b = res.fact_c = true;
  for (int i = 1; i <= opts.steps; ++i) {
    TrotmanStep st;
    st.i = i;
    st.x_i = probe->points[static_cast<std::size_t>(i - 1)];
    const LinearSubspace ti = tangent_space(xs, st.x_i);
    const Mat pt = ti.projector();
    Mat vi(n, n);
    for (int j = 0; j < n; ++j)
      vi.col(j) = in_tau[static_cast<std::size_t>(j)] ? Vec(pt * v.col(j)) : Vec(v.col(j) - pt * v.col(j));
    const Mat a = vi * v_inv;
    const LinearSubspace hi = res.h.image(a);

    std::vector<Expr> comps;
    for (int r = 0; r < n; ++r) {
      std::vector<Expr> fi{Expr(st.x_i(r))};
      for (int q = 0; q < n; ++q)
        if (a(r, q) != 0.0) fi.push_back(Expr(a(r, q)) * (f.component(q) - Expr(res.point(q))));
      comps.push_back(f.component(r) + lambda * (Expr::sum(std::move(fi)) - f.component(r)));
    }
    DefMap g(opts.m_dim, std::move(comps));
    st.value_gap = (g.evaluate(x0) - st.x_i).norm();
    st.image_gap = gap(LinearSubspace::span_of(g.jacobian(x0)), hi);
    const TransversalityVerdict tv = is_transverse_at(g, xs, x0);
    st.status = tv.status;
    st.sigma_min = tv.witness;
    st.jet_distance = max_jet_distance(g, f, samples, 1);
    if (!(st.value_gap <= 1e-10 && st.image_gap <= 1e-8)) res.fact_a = false;
    if (!(st.status == TransStatus::Fail && st.sigma_min < 1e-8)) res.fact_b = false;
    if (!res.steps.empty() && !(st.jet_distance < res.steps.back().jet_distance * 1.01)) res.fact_c = false;
    res.steps.push_back(std::move(st));
    res.g.push_back(std::move(g));
  }
  if (res.steps.size() >= 2 && !(res.steps.back().jet_distance < res.steps.front().jet_distance)) res.fact_c = false;
  res.passed = res.base_transverse && res.fact_a && res.fact_b && res.fact_c;
  return res;
}

DensityResult density_experiment(const DefMap& phi, const Stratification& sigma, const Box& s_box,
                                 const RegionSampler& sampler, int n0, int levels, double min_ratio) {
  if (n0 < 2 || levels < 1) throw Error(ErrorCode::InvalidArgument, "need n0 >= 2 and at least one level");
  DensityResult res;
  for (int l = 0; l < levels; ++l) {
    DensityLevel lv;
    lv.points_per_axis = (n0 - 1) * (1 << l) + 1;
    lv.report = parametric_density_experiment(phi, sigma, certification_grid(s_box, lv.points_per_axis, 0.0), sampler);
    res.levels.push_back(std::move(lv));
  }
  res.passed = true;
  for (std::size_t l = 0; l + 1 < res.levels.size(); ++l) {
    const double a = res.levels[l].report.fraction, b = res.levels[l + 1].report.fraction;
    const double ratio = b > 0.0 ? a / b : std::numeric_limits<double>::infinity();
    res.ratios.push_back(ratio);
    if (!(a > 0.0) || !(ratio >= min_ratio)) res.passed = false;
  }
  return res;
}

}  // namespace dtrans
