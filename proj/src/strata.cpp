#include "dtrans/strata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace dtrans {

namespace {

Box sampling_cube(int n) { return Box::cube(n, -2.0, 2.0); }

Vec random_in_box(const Box& box, Rng& rng) {
  Vec p(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    double lo = box.lo[static_cast<std::size_t>(i)];
    double hi = box.hi[static_cast<std::size_t>(i)];
    if (!std::isfinite(lo)) lo = std::isfinite(hi) ? hi - 4.0 : -2.0;
    if (!std::isfinite(hi)) hi = lo + 4.0;
    p(i) = rng.uniform(lo, hi);
  }
  return p;
}

std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Box open_param_cube(const Box& params) {
  Box b = params;
  for (std::size_t i = 0; i < b.lo.size(); ++i) {
    if (!std::isfinite(b.lo[i])) b.lo[i] = std::isfinite(b.hi[i]) ? b.hi[i] - 4.0 : -2.0;
    if (!std::isfinite(b.hi[i])) b.hi[i] = b.lo[i] + 4.0;
  }
  return b;
}

bool strictly_inside(const Box& params, const Vec& u) {
  for (int i = 0; i < u.size(); ++i)
    if (!(u(i) > params.lo[static_cast<std::size_t>(i)] && u(i) < params.hi[static_cast<std::size_t>(i)])) return false;
  return true;
}

struct ChartSolve {
  Vec u;
  double distance = std::numeric_limits<double>::infinity();
};

ChartSolve nearest_chart_point(const ParamPatch& p, const Vec& x) {
  const int d = p.chart.domain_dim();
  const Box cube = open_param_cube(p.params);
  const int per = d == 1 ? 33 : d == 2 ? 9 : 5;
  ChartSolve best;
  // Coarse grid, then refine the best few starts.
  std::vector<std::pair<double, Vec>> starts;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (;;) {
    Vec u(d);
    for (int i = 0; i < d; ++i) {
      const auto s = static_cast<std::size_t>(i);
      u(i) = cube.lo[s] + (cube.hi[s] - cube.lo[s]) * (idx[s] + 0.5) / per;
    }
    try {
      starts.emplace_back((p.chart.evaluate(u) - x).norm(), u);
    } catch (const Error&) {
    }
    int k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] == per) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == d) break;
  }
  std::sort(starts.begin(), starts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (starts.size() > 4) starts.resize(4);
  for (const auto& [dist, u0] : starts) {
    auto f = [&](const Vec& u) { return Vec(p.chart.evaluate(u) - x); };
    auto j = [&](const Vec& u) { return p.chart.jacobian(u); };
    const SolveResult r = gauss_newton(f, j, u0, 1e-13, 100);
    double dist_r = std::numeric_limits<double>::infinity();
    try {
      dist_r = (p.chart.evaluate(r.z) - x).norm();
    } catch (const Error&) {
    }
    if (dist_r < best.distance) best = {r.z, dist_r};
  }
  return best;
}

}  // namespace

Stratum::Stratum(std::string id, int ambient_dim, int dim, ImplicitPatch patch, std::optional<Box> bounds)
    : id_(std::move(id)), ambient_dim_(ambient_dim), dim_(dim), implicit_(std::move(patch)), bounds_(std::move(bounds)) {
  if (ambient_dim_ <= 0) throw Error(ErrorCode::InvalidArgument, "ambient dimension must be positive");
  if (dim_ < 0 || dim_ > ambient_dim_)
    throw Error(ErrorCode::InvalidArgument, "stratum " + id_ + " has dimension outside [0, ambient]");
  for (const auto& e : implicit_.equations)
    if (e.arity() > ambient_dim_) throw Error(ErrorCode::DimMismatch, "stratum " + id_ + " uses too many variables");
  for (const auto& e : implicit_.inequalities)
    if (e.arity() > ambient_dim_) throw Error(ErrorCode::DimMismatch, "stratum " + id_ + " uses too many variables");
  if (bounds_ && bounds_->dim() != ambient_dim_) throw Error(ErrorCode::DimMismatch, "stratum bounds dimension");
  eq_map_ = DefMap(ambient_dim_, implicit_.equations);
}

Stratum::Stratum(std::string id, int dim, ParamPatch patch, std::optional<Box> bounds)
    : id_(std::move(id)), ambient_dim_(patch.chart.codomain_dim()), dim_(dim), param_(std::move(patch)),
      bounds_(std::move(bounds)) {
  if (param_->chart.domain_dim() != dim_)
    throw Error(ErrorCode::DimMismatch, "chart of stratum " + id_ + " must have domain dimension " + std::to_string(dim_));
  if (param_->params.dim() != dim_) throw Error(ErrorCode::DimMismatch, "parameter box dimension");
  eq_map_ = DefMap(ambient_dim_, {});
}

bool Stratum::is_polynomial() const {
  if (!is_implicit()) return param_->chart.is_polynomial();
  for (const auto& e : implicit_.equations)
    if (!e.is_polynomial()) return false;
  for (const auto& e : implicit_.inequalities)
    if (!e.is_polynomial()) return false;
  return true;
}

Membership membership(const Stratum& s, const Vec& x, double tol) {
  if (x.size() != s.ambient_dim()) throw Error(ErrorCode::DimMismatch, "point dimension != ambient dimension");
  Membership m;
  m.inequality_min = std::numeric_limits<double>::infinity();
  if (s.is_implicit()) {
    for (const auto& e : s.implicit().equations) m.residual = std::max(m.residual, std::abs(e.evaluate(as_span(x))));
    for (const auto& g : s.implicit().inequalities) m.inequality_min = std::min(m.inequality_min, g.evaluate(as_span(x)));
    m.member = m.residual <= tol && m.inequality_min > 0.0;
    return m;
  }
  const ChartSolve c = nearest_chart_point(s.parametric(), x);
  m.residual = c.distance;
  m.parameter = c.u;
  m.member = c.distance <= tol && strictly_inside(s.parametric().params, c.u);
  return m;
}

namespace {

// Kernel of the equation Jacobian, or RankDefect.
LinearSubspace implicit_tangent(const Stratum& s, const Vec& x) {
  const int n = s.ambient_dim();
  if (s.implicit().equations.empty()) {
    if (s.dim() != n) throw Error(ErrorCode::RankDefect, "stratum " + s.id() + " has no equations but dim < ambient");
    return LinearSubspace::whole(n);
  }
  const Mat j = s.equation_map().jacobian(x);
  const RankInfo info = numeric_rank(j);
  if (info.rank != s.codim())
    throw Error(ErrorCode::RankDefect, "equation Jacobian of stratum " + s.id() + " has rank " +
                                           std::to_string(info.rank) + ", expected " + std::to_string(s.codim()));
  if (s.dim() == 0) return LinearSubspace::zero(n);
  Eigen::JacobiSVD<Mat> svd(j, Eigen::ComputeFullV);
  return LinearSubspace(n, svd.matrixV().rightCols(s.dim()));
}

LinearSubspace param_tangent(const Stratum& s, const Vec& u) {
  const Mat j = s.parametric().chart.jacobian(u);
  const RankInfo info = numeric_rank(j);
  if (info.rank != s.dim())
    throw Error(ErrorCode::RankDefect, "chart of stratum " + s.id() + " is not immersive at the point");
  return LinearSubspace::span_of(j);
}

}  // namespace

LinearSubspace tangent_space(const Stratum& s, const Vec& x, double tol) {
  const Membership m = membership(s, x, tol);
  if (!m.member) throw Error(ErrorCode::NotOnStratum, "point is not on stratum " + s.id());
  if (s.is_implicit()) return implicit_tangent(s, x);
  return param_tangent(s, *m.parameter);
}

int exact_equation_rank(const Stratum& s, std::span<const Rational> x) {
  if (!s.is_implicit() || !s.is_polynomial())
    throw Error(ErrorCode::NotPolynomial, "exact rank needs polynomial implicit equations");
  if (s.implicit().equations.empty()) return 0;
  return exact_rank(s.equation_map().jacobian_exact(x));
}

SolveResult project_to_equations(const Stratum& s, const Vec& x, double tol, int max_iter) {
  if (s.is_implicit()) {
    if (s.implicit().equations.empty()) return SolveResult{x, 0.0, 0, true};
    const DefMap& e = s.equation_map();
    return gauss_newton([&](const Vec& z) { return e.evaluate(z); }, [&](const Vec& z) { return e.jacobian(z); }, x,
                        tol, max_iter);
  }
  const ChartSolve c = nearest_chart_point(s.parametric(), x);
  SolveResult r;
  r.z = s.parametric().chart.evaluate(c.u);
  r.residual = 0.0;
  r.converged = true;
  return r;
}

namespace {

struct SampleStats {
  std::vector<Vec> points;
  int members = 0;
  int certified = 0;
};

bool certified_at(const Stratum& s, const Vec& x) {
  try {
    (void)tangent_space(s, x);
    return true;
  } catch (const Error&) {
    return false;
  }
}

SampleStats sample_with_stats(const Stratum& s, int count, Rng& rng, const Box& box) {
  SampleStats st;
  const int attempts = 20 * count + 50;
  for (int a = 0; a < attempts && static_cast<int>(st.points.size()) < count; ++a) {
    Vec p;
    try {
      if (s.is_implicit()) {
        const SolveResult r = project_to_equations(s, random_in_box(box, rng));
        if (!r.converged) continue;
        p = r.z;
      } else {
        const Box cube = open_param_cube(s.parametric().params);
        p = s.parametric().chart.evaluate(random_in_box(cube, rng));
      }
      if (!box.contains(as_span(p), 1e-12)) continue;
      if (!membership(s, p).member) continue;
    } catch (const Error&) {
      continue;
    }
    bool dup = false;
    for (const auto& q : st.points)
      if ((q - p).norm() < 1e-6) dup = true;
    if (dup) continue;
    ++st.members;
    if (!certified_at(s, p)) continue;
    ++st.certified;
    st.points.push_back(p);
  }
  return st;
}

}  // namespace

std::vector<Vec> sample_stratum(const Stratum& s, int count, Rng& rng, const std::optional<Box>& box) {
  const Box b = box ? *box : s.bounds() ? *s.bounds() : sampling_cube(s.ambient_dim());
  return sample_with_stats(s, count, rng, b).points;
}

Stratification::Stratification(int ambient_dim, std::vector<Stratum> strata,
                               std::vector<std::pair<std::string, std::string>> adjacency, std::optional<Box> bounds)
    : ambient_dim_(ambient_dim), strata_(std::move(strata)), adjacency_(std::move(adjacency)), bounds_(std::move(bounds)) {
  for (std::size_t i = 0; i < strata_.size(); ++i) {
    if (strata_[i].ambient_dim() != ambient_dim_)
      throw Error(ErrorCode::AmbientMismatch, "stratum " + strata_[i].id() + " lives in the wrong ambient space");
    for (std::size_t j = 0; j < i; ++j)
      if (strata_[j].id() == strata_[i].id()) throw Error(ErrorCode::InvalidArgument, "duplicate stratum id " + strata_[i].id());
  }
  for (const auto& [x, y] : adjacency_)
    if (!has(x) || !has(y)) throw Error(ErrorCode::InvalidArgument, "adjacency refers to unknown stratum " + (has(x) ? y : x));
  if (bounds_ && bounds_->dim() != ambient_dim_) throw Error(ErrorCode::DimMismatch, "stratification bounds dimension");
}

const Stratum& Stratification::find(const std::string& id) const {
  for (const auto& s : strata_)
    if (s.id() == id) return s;
  throw Error(ErrorCode::InvalidArgument, "unknown stratum " + id);
}

bool Stratification::has(const std::string& id) const {
  return std::any_of(strata_.begin(), strata_.end(), [&](const Stratum& s) { return s.id() == id; });
}

std::optional<Box> Stratification::sampling_box(const Stratum& s) const {
  if (s.bounds()) return s.bounds();
  return bounds_;
}

ValidationReport validate_stratification(const Stratification& sigma, int probe_budget, Rng& rng) {
  ValidationReport rep;
  std::vector<std::vector<Vec>> samples;
  for (const auto& s : sigma.strata()) {
    const auto b = sigma.sampling_box(s);
    const SampleStats st = sample_with_stats(s, probe_budget, rng, b ? *b : sampling_cube(sigma.ambient_dim()));
    rep.strata.push_back({s.id(), st.members, st.certified});
    if (st.members == 0) rep.problems.push_back("no sample points found on stratum " + s.id());
    else if (st.certified != st.members) rep.problems.push_back("manifold certificate fails on stratum " + s.id());
    samples.push_back(st.points);
  }

  const auto& strata = sigma.strata();
  for (std::size_t a = 0; a < strata.size(); ++a) {
    for (std::size_t b = 0; b < strata.size(); ++b) {
      if (a == b) continue;
      for (const auto& p : samples[a]) {
        bool inside = false;
        try {
          inside = membership(strata[b], p).member;
        } catch (const Error&) {
        }
        if (inside) {
          if (a < b) rep.disjointness.push_back({strata[a].id(), strata[b].id(), p});
          else rep.disjointness.push_back({strata[b].id(), strata[a].id(), p});
          break;
        }
      }
    }
  }
  // Keep one witness per unordered pair.
  std::vector<DisjointnessViolation> uniq;
  for (auto& v : rep.disjointness) {
    bool seen = false;
    for (const auto& u : uniq)
      if (u.first == v.first && u.second == v.second) seen = true;
    if (!seen) uniq.push_back(std::move(v));
  }
  rep.disjointness = std::move(uniq);

  for (const auto& [xid, yid] : sigma.adjacency()) {
    const Stratum& x = sigma.find(xid);
    std::size_t yi = 0;
    while (strata[yi].id() != yid) ++yi;
    const int bases = std::min<int>(5, static_cast<int>(samples[yi].size()));
    if (bases == 0) rep.problems.push_back("no base points to probe the frontier of " + yid);
    for (int bidx = 0; bidx < bases; ++bidx) {
      const Vec& y = samples[yi][static_cast<std::size_t>(bidx)];
      FrontierProbe fp{xid, yid, y, std::numeric_limits<double>::infinity(), false};
      for (int dir = 0; dir < 12 && !fp.passed; ++dir) {
        const Vec v = rng.unit_vector(sigma.ambient_dim());
        for (int j = 3; j <= 24 && !fp.passed; ++j) {
          const Vec w = y + std::ldexp(1.0, -j) * v;
          try {
            const SolveResult r = project_to_equations(x, w);
            if (!r.converged || !membership(x, r.z).member) continue;
            fp.best_distance = std::min(fp.best_distance, (r.z - y).norm());
            if (fp.best_distance <= kFrontierTol) fp.passed = true;
          } catch (const Error&) {
          }
        }
      }
      if (!fp.passed) rep.problems.push_back("frontier condition not observed for (" + xid + ", " + yid + ")");
      rep.frontier.push_back(std::move(fp));
    }
  }
  rep.valid = rep.problems.empty() && rep.disjointness.empty();
  if (!rep.disjointness.empty()) rep.problems.push_back("strata overlap");
  return rep;
}

Stratification pullback_stratification(const Stratification& sigma, const DefMap& pi, Rng& rng,
                                       const std::optional<Box>& bounds, int samples) {
  if (pi.codomain_dim() != sigma.ambient_dim())
    throw Error(ErrorCode::DimMismatch, "submersion target dimension differs from the stratification ambient");
  const int p = pi.domain_dim();
  const int n = sigma.ambient_dim();
  std::vector<Stratum> out;
  for (const auto& s : sigma.strata()) {
    if (!s.is_implicit()) throw Error(ErrorCode::InvalidArgument, "pullback needs implicit strata");
    ImplicitPatch patch;
    for (const auto& e : s.implicit().equations) patch.equations.push_back(e.substitute(pi.components()));
    for (const auto& g : s.implicit().inequalities) patch.inequalities.push_back(g.substitute(pi.components()));
    Stratum t(s.id(), p, s.dim() + p - n, std::move(patch), bounds);
    for (const auto& x : sample_stratum(t, samples, rng, bounds)) {
      const RankInfo r = numeric_rank(pi.jacobian(x));
      if (r.rank < n) {
        std::string where;
        for (long i = 0; i < x.size(); ++i) where += (i ? ", " : "") + std::to_string(x(i));
        throw Error(ErrorCode::NotSubmersion, "map is not a submersion at (" + where + ")");
      }
    }
    out.push_back(std::move(t));
  }
  return Stratification(p, std::move(out), sigma.adjacency(), bounds);
}

}  // namespace dtrans
