#include "dtrans/tubular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtrans {

namespace {

std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

DefMap hessian_map(const Stratum& m) {
  const int n = m.ambient_dim();
  std::vector<Expr> h;
  if (m.is_implicit())
    for (const auto& e : m.implicit().equations)
      for (int a = 0; a < n; ++a) {
        const Expr da = e.derivative(a);
        for (int b = 0; b < n; ++b) h.push_back(da.derivative(b));
      }
  return DefMap(n, std::move(h));
}

}  // namespace

LinearSubspace normal_space(const Stratum& m, const Vec& x, double tol) {
  return tangent_space(m, x, tol).orthogonal_complement();
}

TubularNeighborhood::TubularNeighborhood(Stratum m, Expr radius, Rng& rng, std::optional<Box> box, TubeOptions opts)
    : m_(std::move(m)), radius_(std::move(radius)), opts_(opts), hessians_(hessian_map(m_)) {
  cloud_ = sample_stratum(m_, opts_.cloud_size, rng, box);
  if (cloud_.empty()) throw Error(ErrorCode::CertificationFailure, "no points found on " + m_.id());
}

TubularNeighborhood TubularNeighborhood::with_radius(Expr radius) const {
  TubularNeighborhood t = *this;
  t.radius_ = std::move(radius);
  return t;
}

std::optional<TubularNeighborhood::Result> TubularNeighborhood::solve_from(const Vec& w, const Vec& start) const {
  const int n = m_.ambient_dim();
  Result res;
  if (!m_.is_implicit()) {
    const Membership mem = membership(m_, w, std::numeric_limits<double>::infinity());
    if (!mem.parameter) return std::nullopt;
    res.x = m_.parametric().chart.evaluate(*mem.parameter);
  } else if (m_.implicit().equations.empty()) {
    res.x = w;
  } else {
    const DefMap& e = m_.equation_map();
    const int q = e.codomain_dim();
    const Mat j0 = e.jacobian(start);
    Vec z(n + q);
    z.head(n) = start;
    z.tail(q) = (j0 * j0.transpose()).completeOrthogonalDecomposition().solve(-j0 * (start - w));
    auto f = [&](const Vec& v) {
      const Vec x = v.head(n);
      const Vec mu = v.tail(q);
      Vec r(n + q);
      r.head(n) = x - w + e.jacobian(x).transpose() * mu;
      r.tail(q) = e.evaluate(x);
      return r;
    };
    auto jac = [&](const Vec& v) {
      const Vec x = v.head(n);
      const Vec mu = v.tail(q);
      const Mat j = e.jacobian(x);
      const Vec h = hessians_.evaluate(x);
      Mat k = Mat::Zero(n + q, n + q);
      k.topLeftCorner(n, n).setIdentity();
      for (int i = 0; i < q; ++i)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) k(a, b) += mu(i) * h(i * n * n + a * n + b);
      k.topRightCorner(n, q) = j.transpose();
      k.bottomLeftCorner(q, n) = j;
      return k;
    };
    SolveResult r;
    try {
      r = gauss_newton(f, jac, z, opts_.tol, opts_.max_iter);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!r.converged) return std::nullopt;
    res.x = r.z.head(n);
    res.iterations = r.iterations;
  }
  try {
    const Membership mem = membership(m_, res.x);
    if (!mem.member) return std::nullopt;
    const LinearSubspace t = tangent_space(m_, res.x);
    const Vec v = w - res.x;
    res.orthogonality = t.project(v).norm() / std::max(1.0, v.norm());
  } catch (const Error&) {
    return std::nullopt;
  }
  if (res.orthogonality > 1e-8) return std::nullopt;
  return res;
}

TubularNeighborhood::Result TubularNeighborhood::retract(const Vec& w) const {
  if (w.size() != m_.ambient_dim()) throw Error(ErrorCode::DimMismatch, "point dimension != ambient dimension");
  std::vector<std::size_t> order(cloud_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = (cloud_[a] - w).squaredNorm(), db = (cloud_[b] - w).squaredNorm();
    return da != db ? da < db : a < b;
  });

  // Starts: the nearest cloud point plus a few more spread-out ones, so that a
  // second sheet within the tube radius is noticed.
  std::vector<Vec> starts;
  for (std::size_t i : order) {
    const Vec& c = cloud_[i];
    bool far_enough = true;
    for (const auto& s : starts)
      if ((s - c).norm() < 0.25 * (c - w).norm()) far_enough = false;
    if (far_enough) starts.push_back(c);
    if (starts.size() == 4) break;
  }

  std::vector<Result> inside;
  for (const auto& s : starts) {
    auto r = solve_from(w, s);
    if (!r) continue;
    double rad = 0.0;
    try {
      rad = radius_.evaluate(as_span(r->x));
    } catch (const Error&) {
      continue;
    }
    if (!((w - r->x).norm() < rad)) continue;
    bool dup = false;
    for (const auto& q : inside)
      if ((q.x - r->x).norm() <= 1e-7 * std::max(1.0, q.x.norm())) dup = true;
    if (!dup) inside.push_back(*r);
  }
  if (inside.empty()) throw Error(ErrorCode::NoConvergence, "retraction did not reach a foot point inside the tube");
  if (inside.size() > 1) throw Error(ErrorCode::NoConvergence, "point is within the tube radius of two sheets");
  return inside.front();
}

RadiusEstimate estimate_radius(const Stratum& m, int sample_budget, Rng& rng, std::optional<Box> box) {
  const std::vector<Vec> samples = sample_stratum(m, sample_budget, rng, box);
  if (samples.empty()) throw Error(ErrorCode::CertificationFailure, "no points found on " + m.id());
  std::vector<Expr> coords;
  for (int i = 0; i < m.ambient_dim(); ++i) coords.push_back(Expr::var(i));
  const Expr envelope = Expr(1) + squared_norm(coords);

  // Normal directions per sample, drawn once so every candidate sees the same probes.
  const int dirs = 3;
  std::vector<std::vector<Vec>> normals;
  for (const auto& x : samples) {
    const LinearSubspace nsp = normal_space(m, x);
    std::vector<Vec> ns;
    for (int d = 0; d < dirs && nsp.dim() > 0; ++d) {
      Vec c = rng.unit_vector(nsp.dim());
      ns.push_back(nsp.basis() * c);
    }
    normals.push_back(std::move(ns));
  }
  const double fractions[] = {0.25, 0.5, 0.75, 0.95};
  const TubularNeighborhood base(m, Expr(1), rng, box);

  for (int e = 0; e <= 12; ++e) {
    const Rational c(mpz_class(1), mpz_class(1) << static_cast<unsigned>(e));
    for (int power = 0; power <= 2; ++power) {
      const Expr rad = power == 0 ? Expr(c) : Expr(c) * recip(pow(envelope, power));
      const TubularNeighborhood tube = base.with_radius(rad);
      bool ok = true;
      int probes = 0;
      for (std::size_t s = 0; s < samples.size() && ok; ++s) {
        const Vec& x = samples[s];
        const double r = rad.evaluate(as_span(x));
        for (const auto& n : normals[s]) {
          for (double t : fractions) {
            ++probes;
            try {
              const auto res = tube.retract(x + t * r * n);
              if ((res.x - x).norm() > 1e-7 * std::max(1.0, x.norm())) ok = false;
            } catch (const Error&) {
              ok = false;
            }
            if (!ok) break;
          }
          if (!ok) break;
        }
      }
      if (ok) return RadiusEstimate{rad, power == 0 ? "constant" : "inverse_power", c.get_d(), power, probes, samples};
    }
  }
  throw Error(ErrorCode::CertificationFailure, "no radius candidate passed the retraction probes");
}

}  // namespace dtrans
