#include "dtrans/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtrans {

int grid_points_for(const GridOptions& opts, int dim) {
  const auto& p = opts.points_per_dim;
  if (p.size() < 2) return 101;
  return p[std::min<std::size_t>(static_cast<std::size_t>(dim), p.size() - 1)];
}

std::vector<Vec> certification_grid(const Box& region, int points_per_dim, double truncation) {
  const int n = region.dim();
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double lo = region.lo[static_cast<std::size_t>(i)];
    double hi = region.hi[static_cast<std::size_t>(i)];
    if (!std::isfinite(lo)) lo = std::isfinite(hi) ? std::min(hi, 0.0) - truncation : -truncation;
    if (!std::isfinite(hi)) hi = std::max(lo, 0.0) + truncation;
    auto& ax = axes[static_cast<std::size_t>(i)];
    if (points_per_dim <= 1 || lo == hi) {
      ax.push_back(0.5 * (lo + hi));
      continue;
    }
    for (int j = 0; j < points_per_dim; ++j) ax.push_back(lo + (hi - lo) * j / (points_per_dim - 1));
  }
  std::vector<Vec> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  for (;;) {
    Vec p(n);
    for (int i = 0; i < n; ++i) p(i) = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    out.push_back(p);
    int d = 0;
    while (d < n) {
      auto& k = idx[static_cast<std::size_t>(d)];
      if (++k < axes[static_cast<std::size_t>(d)].size()) break;
      k = 0;
      ++d;
    }
    if (d == n) break;
  }
  return out;
}

namespace {

// Largest two-significant-digit decimal not above v (v > 0).
Rational round_down_decimal(double v) {
  const int e = static_cast<int>(std::floor(std::log10(v))) - 1;
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(std::abs(e)));
  const Rational unit = e < 0 ? Rational(mpz_class(1), p) : Rational(p);
  Rational q = Rational(v) / unit;
  mpz_class f;
  mpz_fdiv_q(f.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  if (f <= 0) return Rational(v);
  Rational r = Rational(f) * unit;
  r.canonicalize();
  return r;
}

bool on_outer_shell(const Vec& x, const Box& region, double truncation) {
  for (int i = 0; i < x.size(); ++i) {
    const auto s = static_cast<std::size_t>(i);
    if (!std::isfinite(region.hi[s]) && x(i) >= 0.9 * truncation) return true;
    if (!std::isfinite(region.lo[s]) && x(i) <= -0.9 * truncation) return true;
  }
  return false;
}

double max_abs_partials(const Mat& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

MinorantResult positive_minorant(const Expr& eps, int k, const Box& region, const GridOptions& opts) {
  const int m = region.dim();
  if (m <= 0) throw Error(ErrorCode::InvalidArgument, "region must have positive dimension");
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "derivative order must be non-negative");
  const auto grid = certification_grid(region, grid_points_for(opts, m), opts.truncation);
  std::vector<double> eps_vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    eps_vals[i] = eps.evaluate(std::span<const double>(grid[i].data(), static_cast<std::size_t>(m)));
    if (!(eps_vals[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon is not positive on the region");
  }
  const bool truncated = !region.bounded();

  std::vector<Expr> coords;
  for (int i = 0; i < m; ++i) coords.push_back(Expr::var(i));
  const Expr r2 = squared_norm(coords);
  const std::vector<std::pair<std::string, Expr>> family = {
      {"constant", Expr(1)},
      {"inverse_square_power", recip(pow(Expr(1) + r2, 2))},
      {"gaussian", exp(-r2)},
  };

  for (const auto& [name, base] : family) {
    const DerivativeTable table(DefMap(m, {base}), k);
    double core_min = std::numeric_limits<double>::infinity();
    double shell_min = std::numeric_limits<double>::infinity();
    std::vector<double> bound(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      bound[i] = max_abs_partials(table.values(std::span<const double>(grid[i].data(), static_cast<std::size_t>(m))));
      const double ratio = eps_vals[i] / bound[i];
      if (truncated && on_outer_shell(grid[i], region, opts.truncation))
        shell_min = std::min(shell_min, ratio);
      else
        core_min = std::min(core_min, ratio);
    }
    if (truncated && shell_min < core_min * (1.0 - 1e-9)) continue;
    const double ratio = std::min(core_min, shell_min);
    if (!(ratio > 0.0) || !std::isfinite(ratio)) continue;
    const Rational c = round_down_decimal(0.5 * ratio);
    MinorantResult res;
    res.phi = Expr(c) * base;
    res.family = name;
    res.scale = c;
    res.grid_size = grid.size();
    res.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i)
      res.worst_margin = std::min(res.worst_margin, eps_vals[i] - c.get_d() * bound[i]);
    if (res.worst_margin > 0.0) return res;
  }
  throw Error(ErrorCode::CertificationFailure, "no candidate minorant satisfied the derivative bounds on the grid");
}

double PiecewisePolynomial::evaluate_partial(int order, double x) const {
  std::size_t piece = 0;
  while (piece < breakpoints.size() && x > breakpoints[piece].get_d()) ++piece;
  const Expr d = pieces.at(piece).derivative(MultiIndex({order}));
  return d.evaluate(std::span<const double>(&x, 1));
}

SmoothApproximation smooth_approximate(const PiecewisePolynomial& f, const Expr& eps, int m, double lo, double hi) {
  if (f.pieces.size() != f.breakpoints.size() + 1)
    throw Error(ErrorCode::InvalidArgument, "need exactly one more piece than breakpoints");
  if (!(lo < hi)) throw Error(ErrorCode::InvalidArgument, "empty interval");
  for (std::size_t i = 0; i + 1 < f.breakpoints.size(); ++i)
    if (!(f.breakpoints[i] < f.breakpoints[i + 1]))
      throw Error(ErrorCode::InvalidArgument, "breakpoints must be strictly increasing");
  for (const auto& p : f.pieces)
    if (!p.is_polynomial() || p.arity() > 1)
      throw Error(ErrorCode::InvalidArgument, "pieces must be polynomials in x0");

  // One-sided derivatives must match up to order m, exactly.
  for (std::size_t i = 0; i < f.breakpoints.size(); ++i) {
    const Rational b = f.breakpoints[i];
    for (int j = 0; j <= m; ++j) {
      const MultiIndex a({j});
      const Rational left = f.pieces[i].derivative(a).evaluate_exact(std::span<const Rational>(&b, 1));
      const Rational right = f.pieces[i + 1].derivative(a).evaluate_exact(std::span<const Rational>(&b, 1));
      if (left != right)
        throw Error(ErrorCode::NotCm, "derivative of order " + std::to_string(j) + " jumps at x = " + b.get_str());
    }
  }

  const Expr x = Expr::var(0);
  std::vector<std::size_t> kinks;
  for (std::size_t i = 0; i < f.breakpoints.size(); ++i)
    if (!structurally_equal(f.pieces[i], f.pieces[i + 1])) kinks.push_back(i);

  Domain dom{Box{{lo}, {hi}}, {}};
  if (kinks.empty()) {
    SmoothApproximation res{DefMap(1, {f.pieces.front()}, dom), 0.0, 0.0, 0.0, 0};
    res.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& p : certification_grid(dom.box, 2001, 0.0)) {
      res.worst_margin = std::min(res.worst_margin, eps.evaluate(std::span<const double>(p.data(), 1)));
      ++res.grid_size;
    }
    return res;
  }

  double gap = hi - lo;
  for (std::size_t i = 0; i + 1 < f.breakpoints.size(); ++i)
    gap = std::min(gap, Rational(f.breakpoints[i + 1] - f.breakpoints[i]).get_d());
  double w = std::min(0.25 * gap, 1.0);

  for (int attempt = 0; attempt < 40; ++attempt, w *= 0.5) {
    std::vector<Expr> terms{f.pieces.front()};
    const Rational rw(w);
    for (std::size_t i : kinks) {
      const Expr t = (x - Expr(f.breakpoints[i] - rw)) * Expr(Rational(1) / (2 * rw));
      terms.push_back(smoothstep(t) * (f.pieces[i + 1] - f.pieces[i]));
    }
    const Expr g = Expr::sum(std::move(terms));
    const DefMap gm(1, {g}, dom);
    const DerivativeTable table(gm, m);

    std::vector<double> pts;
    for (int j = 0; j <= 2000; ++j) pts.push_back(lo + (hi - lo) * j / 2000.0);
    for (std::size_t i : kinks) {
      const double b = f.breakpoints[i].get_d();
      for (int j = 0; j <= 400; ++j) {
        const double p = b - w + 2.0 * w * j / 400.0;
        if (p >= lo && p <= hi) pts.push_back(p);
      }
    }
    SmoothApproximation res{gm, w, 0.0, std::numeric_limits<double>::infinity(), pts.size()};
    bool ok = true;
    for (double p : pts) {
      const Mat gv = table.values(std::span<const double>(&p, 1));
      const double e = eps.evaluate(std::span<const double>(&p, 1));
      double err = 0.0;
      for (int j = 0; j <= m; ++j) err = std::max(err, std::abs(gv(0, j) - f.evaluate_partial(j, p)));
      res.max_error = std::max(res.max_error, err);
      res.worst_margin = std::min(res.worst_margin, e - err);
      if (!(err < e)) {
        ok = false;
        break;
      }
    }
    if (ok) return res;
  }
  throw Error(ErrorCode::CertificationFailure, "no blending width met the error bound");
}

}  // namespace dtrans
