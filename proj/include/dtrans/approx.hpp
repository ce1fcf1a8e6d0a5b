#pragma once

#include <string>
#include <vector>

#include "dtrans/expr.hpp"

namespace dtrans {

struct GridOptions {
  // Points per coordinate of the certification grid, by ambient dimension
  // (index 0 unused).  Larger dimensions use the last entry.
  std::vector<int> points_per_dim = {0, 2001, 81, 21};
  // Unbounded coordinates are truncated to [-L, L].
  double truncation = 10.0;
};

// Tensor grid over a box; unbounded sides are truncated per options.
std::vector<Vec> certification_grid(const Box& region, int points_per_dim, double truncation);
int grid_points_for(const GridOptions& opts, int dim);

struct MinorantResult {
  Expr phi;
  // "constant", "inverse_square_power" or "gaussian"
  std::string family;
  Rational scale;
  // min over the grid of eps(x) - max_{|alpha|<=k} |d^alpha phi(x)|
  double worst_margin = 0.0;
  std::size_t grid_size = 0;
};

// Positive phi with |d^alpha phi| < eps for |alpha| <= k on a certification
// grid over region.  Candidates, in order: c, c / (1 + |x|^2)^2,
// c exp(-|x|^2).  A candidate is rejected when its ratio eps / |d phi| is
// smaller on the outer shell of a truncated unbounded region than inside,
// since then the bound cannot be expected to persist beyond the grid.
// Throws CertificationFailure when no candidate qualifies and
// InvalidArgument when eps is not positive on the grid.
MinorantResult positive_minorant(const Expr& eps, int k, const Box& region, const GridOptions& opts = {});

struct PiecewisePolynomial {
  // Strictly increasing breakpoints b_1 < ... < b_r.
  std::vector<Rational> breakpoints;
  // r + 1 polynomials in x0; pieces[i] is used on (b_i, b_{i+1}).
  std::vector<Expr> pieces;

  double evaluate_partial(int order, double x) const;
};

struct SmoothApproximation {
  DefMap g;
  // Half width of the blending windows around each breakpoint.
  double width = 0.0;
  double max_error = 0.0;
  double worst_margin = 0.0;
  std::size_t grid_size = 0;
};

// Smooth g on [lo, hi] with |f^(j) - g^(j)| < eps for j <= m on a grid that
// is dense inside the blending windows.  Throws NotCm when one-sided
// derivatives of order <= m disagree at a breakpoint, CertificationFailure
// when no width passes.
SmoothApproximation smooth_approximate(const PiecewisePolynomial& f, const Expr& eps, int m, double lo, double hi);

}  // namespace dtrans
