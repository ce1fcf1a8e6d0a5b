#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dtrans/expr.hpp"

namespace dtrans {

inline constexpr double kDefaultRankTol = 1e-8;

struct RankInfo {
  int rank = 0;
  // Smallest singular value kept in the rank (0 when rank is 0).
  double smallest_retained = 0.0;
  // Largest singular value dropped (0 when nothing was dropped).
  double largest_dropped = 0.0;
  Vec singular_values;
};

// Rank with a relative threshold: sigma_i counts when sigma_i > rel_tol *
// sigma_max.  A matrix whose sigma_max is below 1e-300 has rank 0.
RankInfo numeric_rank(const Mat& a, double rel_tol = kDefaultRankTol);
// Exact rank over Q by fraction-free elimination; rows of equal length.
int exact_rank(std::vector<std::vector<Rational>> rows);

class LinearSubspace {
 public:
  LinearSubspace() = default;
  // basis columns must already be orthonormal.
  LinearSubspace(int ambient_dim, Mat orthonormal_basis);

  // Column span of a, using a rank-revealing SVD.
  static LinearSubspace span_of(const Mat& a, double rel_tol = kDefaultRankTol);
  static LinearSubspace zero(int ambient_dim);
  static LinearSubspace whole(int ambient_dim);
  static LinearSubspace coordinate(int ambient_dim, const std::vector<int>& axes);

  int ambient_dim() const { return ambient_dim_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  const Mat& basis() const { return basis_; }
  Mat projector() const { return basis_ * basis_.transpose(); }
  Vec project(const Vec& v) const;
  LinearSubspace orthogonal_complement() const;
  // Image under a linear map (rows = new ambient dimension).
  LinearSubspace image(const Mat& a, double rel_tol = kDefaultRankTol) const;
  // Largest deviation of the basis from orthonormality.
  double orthonormality_error() const;

 private:
  int ambient_dim_ = 0;
  Mat basis_;
};

struct SumResult {
  LinearSubspace space;
  double smallest_retained = 0.0;
};
// AmbientMismatch for different ambient dimensions.
SumResult span_sum(const LinearSubspace& a, const LinearSubspace& b, double rel_tol = kDefaultRankTol);

struct Containment {
  bool contained = false;
  double residual = 0.0;
};
// residual = |v - P_A v| / |v|; ZeroVector when v = 0.
Containment contains(const LinearSubspace& a, const Vec& v, double tol);

// max over unit u in Y of dist(u, T): the largest singular value of
// (I - P_T) P_Y.  Zero iff Y is inside T.
double asym_deviation(const LinearSubspace& y, const LinearSubspace& t);
// Gap metric max(asym(A,B), asym(B,A)); for equal dimensions this is the sine
// of the largest principal angle.  Dimensions that differ give 1.
double gap(const LinearSubspace& a, const LinearSubspace& b);
// Principal angles in ascending order (min(dim A, dim B) of them).
Vec principal_angles(const LinearSubspace& a, const LinearSubspace& b);

struct SequenceLimit {
  bool converged = false;
  // Last item when converged.
  std::optional<LinearSubspace> limit;
  // Largest pairwise gap in the tail.
  double tail_gap = 0.0;
};
// Cauchy test on the last `tail` items: converged iff all pairwise gaps are
// at most tol.  InvalidArgument with fewer than `tail` items, DimMismatch when
// items differ in dimension.
SequenceLimit sequence_limit(const std::vector<LinearSubspace>& items, double tol, int tail = 4);

struct SolveResult {
  Vec z;
  // max-norm of F at z
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};
using ResidualFn = std::function<Vec(const Vec&)>;
using JacobianFn = std::function<Mat(const Vec&)>;
// Minimum-norm Gauss-Newton for F(z) = 0 (any shape of Jacobian) with step
// halving until |F| decreases.  Evaluation errors during the line search
// count as a failed trial step.  Converged when |F|_inf <= tol.
SolveResult gauss_newton(const ResidualFn& f, const JacobianFn& jac, Vec z0, double tol = 1e-10,
                         int max_iter = 50);

}  // namespace dtrans
