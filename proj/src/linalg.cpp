#include "dtrans/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

namespace dtrans {

RankInfo numeric_rank(const Mat& a, double rel_tol) {
  RankInfo info;
  if (a.rows() == 0 || a.cols() == 0) {
    info.singular_values = Vec(0);
    return info;
  }
  Eigen::JacobiSVD<Mat> svd(a);
  info.singular_values = svd.singularValues();
  const double smax = info.singular_values(0);
  if (!(smax > 1e-300)) {
    info.largest_dropped = smax;
    return info;
  }
  for (long i = 0; i < info.singular_values.size(); ++i) {
    const double s = info.singular_values(i);
    if (s > rel_tol * smax) {
      ++info.rank;
      info.smallest_retained = s;
    } else {
      info.largest_dropped = std::max(info.largest_dropped, s);
    }
  }
  return info;
}

int exact_rank(std::vector<std::vector<Rational>> rows) {
  if (rows.empty()) return 0;
  const std::size_t cols = rows.front().size();
  int rank = 0;
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows.size(); ++c) {
    std::size_t piv = r;
    while (piv < rows.size() && rows[piv][c] == 0) ++piv;
    if (piv == rows.size()) continue;
    std::swap(rows[r], rows[piv]);
    for (std::size_t i = r + 1; i < rows.size(); ++i) {
      if (rows[i][c] == 0) continue;
      const Rational f = rows[i][c] / rows[r][c];
      for (std::size_t j = c; j < cols; ++j) rows[i][j] -= f * rows[r][j];
    }
    ++r;
    ++rank;
  }
  return rank;
}

LinearSubspace::LinearSubspace(int ambient_dim, Mat orthonormal_basis)
    : ambient_dim_(ambient_dim), basis_(std::move(orthonormal_basis)) {
  if (basis_.cols() == 0) basis_.resize(ambient_dim_, 0);
  if (basis_.rows() != ambient_dim_) throw Error(ErrorCode::DimMismatch, "basis rows != ambient dimension");
}

LinearSubspace LinearSubspace::span_of(const Mat& a, double rel_tol) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() == 0) return zero(n);
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
  const Vec s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  int r = 0;
  if (smax > 1e-300)
    while (r < s.size() && s(r) > rel_tol * smax) ++r;
  return LinearSubspace(n, svd.matrixU().leftCols(r));
}

LinearSubspace LinearSubspace::zero(int ambient_dim) { return LinearSubspace(ambient_dim, Mat(ambient_dim, 0)); }

LinearSubspace LinearSubspace::whole(int ambient_dim) {
  return LinearSubspace(ambient_dim, Mat::Identity(ambient_dim, ambient_dim));
}

LinearSubspace LinearSubspace::coordinate(int ambient_dim, const std::vector<int>& axes) {
  Mat b = Mat::Zero(ambient_dim, static_cast<long>(axes.size()));
  for (std::size_t j = 0; j < axes.size(); ++j) b(axes[j], static_cast<long>(j)) = 1.0;
  return span_of(b);
}

Vec LinearSubspace::project(const Vec& v) const { return basis_ * (basis_.transpose() * v); }

LinearSubspace LinearSubspace::orthogonal_complement() const {
  if (dim() == 0) return whole(ambient_dim_);
  if (dim() == ambient_dim_) return zero(ambient_dim_);
  Eigen::JacobiSVD<Mat> svd(basis_, Eigen::ComputeFullU);
  return LinearSubspace(ambient_dim_, svd.matrixU().rightCols(ambient_dim_ - dim()));
}

LinearSubspace LinearSubspace::image(const Mat& a, double rel_tol) const {
  if (a.cols() != ambient_dim_) throw Error(ErrorCode::DimMismatch, "linear map does not act on this space");
  if (dim() == 0) return zero(static_cast<int>(a.rows()));
  return span_of(a * basis_, rel_tol);
}

double LinearSubspace::orthonormality_error() const {
  if (dim() == 0) return 0.0;
  return (basis_.transpose() * basis_ - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff();
}

SumResult span_sum(const LinearSubspace& a, const LinearSubspace& b, double rel_tol) {
  if (a.ambient_dim() != b.ambient_dim()) throw Error(ErrorCode::AmbientMismatch, "subspaces live in different spaces");
  Mat m(a.ambient_dim(), a.dim() + b.dim());
  m << a.basis(), b.basis();
  SumResult r{LinearSubspace::span_of(m, rel_tol), 0.0};
  r.smallest_retained = numeric_rank(m, rel_tol).smallest_retained;
  return r;
}

Containment contains(const LinearSubspace& a, const Vec& v, double tol) {
  if (v.size() != a.ambient_dim()) throw Error(ErrorCode::AmbientMismatch, "vector dimension mismatch");
  const double nv = v.norm();
  if (!(nv > 0.0)) throw Error(ErrorCode::ZeroVector, "containment test needs a non-zero vector");
  const double res = (v - a.project(v)).norm() / nv;
  return {res <= tol, res};
}

double asym_deviation(const LinearSubspace& y, const LinearSubspace& t) {
  if (y.ambient_dim() != t.ambient_dim()) throw Error(ErrorCode::AmbientMismatch, "subspaces live in different spaces");
  if (y.dim() == 0) return 0.0;
  const Mat r = y.basis() - t.basis() * (t.basis().transpose() * y.basis());
  Eigen::JacobiSVD<Mat> svd(r);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

double gap(const LinearSubspace& a, const LinearSubspace& b) {
  if (a.ambient_dim() != b.ambient_dim()) throw Error(ErrorCode::AmbientMismatch, "subspaces live in different spaces");
  if (a.dim() != b.dim()) return 1.0;
  return std::max(asym_deviation(a, b), asym_deviation(b, a));
}

Vec principal_angles(const LinearSubspace& a, const LinearSubspace& b) {
  if (a.ambient_dim() != b.ambient_dim()) throw Error(ErrorCode::AmbientMismatch, "subspaces live in different spaces");
  const long k = std::min(a.dim(), b.dim());
  if (k == 0) return Vec(0);
  Eigen::JacobiSVD<Mat> svd(a.basis().transpose() * b.basis());
  Vec s = svd.singularValues().head(k);
  Vec ang(k);
  for (long i = 0; i < k; ++i) ang(i) = std::acos(std::clamp(s(i), -1.0, 1.0));
  return ang;
}

SequenceLimit sequence_limit(const std::vector<LinearSubspace>& items, double tol, int tail) {
  if (tail < 2 || static_cast<int>(items.size()) < tail)
    throw Error(ErrorCode::InvalidArgument, "sequence needs at least " + std::to_string(tail) + " items");
  for (const auto& s : items)
    if (s.dim() != items.front().dim() || s.ambient_dim() != items.front().ambient_dim())
      throw Error(ErrorCode::DimMismatch, "sequence items differ in dimension");
  SequenceLimit out;
  const std::size_t start = items.size() - static_cast<std::size_t>(tail);
  for (std::size_t i = start; i < items.size(); ++i)
    for (std::size_t j = i + 1; j < items.size(); ++j) out.tail_gap = std::max(out.tail_gap, gap(items[i], items[j]));
  out.converged = out.tail_gap <= tol;
  if (out.converged) out.limit = items.back();
  return out;
}

SolveResult gauss_newton(const ResidualFn& f, const JacobianFn& jac, Vec z0, double tol, int max_iter) {
  SolveResult r;
  r.z = std::move(z0);
  Vec fz = f(r.z);
  r.residual = fz.size() ? fz.cwiseAbs().maxCoeff() : 0.0;
  double norm = fz.norm();
  for (; r.iterations < max_iter && r.residual > tol; ++r.iterations) {
    const Mat j = jac(r.z);
    const Vec step = j.completeOrthogonalDecomposition().solve(-fz);
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h, lambda *= 0.5) {
      const Vec trial = r.z + lambda * step;
      Vec ft;
      try {
        ft = f(trial);
      } catch (const Error&) {
        continue;
      }
      if (ft.allFinite() && ft.norm() < norm) {
        r.z = trial;
        fz = std::move(ft);
        norm = fz.norm();
        improved = true;
        break;
      }
    }
    r.residual = fz.size() ? fz.cwiseAbs().maxCoeff() : 0.0;
    if (!improved) break;
  }
  r.converged = r.residual <= tol;
  return r;
}

}  // namespace dtrans
