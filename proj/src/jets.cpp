#include "dtrans/jets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtrans {

std::uint64_t jet_dimension(int m, int k) {
  if (m < 1 || k < 0) throw Error(ErrorCode::InvalidArgument, "jet dimension needs m >= 1 and k >= 0");
  return count_multi_indices(m, k) - 1;
}

int JetSpaceSpec::coordinate(int component, const MultiIndex& alpha) const {
  if (alpha.order() < 1 || alpha.order() > k || alpha.dim() != m)
    throw Error(ErrorCode::InvalidArgument, "multi-index outside the jet range");
  return m + n + component * A() + static_cast<int>(alpha.rank()) - 1;
}

Vec JetPoint::flatten() const {
  Vec v(spec.total_dim());
  v.head(spec.m) = x;
  v.segment(spec.m, spec.n) = y;
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.A(); ++j) v(spec.m + spec.n + i * spec.A() + j) = coeffs(i, j);
  return v;
}

JetPoint ExactJetPoint::to_double() const {
  JetPoint j{spec, Vec(spec.m), Vec(spec.n), Mat(spec.n, spec.A())};
  for (int i = 0; i < spec.m; ++i) j.x(i) = x[static_cast<std::size_t>(i)].get_d();
  for (int i = 0; i < spec.n; ++i) {
    j.y(i) = y[static_cast<std::size_t>(i)].get_d();
    for (int a = 0; a < spec.A(); ++a)
      j.coeffs(i, a) = coeffs[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)].get_d();
  }
  return j;
}

JetPoint compute_jet(const DefMap& f, const Vec& x, int k) {
  const JetSpaceSpec spec{f.domain_dim(), f.codomain_dim(), k};
  const DerivativeTable table(f, k);
  const Mat v = table.values(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  JetPoint j{spec, x, v.col(0), v.rightCols(spec.A())};
  return j;
}

ExactJetPoint compute_jet_exact(const DefMap& f, std::span<const Rational> x, int k) {
  const JetSpaceSpec spec{f.domain_dim(), f.codomain_dim(), k};
  if (static_cast<int>(x.size()) != spec.m) throw Error(ErrorCode::DimMismatch, "point dimension mismatch");
  const DerivativeTable table(f, k);
  const auto v = table.values_exact(x);
  ExactJetPoint j{spec, std::vector<Rational>(x.begin(), x.end()), {}, {}};
  for (const auto& row : v) {
    j.y.push_back(row.front());
    j.coeffs.emplace_back(row.begin() + 1, row.end());
  }
  return j;
}

double jet_distance(const JetPoint& a, const JetPoint& b) {
  if (!(a.spec == b.spec)) throw Error(ErrorCode::SpecMismatch, "jets belong to different jet spaces");
  double d = (a.x - b.x).cwiseAbs().maxCoeff();
  d = std::max(d, (a.y - b.y).cwiseAbs().maxCoeff());
  if (a.coeffs.size() > 0) d = std::max(d, (a.coeffs - b.coeffs).cwiseAbs().maxCoeff());
  return d;
}

Rational jet_distance(const ExactJetPoint& a, const ExactJetPoint& b) {
  if (!(a.spec == b.spec)) throw Error(ErrorCode::SpecMismatch, "jets belong to different jet spaces");
  Rational d(0);
  auto upd = [&](const Rational& p, const Rational& q) {
    const Rational t = abs(p - q);
    if (t > d) d = t;
  };
  for (std::size_t i = 0; i < a.x.size(); ++i) upd(a.x[i], b.x[i]);
  for (std::size_t i = 0; i < a.y.size(); ++i) upd(a.y[i], b.y[i]);
  for (std::size_t i = 0; i < a.coeffs.size(); ++i)
    for (std::size_t j = 0; j < a.coeffs[i].size(); ++j) upd(a.coeffs[i][j], b.coeffs[i][j]);
  return d;
}

NeighborhoodResult in_neighborhood(const DefMap& f, const DefMap& g, const NeighborhoodSpec& spec) {
  if (f.domain_dim() != g.domain_dim() || f.codomain_dim() != g.codomain_dim())
    throw Error(ErrorCode::SpecMismatch, "maps have different shapes");
  const DerivativeTable tf(f, spec.k);
  const DerivativeTable tg(g, spec.k);
  NeighborhoodResult r;
  r.margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < spec.samples.size(); ++s) {
    const Vec& x = spec.samples[s];
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    const double e = spec.epsilon.evaluate(xs);
    if (!(e > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon is not positive at a sample");
    const double d = (tf.values(xs) - tg.values(xs)).cwiseAbs().maxCoeff();
    r.distances.push_back(d);
    if (e - d < r.margin) {
      r.margin = e - d;
      r.worst_sample = s;
    }
    if (!(d < e)) r.inside = false;
  }
  return r;
}

namespace {

// Dense polynomials in m variables truncated at total degree k, indexed by
// grlex rank.
class TruncatedAlgebra {
 public:
  TruncatedAlgebra(int m, int k) : idx_(multi_indices(m, k)) {
    const std::size_t n = idx_.size();
    sum_.assign(n, std::vector<int>(n, -1));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (idx_[a].order() + idx_[b].order() > k) continue;
        std::vector<int> e(idx_[a].entries());
        for (std::size_t i = 0; i < e.size(); ++i) e[i] += idx_[b][static_cast<int>(i)];
        sum_[a][b] = static_cast<int>(MultiIndex(e).rank());
      }
  }
  std::size_t size() const { return idx_.size(); }
  const MultiIndex& index(std::size_t i) const { return idx_[i]; }

  template <class T>
  std::vector<T> mul(const std::vector<T>& p, const std::vector<T>& q) const {
    std::vector<T> r(size(), T(0));
    for (std::size_t a = 0; a < size(); ++a) {
      if (p[a] == 0) continue;
      for (std::size_t b = 0; b < size(); ++b) {
        const int s = sum_[a][b];
        if (s < 0 || q[b] == 0) continue;
        r[static_cast<std::size_t>(s)] += p[a] * q[b];
      }
    }
    return r;
  }

 private:
  std::vector<MultiIndex> idx_;
  std::vector<std::vector<int>> sum_;
};

// d^alpha partials of the composite, given raw partials of the inner map
// (coeffs: n x A, zero-order excluded) and of the outer map at y
// (outer: n' x C(n+k, n), zero order included).
template <class T>
std::vector<std::vector<T>> compose_partials(int m, int n, int k, const std::vector<std::vector<T>>& coeffs,
                                             const std::vector<std::vector<T>>& outer) {
  const TruncatedAlgebra alg(m, k);
  std::vector<std::vector<T>> u(static_cast<std::size_t>(n), std::vector<T>(alg.size(), T(0)));
  for (int l = 0; l < n; ++l)
    for (std::size_t a = 1; a < alg.size(); ++a)
      u[static_cast<std::size_t>(l)][a] =
          coeffs[static_cast<std::size_t>(l)][a - 1] / T(static_cast<double>(alg.index(a).factorial()));

  const auto betas = multi_indices(n, k);
  std::vector<std::vector<T>> mono(betas.size());
  mono[0].assign(alg.size(), T(0));
  mono[0][0] = T(1);
  for (std::size_t b = 1; b < betas.size(); ++b) {
    const int i = betas[b].first_nonzero();
    auto e = betas[b].entries();
    --e[static_cast<std::size_t>(i)];
    mono[b] = alg.mul(mono[MultiIndex(e).rank()], u[static_cast<std::size_t>(i)]);
  }

  std::vector<std::vector<T>> out(outer.size(), std::vector<T>(alg.size() - 1, T(0)));
  for (std::size_t i = 0; i < outer.size(); ++i) {
    std::vector<T> acc(alg.size(), T(0));
    for (std::size_t b = 1; b < betas.size(); ++b) {
      if (outer[i][b] == 0) continue;
      const T c = outer[i][b] / T(static_cast<double>(betas[b].factorial()));
      for (std::size_t a = 0; a < alg.size(); ++a) acc[a] += c * mono[b][a];
    }
    for (std::size_t a = 1; a < alg.size(); ++a)
      out[i][a - 1] = acc[a] * T(static_cast<double>(alg.index(a).factorial()));
  }
  return out;
}

}  // namespace

JetPoint jet_pushforward(const JetPoint& j, const DefMap& pi) {
  if (pi.domain_dim() != j.spec.n) throw Error(ErrorCode::DimMismatch, "map does not act on the jet's target");
  const int k = j.spec.k;
  const DerivativeTable table(pi, k);
  const Mat outer = table.values(std::span<const double>(j.y.data(), static_cast<std::size_t>(j.y.size())));
  std::vector<std::vector<double>> c(static_cast<std::size_t>(j.spec.n)), o(static_cast<std::size_t>(outer.rows()));
  for (int i = 0; i < j.spec.n; ++i)
    for (int a = 0; a < j.spec.A(); ++a) c[static_cast<std::size_t>(i)].push_back(j.coeffs(i, a));
  for (long i = 0; i < outer.rows(); ++i)
    for (long a = 0; a < outer.cols(); ++a) o[static_cast<std::size_t>(i)].push_back(outer(i, a));
  const auto r = compose_partials(j.spec.m, j.spec.n, k, c, o);
  JetPoint out{JetSpaceSpec{j.spec.m, pi.codomain_dim(), k}, j.x, outer.col(0), Mat(pi.codomain_dim(), j.spec.A())};
  for (int i = 0; i < pi.codomain_dim(); ++i)
    for (int a = 0; a < j.spec.A(); ++a)
      out.coeffs(i, a) = r[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
  return out;
}

ExactJetPoint jet_pushforward(const ExactJetPoint& j, const DefMap& pi) {
  if (pi.domain_dim() != j.spec.n) throw Error(ErrorCode::DimMismatch, "map does not act on the jet's target");
  const int k = j.spec.k;
  const DerivativeTable table(pi, k);
  const auto outer = table.values_exact(j.y);
  ExactJetPoint out{JetSpaceSpec{j.spec.m, pi.codomain_dim(), k}, j.x, {}, {}};
  for (const auto& row : outer) out.y.push_back(row.front());
  out.coeffs = compose_partials<Rational>(j.spec.m, j.spec.n, k, j.coeffs, outer);
  return out;
}

DefMap jet_prolongation(const DefMap& f, int k) {
  const DerivativeTable table(f, k);
  std::vector<Expr> comps;
  for (int i = 0; i < f.domain_dim(); ++i) comps.push_back(Expr::var(i));
  for (int i = 0; i < f.codomain_dim(); ++i) comps.push_back(f.component(i));
  for (int i = 0; i < f.codomain_dim(); ++i)
    for (std::size_t a = 1; a < table.indices().size(); ++a) comps.push_back(table.expr(i, a));
  return DefMap(f.domain_dim(), std::move(comps), f.domain());
}

Json jet_to_json(const JetPoint& j) {
  Json coeffs = Json::array();
  for (int i = 0; i < j.spec.n; ++i) coeffs.push_back(vec_to_json(j.coeffs.row(i).transpose()));
  return Json{{"m", j.spec.m}, {"n", j.spec.n}, {"k", j.spec.k},
              {"x", vec_to_json(j.x)}, {"y", vec_to_json(j.y)}, {"coeffs", coeffs}};
}

Json jet_to_json(const ExactJetPoint& j) {
  auto arr = [](const std::vector<Rational>& v) {
    Json a = Json::array();
    for (const auto& r : v) a.push_back(rational_to_json(r));
    return a;
  };
  Json coeffs = Json::array();
  for (const auto& row : j.coeffs) coeffs.push_back(arr(row));
  return Json{{"m", j.spec.m}, {"n", j.spec.n}, {"k", j.spec.k}, {"x", arr(j.x)}, {"y", arr(j.y)}, {"coeffs", coeffs}};
}

JetPoint jet_from_json(const Json& j) {
  JetPoint p;
  p.spec = JetSpaceSpec{j.at("m").get<int>(), j.at("n").get<int>(), j.at("k").get<int>()};
  p.x = vec_from_json(j.at("x"));
  p.y = vec_from_json(j.at("y"));
  p.coeffs = Mat(p.spec.n, p.spec.A());
  const Json& c = j.at("coeffs");
  if (p.x.size() != p.spec.m || p.y.size() != p.spec.n || static_cast<int>(c.size()) != p.spec.n)
    throw Error(ErrorCode::SchemaError, "jet arrays do not match (m, n, k)");
  for (int i = 0; i < p.spec.n; ++i) {
    const Vec row = vec_from_json(c[static_cast<std::size_t>(i)]);
    if (row.size() != p.spec.A()) throw Error(ErrorCode::SchemaError, "jet coefficient row has the wrong length");
    p.coeffs.row(i) = row.transpose();
  }
  return p;
}

}  // namespace dtrans
