#pragma once

#include <vector>

#include "dtrans/expr.hpp"
#include "dtrans/parse.hpp"

namespace dtrans {

// A = C(m + k, m) - 1, the number of alpha with 1 <= |alpha| <= k.
std::uint64_t jet_dimension(int m, int k);

struct JetSpaceSpec {
  int m = 1;
  int n = 1;
  int k = 0;

  int A() const { return static_cast<int>(jet_dimension(m, k)); }
  // Coordinates of J^k(R^m, R^n) = R^m x R^n x R^{nA}.
  int total_dim() const { return m + n + n * A(); }
  // Multi-indices with 1 <= |alpha| <= k in grlex order.
  std::vector<MultiIndex> indices() const { return multi_indices(m, k, 1); }
  // Position of coefficient (component i, alpha) in the flattened jet vector.
  int coordinate(int component, const MultiIndex& alpha) const;

  friend bool operator==(const JetSpaceSpec&, const JetSpaceSpec&) = default;
};

// (x, y, a) with a(i, j) = d^alpha_j f_i(x), alpha_j = spec.indices()[j].
struct JetPoint {
  JetSpaceSpec spec;
  Vec x;
  Vec y;
  Mat coeffs;

  // Flattened as x, y, then coefficients component by component.
  Vec flatten() const;
};

struct ExactJetPoint {
  JetSpaceSpec spec;
  std::vector<Rational> x;
  std::vector<Rational> y;
  std::vector<std::vector<Rational>> coeffs;

  JetPoint to_double() const;
};

JetPoint compute_jet(const DefMap& f, const Vec& x, int k);
// Polynomial f and rational x only (NotPolynomial otherwise).
ExactJetPoint compute_jet_exact(const DefMap& f, std::span<const Rational> x, int k);

// Sup-norm distance over (x, y, coefficients); SpecMismatch on differing specs.
double jet_distance(const JetPoint& a, const JetPoint& b);
Rational jet_distance(const ExactJetPoint& a, const ExactJetPoint& b);

struct NeighborhoodSpec {
  int k = 0;
  Expr epsilon;
  std::vector<Vec> samples;
};

struct NeighborhoodResult {
  bool inside = true;
  // min over samples of eps(x) - d(j^k f(x), j^k g(x))
  double margin = 0.0;
  std::size_t worst_sample = 0;
  std::vector<double> distances;
};

// InvalidArgument when eps is not positive at a sample.
NeighborhoodResult in_neighborhood(const DefMap& f, const DefMap& g, const NeighborhoodSpec& spec);

// Jet of pi o f from the jet of f, by composing truncated Taylor expansions.
JetPoint jet_pushforward(const JetPoint& j, const DefMap& pi);
ExactJetPoint jet_pushforward(const ExactJetPoint& j, const DefMap& pi);

// x -> j^k f(x) as a map R^m -> R^{m + n + nA}, built symbolically.
DefMap jet_prolongation(const DefMap& f, int k);

Json jet_to_json(const JetPoint& j);
Json jet_to_json(const ExactJetPoint& j);
JetPoint jet_from_json(const Json& j);

}  // namespace dtrans
