#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <gmpxx.h>
#include <Eigen/Dense>

#include "dtrans/error.hpp"

namespace dtrans {

using Rational = mpq_class;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Multi-indices
// ---------------------------------------------------------------------------

// Exponent vector alpha in N^m.  The global order is graded lexicographic:
// lower total degree first, then lexicographically descending entries, so for
// m = 2 the sequence is (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);

  static MultiIndex zero(int m);
  static MultiIndex unit(int m, int i);
  static MultiIndex unrank(int m, std::uint64_t rank);

  int dim() const { return static_cast<int>(entries_.size()); }
  int order() const;
  int operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& entries() const { return entries_; }

  std::uint64_t rank() const;
  // alpha! = prod alpha_i!
  std::uint64_t factorial() const;
  MultiIndex plus_unit(int i) const;
  // Index of the first non-zero entry, or -1 for the zero index.
  int first_nonzero() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend bool operator<(const MultiIndex& a, const MultiIndex& b) { return a.rank() < b.rank(); }

 private:
  std::vector<int> entries_;
};

// #{alpha in N^m : |alpha| <= k} = C(m + k, m)
std::uint64_t count_multi_indices(int m, int max_order);
std::uint64_t binomial(int n, int k);
// All alpha with min_order <= |alpha| <= max_order, in grlex order.
std::vector<MultiIndex> multi_indices(int m, int max_order, int min_order = 0);

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box cube(int dim, double lo, double hi);
  static Box unbounded(int dim);
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const double> x, double slack = 0.0) const;
  bool bounded() const;
};

enum class ExprKind { Constant, Variable, Sum, Product, Power, Exp, Sqrt, Recip, Flat, Bump };

namespace detail {
struct Node;
}

// Immutable expression DAG for a definable smooth function R^m -> R.
// Primitives: rational constants, coordinates, sums, products, non-negative
// integer powers, exp, guarded sqrt and reciprocal (argument must be positive),
// and the flat function flat_j(u) = exp(-1/u) u^-j for u > 0, 0 otherwise,
// which is closed under differentiation and is the building block of bumps.
class Expr {
 public:
  Expr();  // the constant 0
  Expr(int value);
  Expr(double value);
  Expr(const Rational& value);

  static Expr constant(const Rational& value);
  static Expr var(int index);
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);

  ExprKind kind() const;
  // Constant value (Constant only).
  const Rational& value() const;
  // Variable index (Variable), exponent (Power) or flat power (Flat).
  int param() const;
  const std::vector<Expr>& args() const;
  const Expr& arg() const;
  const std::optional<Box>& guard() const;
  // Bump metadata (Bump only).
  const std::vector<double>& bump_center() const;
  double bump_inner() const;
  double bump_outer() const;

  bool is_constant() const { return kind() == ExprKind::Constant; }
  bool is_zero() const;
  bool is_one() const;
  bool is_polynomial() const;
  bool depends_on(int var) const;
  // One past the largest variable index used (0 for constants).
  int arity() const;
  std::size_t node_count() const;

  Expr derivative(int var) const;
  Expr derivative(const MultiIndex& alpha) const;
  // Replace variable i by replacements[i].
  Expr substitute(std::span<const Expr> replacements) const;

  double evaluate(std::span<const double> x) const;
  Rational evaluate_exact(std::span<const Rational> x) const;

  // Identity of the underlying node (for hashing/deduplication).
  const detail::Node* id() const { return node_.get(); }
  bool same_as(const Expr& other) const { return node_ == other.node_; }

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);

 private:
  explicit Expr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  friend struct detail::Node;
  friend Expr make_node(detail::Node&& node);

  std::shared_ptr<const detail::Node> node_;
};

Expr pow(const Expr& base, int exponent);
Expr exp(const Expr& arg);
Expr sqrt(const Expr& arg, std::optional<Box> guard = std::nullopt);
Expr recip(const Expr& arg, std::optional<Box> guard = std::nullopt);
Expr flat(const Expr& arg, int power = 0);
// Smooth step: 0 for t <= 0, 1 for t >= 1, strictly increasing in between.
Expr smoothstep(const Expr& t);
Expr squared_norm(std::span<const Expr> coords);
Expr squared_distance_to(std::span<const double> center);
// Monomial x^alpha.
Expr monomial(const MultiIndex& alpha);

// lambda = 1 on the closed ball B(center, r_in), 0 outside B(center, r_out),
// values in [0, 1], radially non-increasing.  Built from flat pieces on the
// squared radius so it is smooth at the center.
Expr bump(std::vector<double> center, double r_in, double r_out);

// Structural equality (same tree up to node sharing).
bool structurally_equal(const Expr& a, const Expr& b);
std::string to_string(const Expr& e);

// ---------------------------------------------------------------------------
// Definable maps
// ---------------------------------------------------------------------------

struct Domain {
  Box box;
  // Strict inequalities g(x) > 0 cutting the box down (implicit region).
  std::vector<Expr> inequalities;

  static Domain whole(int dim) { return Domain{Box::unbounded(dim), {}}; }
  bool contains(std::span<const double> x) const;
};

class Tape;

class DefMap {
 public:
  DefMap() = default;
  DefMap(int domain_dim, std::vector<Expr> components);
  DefMap(int domain_dim, std::vector<Expr> components, Domain domain);

  static DefMap identity(int dim);
  static DefMap linear(const Mat& a, const Vec& b);

  int domain_dim() const { return domain_dim_; }
  int codomain_dim() const { return static_cast<int>(components_.size()); }
  const std::vector<Expr>& components() const { return components_; }
  const Expr& component(int i) const { return components_[static_cast<std::size_t>(i)]; }
  const Domain& domain() const { return domain_; }
  bool is_polynomial() const;

  // OutOfDomain / GuardViolation on failure.
  Vec evaluate(std::span<const double> x) const;
  Vec evaluate(const Vec& x) const { return evaluate(std::span<const double>(x.data(), x.size())); }
  std::vector<Rational> evaluate_exact(std::span<const Rational> x) const;
  Vec partial(const MultiIndex& alpha, std::span<const double> x) const;
  std::vector<Rational> partial_exact(const MultiIndex& alpha, std::span<const Rational> x) const;
  // codomain_dim x domain_dim
  Mat jacobian(std::span<const double> x) const;
  Mat jacobian(const Vec& x) const { return jacobian(std::span<const double>(x.data(), x.size())); }
  std::vector<std::vector<Rational>> jacobian_exact(std::span<const Rational> x) const;

  // (*this) o inner
  DefMap compose(const DefMap& inner) const;
  DefMap with_domain(Domain domain) const;

 private:
  void check_domain(std::span<const double> x) const;

  int domain_dim_ = 0;
  std::vector<Expr> components_;
  Domain domain_;
  std::shared_ptr<const Tape> value_tape_;
  std::shared_ptr<const Tape> jacobian_tape_;
};

// All partials d^alpha f_i for |alpha| <= max_order, compiled into one tape.
// Column j of values() corresponds to multi_indices(m, max_order)[j].
class DerivativeTable {
 public:
  DerivativeTable(const DefMap& f, int max_order);

  int max_order() const { return max_order_; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const DefMap& map() const { return map_; }
  const Expr& expr(int component, std::size_t index) const;
  // codomain_dim x indices().size()
  Mat values(std::span<const double> x) const;
  std::vector<std::vector<Rational>> values_exact(std::span<const Rational> x) const;

 private:
  DefMap map_;
  int max_order_;
  std::vector<MultiIndex> indices_;
  std::vector<std::vector<Expr>> exprs_;  // [component][index]
  std::shared_ptr<const Tape> tape_;
};

std::vector<Rational> to_rational(std::span<const double> x);
std::vector<double> to_double(std::span<const Rational> x);

// Smallest argument of every sqrt/recip guard over the given points; a map is
// certified when the minimum exceeds margin.
struct GuardCertificate {
  bool certified = true;
  double min_argument = 0.0;
  std::size_t guard_count = 0;
  std::optional<Vec> worst_point;
};
GuardCertificate certify_guards(const DefMap& f, std::span<const Vec> points, double margin);

}  // namespace dtrans
