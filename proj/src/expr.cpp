#include "dtrans/expr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tape.hpp"

namespace dtrans {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::GuardViolation: return "GuardViolation";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::NotPolynomial: return "NotPolynomial";
    case ErrorCode::BadRadii: return "BadRadii";
    case ErrorCode::CertificationFailure: return "CertificationFailure";
    case ErrorCode::NotCm: return "NotCm";
    case ErrorCode::AmbientMismatch: return "AmbientMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NotOnStratum: return "NotOnStratum";
    case ErrorCode::RankDefect: return "RankDefect";
    case ErrorCode::NotSubmersion: return "NotSubmersion";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::HypothesisFailed: return "HypothesisFailed";
    case ErrorCode::ExhaustedDraws: return "ExhaustedDraws";
    case ErrorCode::ProbeInvalid: return "ProbeInvalid";
    case ErrorCode::NotARefinement: return "NotARefinement";
    case ErrorCode::ZeroPolynomial: return "ZeroPolynomial";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// MultiIndex
// ---------------------------------------------------------------------------

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

std::uint64_t count_multi_indices(int m, int max_order) {
  if (max_order < 0) return 0;
  return binomial(m + max_order, m);
}

namespace {

// Number of alpha in N^parts with |alpha| = total.
std::uint64_t compositions(int total, int parts) {
  if (parts == 0) return total == 0 ? 1 : 0;
  return binomial(total + parts - 1, parts - 1);
}

}  // namespace

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int a : entries_)
    if (a < 0) throw Error(ErrorCode::InvalidArgument, "multi-index entries must be non-negative");
}

MultiIndex MultiIndex::zero(int m) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(m), 0)); }

MultiIndex MultiIndex::unit(int m, int i) {
  std::vector<int> e(static_cast<std::size_t>(m), 0);
  e.at(static_cast<std::size_t>(i)) = 1;
  return MultiIndex(std::move(e));
}

int MultiIndex::order() const { return std::accumulate(entries_.begin(), entries_.end(), 0); }

std::uint64_t MultiIndex::rank() const {
  const int m = dim();
  const int d = order();
  std::uint64_t r = d == 0 ? 0 : count_multi_indices(m, d - 1);
  // Within degree d, entries are ordered lexicographically descending.
  int remaining = d;
  for (int i = 0; i + 1 < m; ++i) {
    const int a = entries_[static_cast<std::size_t>(i)];
    for (int b = remaining; b > a; --b) r += compositions(remaining - b, m - i - 1);
    remaining -= a;
  }
  return r;
}

MultiIndex MultiIndex::unrank(int m, std::uint64_t rank) {
  if (m <= 0) throw Error(ErrorCode::InvalidArgument, "multi-index dimension must be positive");
  int d = 0;
  while (count_multi_indices(m, d) <= rank) ++d;
  std::uint64_t r = rank - (d == 0 ? 0 : count_multi_indices(m, d - 1));
  std::vector<int> e(static_cast<std::size_t>(m), 0);
  int remaining = d;
  for (int i = 0; i + 1 < m; ++i) {
    for (int b = remaining; b >= 0; --b) {
      const std::uint64_t block = compositions(remaining - b, m - i - 1);
      if (r < block) {
        e[static_cast<std::size_t>(i)] = b;
        remaining -= b;
        break;
      }
      r -= block;
    }
  }
  e.back() = remaining;
  return MultiIndex(std::move(e));
}

std::uint64_t MultiIndex::factorial() const {
  std::uint64_t f = 1;
  for (int a : entries_)
    for (int i = 2; i <= a; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

MultiIndex MultiIndex::plus_unit(int i) const {
  auto e = entries_;
  ++e.at(static_cast<std::size_t>(i));
  return MultiIndex(std::move(e));
}

int MultiIndex::first_nonzero() const {
  for (int i = 0; i < dim(); ++i)
    if (entries_[static_cast<std::size_t>(i)] != 0) return i;
  return -1;
}

std::vector<MultiIndex> multi_indices(int m, int max_order, int min_order) {
  std::vector<MultiIndex> out;
  const std::uint64_t lo = min_order <= 0 ? 0 : count_multi_indices(m, min_order - 1);
  const std::uint64_t hi = count_multi_indices(m, max_order);
  out.reserve(hi > lo ? hi - lo : 0);
  for (std::uint64_t r = lo; r < hi; ++r) out.push_back(MultiIndex::unrank(m, r));
  return out;
}

// ---------------------------------------------------------------------------
// Box / Domain
// ---------------------------------------------------------------------------

Box Box::cube(int dim, double lo, double hi) {
  return Box{std::vector<double>(static_cast<std::size_t>(dim), lo),
             std::vector<double>(static_cast<std::size_t>(dim), hi)};
}

Box Box::unbounded(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return cube(dim, -inf, inf);
}

bool Box::contains(std::span<const double> x, double slack) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo[i] - slack && x[i] <= hi[i] + slack)) return false;
  return true;
}

bool Box::bounded() const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i])) return false;
  return true;
}

bool Domain::contains(std::span<const double> x) const {
  if (box.dim() > 0 && !box.contains(x)) return false;
  for (const auto& g : inequalities) {
    double v = 0.0;
    try {
      v = g.evaluate(x);
    } catch (const Error&) {
      return false;
    }
    if (!(v > 0.0)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Nodes
// ---------------------------------------------------------------------------

namespace detail {

struct Node {
  ExprKind kind = ExprKind::Constant;
  Rational value;
  int param = 0;
  std::vector<Expr> args;
  std::optional<Box> guard;
  std::vector<double> center;
  double r_in = 0.0;
  double r_out = 0.0;
  // Bit i set when variable i occurs; bit 63 stands for all indices >= 63.
  std::uint64_t vars = 0;
  int arity = 0;
  bool polynomial = true;
  std::size_t hash = 0;
};

}  // namespace detail

using detail::Node;

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)); }

std::uint64_t var_bit(int i) { return std::uint64_t{1} << std::min(i, 63); }

}  // namespace

Expr make_node(Node&& n) {
  n.vars = 0;
  n.arity = 0;
  n.polynomial = true;
  std::size_t h = static_cast<std::size_t>(n.kind) * 1315423911u;
  h = mix(h, std::hash<int>{}(n.param));
  switch (n.kind) {
    case ExprKind::Constant:
      h = mix(h, std::hash<double>{}(n.value.get_d()));
      break;
    case ExprKind::Variable:
      n.vars = var_bit(n.param);
      n.arity = n.param + 1;
      break;
    default:
      break;
  }
  for (const auto& a : n.args) {
    n.vars |= a.node_->vars;
    n.arity = std::max(n.arity, a.node_->arity);
    n.polynomial = n.polynomial && a.node_->polynomial;
    h = mix(h, a.node_->hash);
  }
  if (n.kind == ExprKind::Bump) {
    for (double c : n.center) h = mix(h, std::hash<double>{}(c));
    h = mix(h, std::hash<double>{}(n.r_in));
    h = mix(h, std::hash<double>{}(n.r_out));
  }
  if (n.kind == ExprKind::Exp || n.kind == ExprKind::Sqrt || n.kind == ExprKind::Recip ||
      n.kind == ExprKind::Flat || n.kind == ExprKind::Bump)
    n.polynomial = false;
  n.hash = h;
  return Expr(std::make_shared<const Node>(std::move(n)));
}

namespace {

Expr make_constant(const Rational& v) {
  Node n;
  n.kind = ExprKind::Constant;
  n.value = v;
  n.value.canonicalize();
  return make_node(std::move(n));
}

const Expr& zero_expr() {
  static const Expr z = make_constant(Rational(0));
  return z;
}

Expr make_unary(ExprKind kind, const Expr& arg, int param = 0, std::optional<Box> guard = std::nullopt) {
  Node n;
  n.kind = kind;
  n.param = param;
  n.args = {arg};
  n.guard = std::move(guard);
  return make_node(std::move(n));
}

}  // namespace

Expr::Expr() : Expr(zero_expr()) {}
Expr::Expr(int value) : Expr(make_constant(Rational(value))) {}
namespace {
Rational finite_rational(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite constant");
  return Rational(v);
}
}  // namespace

Expr::Expr(double value) : Expr(make_constant(finite_rational(value))) {}
Expr::Expr(const Rational& value) : Expr(make_constant(value)) {}

Expr Expr::constant(const Rational& value) { return make_constant(value); }

Expr Expr::var(int index) {
  if (index < 0) throw Error(ErrorCode::InvalidArgument, "negative variable index");
  Node n;
  n.kind = ExprKind::Variable;
  n.param = index;
  return make_node(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
  std::vector<Expr> flat_terms;
  Rational c(0);
  for (auto& t : terms) {
    if (t.kind() == ExprKind::Sum) {
      for (const auto& s : t.args()) {
        if (s.is_constant())
          c += s.value();
        else
          flat_terms.push_back(s);
      }
    } else if (t.is_constant()) {
      c += t.value();
    } else {
      flat_terms.push_back(std::move(t));
    }
  }
  if (flat_terms.empty()) return make_constant(c);
  if (c != 0) flat_terms.insert(flat_terms.begin(), make_constant(c));
  if (flat_terms.size() == 1) return flat_terms.front();
  Node n;
  n.kind = ExprKind::Sum;
  n.args = std::move(flat_terms);
  return make_node(std::move(n));
}

Expr Expr::product(std::vector<Expr> factors) {
  std::vector<Expr> flat_factors;
  Rational c(1);
  for (auto& f : factors) {
    if (f.kind() == ExprKind::Product) {
      for (const auto& s : f.args()) {
        if (s.is_constant())
          c *= s.value();
        else
          flat_factors.push_back(s);
      }
    } else if (f.is_constant()) {
      c *= f.value();
    } else {
      flat_factors.push_back(std::move(f));
    }
    if (c == 0) return zero_expr();
  }
  if (flat_factors.empty()) return make_constant(c);
  if (c != 1) flat_factors.insert(flat_factors.begin(), make_constant(c));
  if (flat_factors.size() == 1) return flat_factors.front();
  Node n;
  n.kind = ExprKind::Product;
  n.args = std::move(flat_factors);
  return make_node(std::move(n));
}

ExprKind Expr::kind() const { return node_->kind; }
const Rational& Expr::value() const { return node_->value; }
int Expr::param() const { return node_->param; }
const std::vector<Expr>& Expr::args() const { return node_->args; }
const Expr& Expr::arg() const { return node_->args.front(); }
const std::optional<Box>& Expr::guard() const { return node_->guard; }
const std::vector<double>& Expr::bump_center() const { return node_->center; }
double Expr::bump_inner() const { return node_->r_in; }
double Expr::bump_outer() const { return node_->r_out; }

bool Expr::is_zero() const { return is_constant() && node_->value == 0; }
bool Expr::is_one() const { return is_constant() && node_->value == 1; }
bool Expr::is_polynomial() const { return node_->polynomial; }
bool Expr::depends_on(int var) const { return (node_->vars & var_bit(var)) != 0; }
int Expr::arity() const { return node_->arity; }

std::size_t Expr::node_count() const {
  std::unordered_map<const Node*, bool> seen;
  std::function<void(const Expr&)> walk = [&](const Expr& e) {
    if (!seen.emplace(e.id(), true).second) return;
    for (const auto& a : e.args()) walk(a);
  };
  walk(*this);
  return seen.size();
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, -b}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator-(const Expr& a) { return Expr::product({Expr(-1), a}); }

Expr pow(const Expr& base, int exponent) {
  if (exponent < 0) throw Error(ErrorCode::InvalidArgument, "negative exponent; use recip");
  if (exponent == 0) return Expr(1);
  if (exponent == 1) return base;
  if (base.is_constant()) {
    Rational r(1);
    for (int i = 0; i < exponent; ++i) r *= base.value();
    return Expr(r);
  }
  if (base.kind() == ExprKind::Power) return make_unary(ExprKind::Power, base.arg(), base.param() * exponent);
  return make_unary(ExprKind::Power, base, exponent);
}

Expr exp(const Expr& arg) {
  if (arg.is_zero()) return Expr(1);
  return make_unary(ExprKind::Exp, arg);
}

Expr sqrt(const Expr& arg, std::optional<Box> guard) { return make_unary(ExprKind::Sqrt, arg, 0, std::move(guard)); }

Expr recip(const Expr& arg, std::optional<Box> guard) {
  if (arg.is_constant() && arg.value() > 0) return Expr(Rational(1) / arg.value());
  return make_unary(ExprKind::Recip, arg, 0, std::move(guard));
}

Expr flat(const Expr& arg, int power) {
  if (power < 0) throw Error(ErrorCode::InvalidArgument, "flat power must be non-negative");
  if (arg.is_constant() && arg.value() <= 0) return Expr(0);
  return make_unary(ExprKind::Flat, arg, power);
}

Expr smoothstep(const Expr& t) {
  const Expr a = flat(t);
  const Expr b = flat(Expr(1) - t);
  return a * recip(a + b);
}

Expr squared_norm(std::span<const Expr> coords) {
  std::vector<Expr> terms;
  for (const auto& c : coords) terms.push_back(pow(c, 2));
  return Expr::sum(std::move(terms));
}

Expr squared_distance_to(std::span<const double> center) {
  std::vector<Expr> terms;
  for (std::size_t i = 0; i < center.size(); ++i)
    terms.push_back(pow(Expr::var(static_cast<int>(i)) - Expr(center[i]), 2));
  return Expr::sum(std::move(terms));
}

Expr monomial(const MultiIndex& alpha) {
  std::vector<Expr> f;
  for (int i = 0; i < alpha.dim(); ++i) f.push_back(pow(Expr::var(i), alpha[i]));
  return Expr::product(std::move(f));
}

Expr bump(std::vector<double> center, double r_in, double r_out) {
  if (!(r_in > 0.0) || !(r_out > r_in) || !std::isfinite(r_out))
    throw Error(ErrorCode::BadRadii, "bump requires 0 < r_in < r_out");
  const Rational ro2 = Rational(r_out) * Rational(r_out);
  const Rational ri2 = Rational(r_in) * Rational(r_in);
  const Expr t = (Expr(ro2) - squared_distance_to(center)) * Expr(Rational(1) / (ro2 - ri2));
  Node n;
  n.kind = ExprKind::Bump;
  n.args = {smoothstep(t)};
  n.center = std::move(center);
  n.r_in = r_in;
  n.r_out = r_out;
  return make_node(std::move(n));
}

// ---------------------------------------------------------------------------
// Differentiation and substitution
// ---------------------------------------------------------------------------

namespace {

struct Differentiator {
  int var;
  std::unordered_map<const Node*, Expr> memo;

  Expr d(const Expr& e) {
    if (!e.depends_on(var)) return Expr(0);
    if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
    Expr r = compute(e);
    memo.emplace(e.id(), r);
    return r;
  }

  Expr compute(const Expr& e) {
    switch (e.kind()) {
      case ExprKind::Constant:
        return Expr(0);
      case ExprKind::Variable:
        return Expr(e.param() == var ? 1 : 0);
      case ExprKind::Sum: {
        std::vector<Expr> t;
        for (const auto& a : e.args()) t.push_back(d(a));
        return Expr::sum(std::move(t));
      }
      case ExprKind::Product: {
        const auto& f = e.args();
        std::vector<Expr> terms;
        for (std::size_t i = 0; i < f.size(); ++i) {
          Expr di = d(f[i]);
          if (di.is_zero()) continue;
          std::vector<Expr> p;
          for (std::size_t j = 0; j < f.size(); ++j) p.push_back(j == i ? di : f[j]);
          terms.push_back(Expr::product(std::move(p)));
        }
        return Expr::sum(std::move(terms));
      }
      case ExprKind::Power: {
        const int n = e.param();
        return Expr::product({Expr(n), pow(e.arg(), n - 1), d(e.arg())});
      }
      case ExprKind::Exp:
        return e * d(e.arg());
      case ExprKind::Sqrt:
        return Expr::product({Expr(Rational(1, 2)), recip(e, e.guard()), d(e.arg())});
      case ExprKind::Recip:
        return Expr::product({Expr(-1), pow(e, 2), d(e.arg())});
      case ExprKind::Flat: {
        const int j = e.param();
        Expr inner = flat(e.arg(), j + 2);
        if (j != 0) inner = inner - Expr(j) * flat(e.arg(), j + 1);
        return inner * d(e.arg());
      }
      case ExprKind::Bump:
        return d(e.arg());
    }
    return Expr(0);
  }
};

struct Substituter {
  std::span<const Expr> repl;
  std::unordered_map<const Node*, Expr> memo;

  Expr s(const Expr& e) {
    if (e.is_constant()) return e;
    if (auto it = memo.find(e.id()); it != memo.end()) return it->second;
    Expr r = compute(e);
    memo.emplace(e.id(), r);
    return r;
  }

  Expr compute(const Expr& e) {
    switch (e.kind()) {
      case ExprKind::Constant:
        return e;
      case ExprKind::Variable:
        if (static_cast<std::size_t>(e.param()) >= repl.size())
          throw Error(ErrorCode::DimMismatch, "substitution does not cover variable x" + std::to_string(e.param()));
        return repl[static_cast<std::size_t>(e.param())];
      case ExprKind::Sum: {
        std::vector<Expr> t;
        for (const auto& a : e.args()) t.push_back(s(a));
        return Expr::sum(std::move(t));
      }
      case ExprKind::Product: {
        std::vector<Expr> t;
        for (const auto& a : e.args()) t.push_back(s(a));
        return Expr::product(std::move(t));
      }
      case ExprKind::Power:
        return pow(s(e.arg()), e.param());
      case ExprKind::Exp:
        return exp(s(e.arg()));
      // Guard boxes refer to the old variables, so they are dropped; the
      // evaluation-time positivity check still applies.
      case ExprKind::Sqrt:
        return sqrt(s(e.arg()));
      case ExprKind::Recip:
        return recip(s(e.arg()));
      case ExprKind::Flat:
        return flat(s(e.arg()), e.param());
      case ExprKind::Bump:
        return s(e.arg());
    }
    return e;
  }
};

}  // namespace

Expr Expr::derivative(int var) const {
  Differentiator d{var, {}};
  return d.d(*this);
}

Expr Expr::derivative(const MultiIndex& alpha) const {
  Expr e = *this;
  for (int i = 0; i < alpha.dim(); ++i) {
    for (int k = 0; k < alpha[i]; ++k) e = e.derivative(i);
  }
  return e;
}

Expr Expr::substitute(std::span<const Expr> replacements) const {
  Substituter s{replacements, {}};
  return s.s(*this);
}

double Expr::evaluate(std::span<const double> x) const {
  if (arity() > static_cast<int>(x.size()))
    throw Error(ErrorCode::DimMismatch, "point has fewer coordinates than the expression uses");
  Tape tape(std::span<const Expr>(this, 1));
  double out = 0.0;
  tape.evaluate(x, std::span<double>(&out, 1));
  return out;
}

Rational Expr::evaluate_exact(std::span<const Rational> x) const {
  if (arity() > static_cast<int>(x.size()))
    throw Error(ErrorCode::DimMismatch, "point has fewer coordinates than the expression uses");
  Tape tape(std::span<const Expr>(this, 1));
  Rational out;
  tape.evaluate_exact(x, std::span<Rational>(&out, 1));
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.same_as(b)) return true;
  const Node* na = a.id();
  const Node* nb = b.id();
  if (na->hash != nb->hash || na->kind != nb->kind || na->param != nb->param) return false;
  if (na->kind == ExprKind::Constant) return na->value == nb->value;
  if (na->kind == ExprKind::Bump)
    return na->center == nb->center && na->r_in == nb->r_in && na->r_out == nb->r_out;
  if (na->args.size() != nb->args.size()) return false;
  for (std::size_t i = 0; i < na->args.size(); ++i)
    if (!structurally_equal(na->args[i], nb->args[i])) return false;
  return true;
}

std::string to_string(const Expr& e) {
  std::ostringstream os;
  std::function<void(const Expr&)> w = [&](const Expr& x) {
    switch (x.kind()) {
      case ExprKind::Constant:
        os << x.value().get_str();
        break;
      case ExprKind::Variable:
        os << 'x' << x.param();
        break;
      case ExprKind::Sum:
      case ExprKind::Product: {
        os << '(';
        const char* sep = x.kind() == ExprKind::Sum ? " + " : "*";
        for (std::size_t i = 0; i < x.args().size(); ++i) {
          if (i) os << sep;
          w(x.args()[i]);
        }
        os << ')';
        break;
      }
      case ExprKind::Power:
        w(x.arg());
        os << '^' << x.param();
        break;
      case ExprKind::Exp:
        os << "exp(";
        w(x.arg());
        os << ')';
        break;
      case ExprKind::Sqrt:
        os << "sqrt(";
        w(x.arg());
        os << ')';
        break;
      case ExprKind::Recip:
        os << "recip(";
        w(x.arg());
        os << ')';
        break;
      case ExprKind::Flat:
        os << "flat(";
        w(x.arg());
        os << ", " << x.param() << ')';
        break;
      case ExprKind::Bump:
        os << "bump(" << x.bump_inner() << ", " << x.bump_outer();
        for (double c : x.bump_center()) os << ", " << c;
        os << ')';
        break;
    }
  };
  w(e);
  return os.str();
}

// ---------------------------------------------------------------------------
// DefMap
// ---------------------------------------------------------------------------

std::vector<Rational> to_rational(std::span<const double> x) {
  std::vector<Rational> r;
  r.reserve(x.size());
  for (double v : x) r.emplace_back(v);
  return r;
}

std::vector<double> to_double(std::span<const Rational> x) {
  std::vector<double> r;
  r.reserve(x.size());
  for (const auto& v : x) r.push_back(v.get_d());
  return r;
}

DefMap::DefMap(int domain_dim, std::vector<Expr> components)
    : DefMap(domain_dim, std::move(components), Domain::whole(domain_dim)) {}

DefMap::DefMap(int domain_dim, std::vector<Expr> components, Domain domain)
    : domain_dim_(domain_dim), components_(std::move(components)), domain_(std::move(domain)) {
  if (domain_dim_ <= 0) throw Error(ErrorCode::InvalidArgument, "domain dimension must be positive");
  for (const auto& c : components_)
    if (c.arity() > domain_dim_)
      throw Error(ErrorCode::DimMismatch, "component uses x" + std::to_string(c.arity() - 1) +
                                              " but the domain has dimension " + std::to_string(domain_dim_));
  if (domain_.box.dim() == 0) domain_.box = Box::unbounded(domain_dim_);
  if (domain_.box.dim() != domain_dim_) throw Error(ErrorCode::DimMismatch, "domain box dimension mismatch");
  value_tape_ = std::make_shared<const Tape>(std::span<const Expr>(components_));
  std::vector<Expr> jac;
  jac.reserve(components_.size() * static_cast<std::size_t>(domain_dim_));
  for (const auto& c : components_)
    for (int j = 0; j < domain_dim_; ++j) jac.push_back(c.derivative(j));
  jacobian_tape_ = std::make_shared<const Tape>(std::span<const Expr>(jac));
}

DefMap DefMap::identity(int dim) {
  std::vector<Expr> c;
  for (int i = 0; i < dim; ++i) c.push_back(Expr::var(i));
  return DefMap(dim, std::move(c));
}

DefMap DefMap::linear(const Mat& a, const Vec& b) {
  std::vector<Expr> c;
  for (int i = 0; i < a.rows(); ++i) {
    std::vector<Expr> t{Expr(b(i))};
    for (int j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) t.push_back(Expr(a(i, j)) * Expr::var(j));
    c.push_back(Expr::sum(std::move(t)));
  }
  return DefMap(static_cast<int>(a.cols()), std::move(c));
}

bool DefMap::is_polynomial() const {
  return std::all_of(components_.begin(), components_.end(), [](const Expr& e) { return e.is_polynomial(); });
}

void DefMap::check_domain(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != domain_dim_)
    throw Error(ErrorCode::DimMismatch, "point dimension " + std::to_string(x.size()) + " != domain dimension " +
                                            std::to_string(domain_dim_));
  if (!domain_.contains(x)) throw Error(ErrorCode::OutOfDomain, "point outside the map's domain region");
}

Vec DefMap::evaluate(std::span<const double> x) const {
  check_domain(x);
  Vec out(codomain_dim());
  value_tape_->evaluate(x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

std::vector<Rational> DefMap::evaluate_exact(std::span<const Rational> x) const {
  check_domain(to_double(x));
  std::vector<Rational> out(static_cast<std::size_t>(codomain_dim()));
  value_tape_->evaluate_exact(x, out);
  return out;
}

Vec DefMap::partial(const MultiIndex& alpha, std::span<const double> x) const {
  if (alpha.dim() != domain_dim_) throw Error(ErrorCode::DimMismatch, "multi-index dimension mismatch");
  check_domain(x);
  std::vector<Expr> d;
  for (const auto& c : components_) d.push_back(c.derivative(alpha));
  Tape tape{std::span<const Expr>(d)};
  Vec out(codomain_dim());
  tape.evaluate(x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

std::vector<Rational> DefMap::partial_exact(const MultiIndex& alpha, std::span<const Rational> x) const {
  if (alpha.dim() != domain_dim_) throw Error(ErrorCode::DimMismatch, "multi-index dimension mismatch");
  check_domain(to_double(x));
  std::vector<Expr> d;
  for (const auto& c : components_) d.push_back(c.derivative(alpha));
  Tape tape{std::span<const Expr>(d)};
  std::vector<Rational> out(d.size());
  tape.evaluate_exact(x, out);
  return out;
}

Mat DefMap::jacobian(std::span<const double> x) const {
  check_domain(x);
  std::vector<double> flat_vals(components_.size() * static_cast<std::size_t>(domain_dim_));
  jacobian_tape_->evaluate(x, flat_vals);
  Mat j(codomain_dim(), domain_dim_);
  for (int r = 0; r < codomain_dim(); ++r)
    for (int c = 0; c < domain_dim_; ++c) j(r, c) = flat_vals[static_cast<std::size_t>(r * domain_dim_ + c)];
  return j;
}

std::vector<std::vector<Rational>> DefMap::jacobian_exact(std::span<const Rational> x) const {
  check_domain(to_double(x));
  std::vector<Rational> flat_vals(components_.size() * static_cast<std::size_t>(domain_dim_));
  jacobian_tape_->evaluate_exact(x, flat_vals);
  std::vector<std::vector<Rational>> j(components_.size());
  for (std::size_t r = 0; r < components_.size(); ++r)
    j[r].assign(flat_vals.begin() + static_cast<long>(r * static_cast<std::size_t>(domain_dim_)),
                flat_vals.begin() + static_cast<long>((r + 1) * static_cast<std::size_t>(domain_dim_)));
  return j;
}

DefMap DefMap::compose(const DefMap& inner) const {
  if (inner.codomain_dim() != domain_dim_)
    throw Error(ErrorCode::DimMismatch, "composition dimension mismatch");
  std::vector<Expr> c;
  for (const auto& e : components_) c.push_back(e.substitute(inner.components()));
  return DefMap(inner.domain_dim(), std::move(c), inner.domain());
}

DefMap DefMap::with_domain(Domain domain) const { return DefMap(domain_dim_, components_, std::move(domain)); }

// ---------------------------------------------------------------------------
// DerivativeTable
// ---------------------------------------------------------------------------

DerivativeTable::DerivativeTable(const DefMap& f, int max_order)
    : map_(f), max_order_(max_order), indices_(multi_indices(f.domain_dim(), max_order)) {
  exprs_.resize(static_cast<std::size_t>(f.codomain_dim()));
  std::vector<Expr> all;
  for (int c = 0; c < f.codomain_dim(); ++c) {
    auto& row = exprs_[static_cast<std::size_t>(c)];
    row.reserve(indices_.size());
    for (const auto& alpha : indices_) {
      const int i = alpha.first_nonzero();
      if (i < 0) {
        row.push_back(f.component(c));
        continue;
      }
      auto e = alpha.entries();
      --e[static_cast<std::size_t>(i)];
      const auto parent = MultiIndex(std::move(e)).rank();
      row.push_back(row[parent].derivative(i));
    }
    all.insert(all.end(), row.begin(), row.end());
  }
  tape_ = std::make_shared<const Tape>(std::span<const Expr>(all));
}

const Expr& DerivativeTable::expr(int component, std::size_t index) const {
  return exprs_.at(static_cast<std::size_t>(component)).at(index);
}

Mat DerivativeTable::values(std::span<const double> x) const {
  if (!map_.domain().contains(x)) throw Error(ErrorCode::OutOfDomain, "point outside the map's domain region");
  const auto n = static_cast<std::size_t>(map_.codomain_dim());
  std::vector<double> flat_vals(n * indices_.size());
  tape_->evaluate(x, flat_vals);
  Mat out(map_.codomain_dim(), static_cast<long>(indices_.size()));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < indices_.size(); ++c)
      out(static_cast<long>(r), static_cast<long>(c)) = flat_vals[r * indices_.size() + c];
  return out;
}

std::vector<std::vector<Rational>> DerivativeTable::values_exact(std::span<const Rational> x) const {
  const auto n = static_cast<std::size_t>(map_.codomain_dim());
  std::vector<Rational> flat_vals(n * indices_.size());
  tape_->evaluate_exact(x, flat_vals);
  std::vector<std::vector<Rational>> out(n);
  for (std::size_t r = 0; r < n; ++r)
    out[r].assign(flat_vals.begin() + static_cast<long>(r * indices_.size()),
                  flat_vals.begin() + static_cast<long>((r + 1) * indices_.size()));
  return out;
}

GuardCertificate certify_guards(const DefMap& f, std::span<const Vec> points, double margin) {
  Tape tape{std::span<const Expr>(f.components())};
  GuardCertificate cert;
  cert.guard_count = tape.guard_count();
  cert.min_argument = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    const double g = tape.min_guard_argument(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    if (g < cert.min_argument || std::isnan(g)) {
      cert.min_argument = g;
      cert.worst_point = p;
    }
  }
  cert.certified = cert.guard_count == 0 || cert.min_argument > margin;
  return cert;
}

}  // namespace dtrans
