#pragma once

// Independent reference computations used by the tests.  Nothing here calls
// the symbolic differentiation or jet code under test.

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dtrans/expr.hpp"
#include "dtrans/io.hpp"
#include "dtrans/random.hpp"

namespace oracle {

using dtrans::Expr;
using dtrans::ExprKind;
using dtrans::Rational;
using dtrans::Vec;

inline std::string fixture(const std::string& name) { return std::string(DTRANS_SOURCE_DIR) + "/fixtures/" + name; }

inline dtrans::Problem load_problem(const std::string& name) {
  return dtrans::problem_from_document(dtrans::JsonDocument::load(fixture(name)));
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// Central difference of g along coordinate i, step scaled to |x_i|.
template <class G>
double central_difference(const G& g, std::vector<double> x, int i) {
  const double h = 1e-5 * std::max(1.0, std::abs(x[static_cast<std::size_t>(i)]));
  auto xp = x, xm = x;
  xp[static_cast<std::size_t>(i)] += h;
  xm[static_cast<std::size_t>(i)] -= h;
  return (g(xp) - g(xm)) / (2 * h);
}

// Sparse polynomial over Q in m variables: exponent vector -> coefficient.
struct Poly {
  int m = 0;
  std::map<std::vector<int>, Rational> terms;

  static Poly constant(int m, const Rational& c) {
    Poly p{m, {}};
    if (c != 0) p.terms[std::vector<int>(static_cast<std::size_t>(m), 0)] = c;
    return p;
  }
  static Poly var(int m, int i) {
    Poly p{m, {}};
    std::vector<int> e(static_cast<std::size_t>(m), 0);
    e[static_cast<std::size_t>(i)] = 1;
    p.terms[e] = 1;
    return p;
  }
  Poly operator+(const Poly& o) const {
    Poly r = *this;
    for (const auto& [e, c] : o.terms) {
      r.terms[e] += c;
      if (r.terms[e] == 0) r.terms.erase(e);
    }
    return r;
  }
  Poly operator*(const Poly& o) const {
    Poly r{m, {}};
    for (const auto& [a, ca] : terms)
      for (const auto& [b, cb] : o.terms) {
        std::vector<int> e(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) e[i] = a[i] + b[i];
        r.terms[e] += ca * cb;
        if (r.terms[e] == 0) r.terms.erase(e);
      }
    return r;
  }
  Poly derivative(int i) const {
    Poly r{m, {}};
    for (const auto& [e, c] : terms) {
      const int k = e[static_cast<std::size_t>(i)];
      if (k == 0) continue;
      auto f = e;
      f[static_cast<std::size_t>(i)] = k - 1;
      r.terms[f] += c * k;
    }
    return r;
  }
  Rational evaluate(const std::vector<Rational>& x) const {
    Rational s = 0;
    for (const auto& [e, c] : terms) {
      Rational t = c;
      for (std::size_t i = 0; i < e.size(); ++i)
        for (int k = 0; k < e[i]; ++k) t *= x[i];
      s += t;
    }
    return s;
  }
};

// Expands a polynomial expression tree by walking its nodes.
inline Poly expand(const Expr& e, int m) {
  switch (e.kind()) {
    case ExprKind::Constant:
      return Poly::constant(m, e.value());
    case ExprKind::Variable:
      return Poly::var(m, e.param());
    case ExprKind::Sum: {
      Poly r = Poly::constant(m, 0);
      for (const auto& a : e.args()) r = r + expand(a, m);
      return r;
    }
    case ExprKind::Product: {
      Poly r = Poly::constant(m, 1);
      for (const auto& a : e.args()) r = r * expand(a, m);
      return r;
    }
    case ExprKind::Power: {
      Poly b = expand(e.arg(), m), r = Poly::constant(m, 1);
      for (int k = 0; k < e.param(); ++k) r = r * b;
      return r;
    }
    default:
      throw std::runtime_error("not a polynomial");
  }
}

inline std::vector<Rational> random_rational_point(dtrans::Rng& rng, int m) {
  std::vector<Rational> x;
  for (int i = 0; i < m; ++i) {
    Rational q(static_cast<long>(rng.next() % 41) - 20, static_cast<long>(rng.next() % 7) + 1);
    q.canonicalize();
    x.push_back(q);
  }
  return x;
}

}  // namespace oracle
