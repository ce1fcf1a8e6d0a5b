#pragma once

#include <span>
#include <string>
#include <vector>

#include "dtrans/expr.hpp"

namespace dtrans {

// Straight-line program for a batch of expressions.  Shared and structurally
// identical subexpressions are evaluated once.
class Tape {
 public:
  explicit Tape(std::span<const Expr> outputs);

  std::size_t output_count() const { return outputs_.size(); }
  std::size_t size() const { return code_.size(); }
  bool polynomial() const { return polynomial_; }

  // Throws GuardViolation when a sqrt/recip argument is not positive.
  void evaluate(std::span<const double> x, std::span<double> out) const;
  // Throws NotPolynomial when the tape holds a non-polynomial primitive.
  void evaluate_exact(std::span<const Rational> x, std::span<Rational> out) const;
  // Minimum over all sqrt/recip arguments at x; +inf when there are none.
  // Guard failures do not throw here.
  double min_guard_argument(std::span<const double> x) const;
  std::size_t guard_count() const { return guards_.size(); }

 private:
  enum class Op : unsigned char { Const, Var, Sum, Product, Power, Exp, Sqrt, Recip, Flat };
  struct Instr {
    Op op = Op::Const;
    int param = 0;
    double value = 0.0;
    int rational = -1;
    std::vector<int> args;
  };

  friend struct TapeCompiler;
  void run(std::span<const double> x, std::vector<double>& vals, bool strict) const;

  std::vector<Instr> code_;
  std::vector<Rational> rationals_;
  std::vector<int> outputs_;
  std::vector<int> guards_;
  bool polynomial_ = true;
};

double flat_value(double u, int power);

}  // namespace dtrans
