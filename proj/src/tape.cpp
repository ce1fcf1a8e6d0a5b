#include "tape.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace dtrans {

double flat_value(double u, int power) {
  if (!(u > 0.0)) return 0.0;
  if (power == 0) return std::exp(-1.0 / u);
  return std::exp(-1.0 / u - power * std::log(u));
}

struct TapeCompiler {
  Tape& tape;
  std::unordered_map<const detail::Node*, int> by_pointer;
  std::unordered_map<std::string, int> by_structure;

  int emit(Tape::Instr ins) {
    std::string key;
    key.reserve(16 + 8 * ins.args.size());
    key += std::to_string(static_cast<int>(ins.op));
    key += ':';
    key += std::to_string(ins.param);
    if (ins.op == Tape::Op::Const) {
      key += ':';
      key += tape.rationals_[static_cast<std::size_t>(ins.rational)].get_str();
    }
    for (int a : ins.args) {
      key += ',';
      key += std::to_string(a);
    }
    if (auto it = by_structure.find(key); it != by_structure.end()) {
      if (ins.op == Tape::Op::Const) tape.rationals_.pop_back();
      return it->second;
    }
    const int id = static_cast<int>(tape.code_.size());
    if (ins.op == Tape::Op::Sqrt || ins.op == Tape::Op::Recip) tape.guards_.push_back(id);
    if (ins.op == Tape::Op::Exp || ins.op == Tape::Op::Sqrt || ins.op == Tape::Op::Recip ||
        ins.op == Tape::Op::Flat)
      tape.polynomial_ = false;
    tape.code_.push_back(std::move(ins));
    by_structure.emplace(std::move(key), id);
    return id;
  }

  int compile(const Expr& e) {
    if (auto it = by_pointer.find(e.id()); it != by_pointer.end()) return it->second;
    Tape::Instr ins;
    switch (e.kind()) {
      case ExprKind::Constant:
        ins.op = Tape::Op::Const;
        ins.value = e.value().get_d();
        ins.rational = static_cast<int>(tape.rationals_.size());
        tape.rationals_.push_back(e.value());
        break;
      case ExprKind::Variable:
        ins.op = Tape::Op::Var;
        ins.param = e.param();
        break;
      case ExprKind::Sum:
      case ExprKind::Product:
        ins.op = e.kind() == ExprKind::Sum ? Tape::Op::Sum : Tape::Op::Product;
        for (const auto& a : e.args()) ins.args.push_back(compile(a));
        break;
      case ExprKind::Power:
        ins.op = Tape::Op::Power;
        ins.param = e.param();
        ins.args.push_back(compile(e.arg()));
        break;
      case ExprKind::Exp:
        ins.op = Tape::Op::Exp;
        ins.args.push_back(compile(e.arg()));
        break;
      case ExprKind::Sqrt:
        ins.op = Tape::Op::Sqrt;
        ins.args.push_back(compile(e.arg()));
        break;
      case ExprKind::Recip:
        ins.op = Tape::Op::Recip;
        ins.args.push_back(compile(e.arg()));
        break;
      case ExprKind::Flat:
        ins.op = Tape::Op::Flat;
        ins.param = e.param();
        ins.args.push_back(compile(e.arg()));
        break;
      case ExprKind::Bump: {
        const int id = compile(e.arg());
        by_pointer.emplace(e.id(), id);
        return id;
      }
    }
    const int id = emit(std::move(ins));
    by_pointer.emplace(e.id(), id);
    return id;
  }
};

Tape::Tape(std::span<const Expr> outputs) {
  TapeCompiler c{*this, {}, {}};
  outputs_.reserve(outputs.size());
  for (const auto& e : outputs) outputs_.push_back(c.compile(e));
}

void Tape::run(std::span<const double> x, std::vector<double>& vals, bool strict) const {
  vals.resize(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    double v = 0.0;
    switch (ins.op) {
      case Op::Const:
        v = ins.value;
        break;
      case Op::Var:
        if (static_cast<std::size_t>(ins.param) >= x.size())
          throw Error(ErrorCode::DimMismatch, "point is missing coordinate x" + std::to_string(ins.param));
        v = x[static_cast<std::size_t>(ins.param)];
        break;
      case Op::Sum:
        for (int a : ins.args) v += vals[static_cast<std::size_t>(a)];
        break;
      case Op::Product:
        v = 1.0;
        for (int a : ins.args) v *= vals[static_cast<std::size_t>(a)];
        break;
      case Op::Power: {
        const double b = vals[static_cast<std::size_t>(ins.args[0])];
        v = 1.0;
        for (int k = 0; k < ins.param; ++k) v *= b;
        break;
      }
      case Op::Exp:
        v = std::exp(vals[static_cast<std::size_t>(ins.args[0])]);
        break;
      case Op::Sqrt:
      case Op::Recip: {
        const double u = vals[static_cast<std::size_t>(ins.args[0])];
        if (!(u > 0.0)) {
          if (strict)
            throw Error(ErrorCode::GuardViolation, std::string(ins.op == Op::Sqrt ? "sqrt" : "recip") +
                                                       " argument is not positive (" + std::to_string(u) + ")");
          v = std::numeric_limits<double>::quiet_NaN();
        } else {
          v = ins.op == Op::Sqrt ? std::sqrt(u) : 1.0 / u;
        }
        break;
      }
      case Op::Flat:
        v = flat_value(vals[static_cast<std::size_t>(ins.args[0])], ins.param);
        break;
    }
    vals[i] = v;
  }
}

void Tape::evaluate(std::span<const double> x, std::span<double> out) const {
  std::vector<double> vals;
  run(x, vals, true);
  for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = vals[static_cast<std::size_t>(outputs_[i])];
}

void Tape::evaluate_exact(std::span<const Rational> x, std::span<Rational> out) const {
  if (!polynomial_) throw Error(ErrorCode::NotPolynomial, "exact evaluation requires polynomial data");
  std::vector<Rational> vals(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    Rational v(0);
    switch (ins.op) {
      case Op::Const:
        v = rationals_[static_cast<std::size_t>(ins.rational)];
        break;
      case Op::Var:
        if (static_cast<std::size_t>(ins.param) >= x.size())
          throw Error(ErrorCode::DimMismatch, "point is missing coordinate x" + std::to_string(ins.param));
        v = x[static_cast<std::size_t>(ins.param)];
        break;
      case Op::Sum:
        for (int a : ins.args) v += vals[static_cast<std::size_t>(a)];
        break;
      case Op::Product:
        v = 1;
        for (int a : ins.args) v *= vals[static_cast<std::size_t>(a)];
        break;
      case Op::Power:
        v = 1;
        for (int k = 0; k < ins.param; ++k) v *= vals[static_cast<std::size_t>(ins.args[0])];
        break;
      default:
        throw Error(ErrorCode::NotPolynomial, "exact evaluation requires polynomial data");
    }
    vals[i] = std::move(v);
  }
  for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = vals[static_cast<std::size_t>(outputs_[i])];
}

double Tape::min_guard_argument(std::span<const double> x) const {
  std::vector<double> vals;
  run(x, vals, false);
  double m = std::numeric_limits<double>::infinity();
  for (int g : guards_) {
    const double u = vals[static_cast<std::size_t>(code_[static_cast<std::size_t>(g)].args[0])];
    if (std::isnan(u)) return u;
    m = std::min(m, u);
  }
  return m;
}

}  // namespace dtrans
