#include "dtrans/parse.hpp"

#include <cctype>
#include <cmath>
#include <limits>

namespace dtrans {

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorCode::SchemaError, msg); }

class InfixParser {
 public:
  explicit InfixParser(std::string_view s) : s_(s) {}

  Expr parse() {
    Expr e = expression();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    schema_error("expression \"" + std::string(s_) + "\", column " + std::to_string(pos_ + 1) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr expression() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+'))
        terms.push_back(term());
      else if (accept('-'))
        terms.push_back(-term());
      else
        break;
    }
    return Expr::sum(std::move(terms));
  }

  Expr term() {
    std::vector<Expr> factors{unary()};
    for (;;) {
      if (accept('*'))
        factors.push_back(unary());
      else if (accept('/'))
        factors.push_back(recip(unary()));
      else
        break;
    }
    return Expr::product(std::move(factors));
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      skip();
      const std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("exponent must be a non-negative integer");
      return pow(base, std::stoi(std::string(s_.substr(start, pos_ - start))));
    }
    return base;
  }

  std::string_view number_token() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      }
    }
    return s_.substr(start, pos_ - start);
  }

  double real_argument() {
    skip();
    bool neg = false;
    if (accept('-')) neg = true;
    skip();
    const auto tok = number_token();
    if (tok.empty()) fail("expected a number");
    const double v = parse_rational(tok).get_d();
    return neg ? -v : v;
  }

  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expression();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr(parse_rational(number_token()));
    if (!std::isalpha(static_cast<unsigned char>(c))) fail(std::string("unexpected '") + c + "'");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    if (name == "x" || name == "y" || name == "z") return Expr::var(name[0] == 'x' ? 0 : name[0] == 'y' ? 1 : 2);
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
      const int idx = std::stoi(name.substr(1));
      if (idx > 63) fail("variable index above 63");
      return Expr::var(idx);
    }
    if (name == "exp" || name == "sqrt" || name == "recip") {
      expect('(');
      Expr a = expression();
      expect(')');
      if (name == "exp") return exp(a);
      if (name == "sqrt") return sqrt(a);
      return recip(a);
    }
    if (name == "flat") {
      expect('(');
      Expr a = expression();
      int j = 0;
      if (accept(',')) j = static_cast<int>(real_argument());
      expect(')');
      return flat(a, j);
    }
    if (name == "bump") {
      expect('(');
      const double r_in = real_argument();
      expect(',');
      const double r_out = real_argument();
      std::vector<double> center;
      while (accept(',')) center.push_back(real_argument());
      expect(')');
      if (center.empty()) fail("bump needs at least one center coordinate");
      return bump(std::move(center), r_in, r_out);
    }
    fail("unknown name '" + name + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

Rational pow10(long e) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(e < 0 ? -e : e));
  return e < 0 ? Rational(mpz_class(1), p) : Rational(p);
}

const Json& field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing field \"") + key + "\"");
  return *it;
}

std::optional<Box> guard_from(const Json& j) {
  if (auto it = j.find("guard"); it != j.end()) return box_from_json(*it);
  return std::nullopt;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string t(text);
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
  while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
  if (t.empty()) schema_error("empty number");
  if (auto slash = t.find('/'); slash != std::string::npos) {
    const Rational num = parse_rational(t.substr(0, slash));
    const Rational den = parse_rational(t.substr(slash + 1));
    if (den == 0) schema_error("zero denominator in \"" + t + "\"");
    Rational r = num / den;
    r.canonicalize();
    return r;
  }
  bool neg = false;
  std::size_t i = 0;
  if (t[0] == '-' || t[0] == '+') {
    neg = t[0] == '-';
    i = 1;
  }
  std::string digits;
  long scale = 0;
  bool seen_dot = false;
  bool any = false;
  for (; i < t.size(); ++i) {
    const char c = t[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits += c;
      any = true;
      if (seen_dot) --scale;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!any) schema_error("bad number \"" + t + "\"");
  if (i < t.size()) {
    if (t[i] != 'e' && t[i] != 'E') schema_error("bad number \"" + t + "\"");
    std::size_t used = 0;
    long e = 0;
    try {
      e = std::stol(t.substr(i + 1), &used);
    } catch (const std::exception&) {
      schema_error("bad exponent in \"" + t + "\"");
    }
    if (i + 1 + used != t.size()) schema_error("bad number \"" + t + "\"");
    if (e > 4000 || e < -4000) schema_error("exponent out of range in \"" + t + "\"");
    scale += e;
  }
  Rational r(mpz_class(digits, 10));
  r *= pow10(scale);
  r.canonicalize();
  return neg ? Rational(-r) : r;
}

Json rational_to_json(const Rational& r) {
  if (r.get_den() == 1 && r.get_num().fits_slong_p()) return r.get_num().get_si();
  return r.get_str();
}

Rational rational_from_json(const Json& j) {
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_number()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) schema_error("non-finite number");
    return Rational(d);
  }
  if (j.is_string()) return parse_rational(j.get<std::string>());
  schema_error("expected a number");
}

Expr parse_expr(std::string_view text) { return InfixParser(text).parse(); }

Expr expr_from_json(const Json& j) {
  if (j.is_string()) return parse_expr(j.get<std::string>());
  if (j.is_number()) return Expr(rational_from_json(j));
  if (!j.is_object()) schema_error("expression must be a string, number or object");
  const std::string op = field(j, "op").get<std::string>();
  auto args = [&]() {
    std::vector<Expr> a;
    const Json& arr = field(j, "args");
    if (!arr.is_array()) schema_error("\"args\" must be an array");
    for (const auto& x : arr) a.push_back(expr_from_json(x));
    return a;
  };
  if (op == "const") return Expr(rational_from_json(field(j, "value")));
  if (op == "var") {
    const int i = field(j, "index").get<int>();
    if (i < 0 || i > 63) schema_error("variable index out of range");
    return Expr::var(i);
  }
  if (op == "add") return Expr::sum(args());
  if (op == "mul") return Expr::product(args());
  if (op == "pow") {
    const int n = field(j, "exp").get<int>();
    if (n < 0) schema_error("pow exponent must be non-negative");
    return pow(expr_from_json(field(j, "arg")), n);
  }
  if (op == "exp") return exp(expr_from_json(field(j, "arg")));
  if (op == "sqrt") return sqrt(expr_from_json(field(j, "arg")), guard_from(j));
  if (op == "recip") return recip(expr_from_json(field(j, "arg")), guard_from(j));
  if (op == "flat") return flat(expr_from_json(field(j, "arg")), j.value("power", 0));
  if (op == "bump") {
    std::vector<double> c;
    for (const auto& v : field(j, "center")) c.push_back(double_from_json(v));
    return bump(std::move(c), double_from_json(field(j, "r_in")), double_from_json(field(j, "r_out")));
  }
  schema_error("unknown op \"" + op + "\"");
}

Json expr_to_json(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Constant: {
      const Json v = rational_to_json(e.value());
      if (v.is_number()) return v;
      return Json{{"op", "const"}, {"value", v}};
    }
    case ExprKind::Variable:
      return Json{{"op", "var"}, {"index", e.param()}};
    case ExprKind::Sum:
    case ExprKind::Product: {
      Json a = Json::array();
      for (const auto& x : e.args()) a.push_back(expr_to_json(x));
      return Json{{"op", e.kind() == ExprKind::Sum ? "add" : "mul"}, {"args", a}};
    }
    case ExprKind::Power:
      return Json{{"op", "pow"}, {"arg", expr_to_json(e.arg())}, {"exp", e.param()}};
    case ExprKind::Exp:
      return Json{{"op", "exp"}, {"arg", expr_to_json(e.arg())}};
    case ExprKind::Sqrt:
    case ExprKind::Recip: {
      Json o{{"op", e.kind() == ExprKind::Sqrt ? "sqrt" : "recip"}, {"arg", expr_to_json(e.arg())}};
      if (e.guard()) o["guard"] = box_to_json(*e.guard());
      return o;
    }
    case ExprKind::Flat: {
      Json o{{"op", "flat"}, {"arg", expr_to_json(e.arg())}};
      if (e.param() != 0) o["power"] = e.param();
      return o;
    }
    case ExprKind::Bump: {
      Json c = Json::array();
      for (double v : e.bump_center()) c.push_back(double_to_json(v));
      return Json{{"op", "bump"}, {"center", c}, {"r_in", e.bump_inner()}, {"r_out", e.bump_outer()}};
    }
  }
  return nullptr;
}

Json double_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double double_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return parse_rational(s).get_d();
  }
  schema_error("expected a number");
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) schema_error("expected an array of numbers");
  Vec v(static_cast<long>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<long>(i)) = double_from_json(j[i]);
  return v;
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(double_to_json(v(i)));
  return a;
}

Box box_from_json(const Json& j) {
  Box b;
  for (const auto& v : field(j, "lo")) b.lo.push_back(double_from_json(v));
  for (const auto& v : field(j, "hi")) b.hi.push_back(double_from_json(v));
  if (b.lo.size() != b.hi.size()) schema_error("box lo/hi lengths differ");
  for (std::size_t i = 0; i < b.lo.size(); ++i)
    if (!(b.lo[i] <= b.hi[i])) schema_error("box has lo > hi");
  return b;
}

Json box_to_json(const Box& b) {
  Json lo = Json::array(), hi = Json::array();
  for (double v : b.lo) lo.push_back(double_to_json(v));
  for (double v : b.hi) hi.push_back(double_to_json(v));
  return Json{{"lo", lo}, {"hi", hi}};
}

DefMap map_from_json(const Json& j) {
  if (!j.is_object()) schema_error("map must be an object");
  const int m = field(j, "domain_dim").get<int>();
  if (m <= 0) schema_error("domain_dim must be positive");
  std::vector<Expr> comps;
  for (const auto& c : field(j, "components")) comps.push_back(expr_from_json(c));
  Domain d = Domain::whole(m);
  if (auto it = j.find("box"); it != j.end()) d.box = box_from_json(*it);
  if (auto it = j.find("inequalities"); it != j.end())
    for (const auto& c : *it) d.inequalities.push_back(expr_from_json(c));
  try {
    return DefMap(m, std::move(comps), std::move(d));
  } catch (const Error& e) {
    schema_error(e.what());
  }
}

Json map_to_json(const DefMap& f) {
  Json c = Json::array();
  for (const auto& e : f.components()) c.push_back(expr_to_json(e));
  Json o{{"domain_dim", f.domain_dim()}, {"components", c}};
  const Box& b = f.domain().box;
  bool whole = true;
  for (std::size_t i = 0; i < b.lo.size(); ++i)
    if (std::isfinite(b.lo[i]) || std::isfinite(b.hi[i])) whole = false;
  if (!whole) o["box"] = box_to_json(b);
  if (!f.domain().inequalities.empty()) {
    Json g = Json::array();
    for (const auto& e : f.domain().inequalities) g.push_back(expr_to_json(e));
    o["inequalities"] = g;
  }
  return o;
}

}  // namespace dtrans
