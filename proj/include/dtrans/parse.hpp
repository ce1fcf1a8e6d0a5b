#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "dtrans/expr.hpp"

namespace dtrans {

using Json = nlohmann::json;

// Infix syntax: numbers (decimals are read exactly), x0..x63 (x, y, z alias
// x0, x1, x2), + - * / ^ with non-negative integer exponents, and the calls
// exp(e), sqrt(e), recip(e), flat(e, j), bump(r_in, r_out, c0, c1, ...).
// a/b is read as a * recip(b).  Throws SchemaError on bad input.
Expr parse_expr(std::string_view text);

// Accepts an infix string, a JSON number, or a tree object
// {"op": "...", ...}; see docs/format.md.
Expr expr_from_json(const Json& j);
Json expr_to_json(const Expr& e);

// Exact decimal / fraction reading: "3", "-0.25", "1e-3", "2/3".
Rational parse_rational(std::string_view text);
Json rational_to_json(const Rational& r);
Rational rational_from_json(const Json& j);

// {"domain_dim": m, "components": [expr...], "box"?: {"lo","hi"},
//  "inequalities"?: [expr...]}
DefMap map_from_json(const Json& j);
Json map_to_json(const DefMap& f);

Box box_from_json(const Json& j);
Json box_to_json(const Box& b);

// Numbers that are not finite are written as the strings "inf" / "-inf".
Json double_to_json(double v);
double double_from_json(const Json& j);
Vec vec_from_json(const Json& j);
Json vec_to_json(const Vec& v);

}  // namespace dtrans
