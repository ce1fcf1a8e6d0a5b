#include "dtrans/io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace dtrans {

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(ErrorCode::SchemaError, msg); }

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Walks syntactically valid JSON and records the offset of every value.
class Locator {
 public:
  Locator(const std::string& text, std::map<std::string, std::size_t>& out) : s_(text), out_(out) {}
  void run() { value(""); }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  std::string string() {
    std::string v;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') {
        ++i_;
        if (i_ < s_.size() && s_[i_] == 'u') {
          v += '?';
          i_ += 4;
        } else if (i_ < s_.size()) {
          const char c = s_[i_];
          v += c == 'n' ? '\n' : c == 't' ? '\t' : c == 'r' ? '\r' : c == 'b' ? '\b' : c == 'f' ? '\f' : c;
        }
        ++i_;
        continue;
      }
      v += s_[i_++];
    }
    ++i_;
    return v;
  }
  void value(const std::string& ptr) {
    ws();
    out_[ptr] = i_;
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      ws();
      if (s_[i_] == '}') {
        ++i_;
        return;
      }
      for (;;) {
        ws();
        const std::string key = string();
        ws();
        ++i_;  // ':'
        value(ptr + "/" + escape_token(key));
        ws();
        if (s_[i_++] == '}') return;
      }
    }
    if (c == '[') {
      ++i_;
      ws();
      if (s_[i_] == ']') {
        ++i_;
        return;
      }
      for (std::size_t k = 0;; ++k) {
        value(ptr + "/" + std::to_string(k));
        ws();
        if (s_[i_++] == ']') return;
      }
    }
    if (c == '"') {
      string();
      return;
    }
    while (i_ < s_.size() && s_[i_] != ',' && s_[i_] != '}' && s_[i_] != ']' &&
           !std::isspace(static_cast<unsigned char>(s_[i_])))
      ++i_;
  }

  const std::string& s_;
  std::map<std::string, std::size_t>& out_;
  std::size_t i_ = 0;
};

SourceLocation offset_to_location(const std::string& text, std::size_t offset) {
  SourceLocation loc{1, 1};
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++loc.line;
      loc.column = 1;
    } else {
      ++loc.column;
    }
  }
  return loc;
}

}  // namespace

JsonDocument JsonDocument::parse(const std::string& text, std::string name) {
  JsonDocument d;
  d.name_ = std::move(name);
  d.text_ = text;
  try {
    d.root_ = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const SourceLocation loc = offset_to_location(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream os;
    os << d.name_ << ":" << loc.line << ":" << loc.column << ": malformed JSON";
    throw Error(ErrorCode::SchemaError, os.str());
  }
  Locator(d.text_, d.offsets_).run();
  return d;
}

JsonDocument JsonDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

SourceLocation JsonDocument::locate(const std::string& pointer) const {
  std::string p = pointer;
  for (;;) {
    const auto it = offsets_.find(p);
    if (it != offsets_.end()) return offset_to_location(text_, it->second);
    const auto slash = p.rfind('/');
    if (slash == std::string::npos) return {1, 1};
    p = p.substr(0, slash);
  }
}

const Json* JsonDocument::find(const std::string& pointer) const {
  try {
    const Json::json_pointer ptr(pointer);
    if (!root_.contains(ptr)) return nullptr;
    return &root_.at(ptr);
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

const Json& JsonDocument::at(const std::string& pointer) const {
  const Json* j = find(pointer);
  if (!j) fail(pointer, "missing value");
  return *j;
}

void JsonDocument::fail(const std::string& pointer, const std::string& message) const {
  const SourceLocation loc = locate(pointer);
  std::ostringstream os;
  os << name_ << ":" << loc.line << ":" << loc.column << ": " << (pointer.empty() ? "/" : pointer) << ": " << message;
  throw Error(ErrorCode::SchemaError, os.str());
}

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) schema_error("expected an object");
  const auto it = j.find(key);
  if (it == j.end()) schema_error(std::string("missing field \"") + key + "\"");
  return *it;
}

std::vector<Expr> exprs_from_json(const Json& j) {
  if (!j.is_array()) schema_error("expected an array of expressions");
  std::vector<Expr> out;
  for (const auto& e : j) out.push_back(expr_from_json(e));
  return out;
}

Json exprs_to_json(const std::vector<Expr>& es) {
  Json a = Json::array();
  for (const auto& e : es) a.push_back(expr_to_json(e));
  return a;
}

}  // namespace

Stratum stratum_from_json(const Json& j, int ambient_dim) {
  const std::string id = field(j, "id").get<std::string>();
  const int dim = field(j, "dim").get<int>();
  std::optional<Box> bounds;
  if (j.contains("bounds")) bounds = box_from_json(j.at("bounds"));
  if (j.contains("chart")) {
    ParamPatch p{map_from_json(j.at("chart")), box_from_json(field(j, "params"))};
    if (p.chart.codomain_dim() != ambient_dim) schema_error("chart of " + id + " has the wrong target dimension");
    return Stratum(id, dim, std::move(p), bounds);
  }
  ImplicitPatch p;
  if (j.contains("equations")) p.equations = exprs_from_json(j.at("equations"));
  if (j.contains("inequalities")) p.inequalities = exprs_from_json(j.at("inequalities"));
  return Stratum(id, ambient_dim, dim, std::move(p), bounds);
}

Json stratum_to_json(const Stratum& s) {
  Json o{{"id", s.id()}, {"dim", s.dim()}};
  if (s.is_implicit()) {
    o["equations"] = exprs_to_json(s.implicit().equations);
    o["inequalities"] = exprs_to_json(s.implicit().inequalities);
  } else {
    o["chart"] = map_to_json(s.parametric().chart);
    o["params"] = box_to_json(s.parametric().params);
  }
  if (s.bounds()) o["bounds"] = box_to_json(*s.bounds());
  return o;
}

Stratification stratification_from_json(const Json& j) {
  const int n = field(j, "ambient_dim").get<int>();
  if (n <= 0) schema_error("ambient_dim must be positive");
  std::vector<Stratum> strata;
  for (const auto& s : field(j, "strata")) strata.push_back(stratum_from_json(s, n));
  std::vector<std::pair<std::string, std::string>> adj;
  if (j.contains("adjacency"))
    for (const auto& p : j.at("adjacency")) {
      if (!p.is_array() || p.size() != 2) schema_error("adjacency entries are [X, Y] pairs");
      adj.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
  std::optional<Box> bounds;
  if (j.contains("bounds")) bounds = box_from_json(j.at("bounds"));
  return Stratification(n, std::move(strata), std::move(adj), bounds);
}

Json stratification_to_json(const Stratification& s) {
  Json strata = Json::array();
  for (const auto& st : s.strata()) strata.push_back(stratum_to_json(st));
  Json adj = Json::array();
  for (const auto& [x, y] : s.adjacency()) adj.push_back(Json::array({x, y}));
  Json o{{"ambient_dim", s.ambient_dim()}, {"strata", strata}, {"adjacency", adj}};
  if (s.bounds()) o["bounds"] = box_to_json(*s.bounds());
  return o;
}

RegionSampler sampler_from_json(const Json& j) {
  RegionSampler s;
  s.box = box_from_json(field(j, "box"));
  if (j.contains("points_per_dim")) s.points_per_dim = j.at("points_per_dim").get<int>();
  if (j.contains("points"))
    for (const auto& p : j.at("points")) {
      s.points.push_back(vec_from_json(p));
      if (s.points.back().size() != s.box.dim()) schema_error("sampler point has the wrong dimension");
    }
  if (j.contains("random_points")) s.random_points = j.at("random_points").get<int>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

Json sampler_to_json(const RegionSampler& s) {
  Json pts = Json::array();
  for (const auto& p : s.points) pts.push_back(vec_to_json(p));
  return Json{{"box", box_to_json(s.box)},
              {"points_per_dim", s.points_per_dim},
              {"points", pts},
              {"random_points", s.random_points},
              {"seed", s.seed}};
}

PinnedPoint pinned_from_json(const Json& j) {
  PinnedPoint p;
  p.x = field(j, "x").get<std::string>();
  p.y = field(j, "y").get<std::string>();
  p.point = vec_from_json(field(j, "point"));
  if (j.contains("probes"))
    for (const auto& pr : j.at("probes")) {
      const std::string label = pr.contains("label") ? pr.at("label").get<std::string>() : "probe";
      if (pr.contains("curve"))
        p.probes.push_back(ProbeCurve::explicit_curve(map_from_json(pr.at("curve")), p.point, label));
      else
        p.probes.push_back(ProbeCurve::projected_ray(p.point, vec_from_json(field(pr, "direction")), label));
    }
  return p;
}

Json pinned_to_json(const PinnedPoint& p) {
  Json probes = Json::array();
  for (const auto& pr : p.probes) {
    Json o{{"label", pr.label}};
    if (pr.curve) o["curve"] = map_to_json(*pr.curve);
    else o["direction"] = vec_to_json(pr.direction);
    probes.push_back(o);
  }
  return Json{{"x", p.x}, {"y", p.y}, {"point", vec_to_json(p.point)}, {"probes", probes}};
}

LinearSubspace subspace_from_json(const Json& j, int ambient_dim) {
  if (!j.is_array()) schema_error("a subspace is an array of spanning vectors");
  Mat a(ambient_dim, static_cast<long>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Vec v = vec_from_json(j[c]);
    if (v.size() != ambient_dim) schema_error("spanning vector has the wrong dimension");
    a.col(static_cast<long>(c)) = v;
  }
  return LinearSubspace::span_of(a);
}

Problem problem_from_document(const JsonDocument& doc) {
  const Json& root = doc.root();
  if (!root.is_object()) doc.fail("", "a problem is a JSON object");
  Problem p;
  p.version = doc.convert("/version", [](const Json& j) { return j.get<int>(); });
  if (p.version != kProblemVersion) doc.fail("/version", "unsupported version " + std::to_string(p.version));
  if (doc.find("/seed")) p.seed = doc.convert("/seed", [](const Json& j) { return j.get<std::uint64_t>(); });
  if (doc.find("/map")) p.map = doc.convert("/map", map_from_json);
  if (doc.find("/stratification")) p.stratification = doc.convert("/stratification", stratification_from_json);
  if (doc.find("/mode")) {
    p.mode = doc.convert("/mode", [](const Json& j) { return j.get<std::string>(); });
    if (p.mode != "point" && p.mode != "region" && p.mode != "jet")
      doc.fail("/mode", "mode must be \"point\", \"region\" or \"jet\"");
  }
  if (doc.find("/points"))
    p.points = doc.convert("/points", [](const Json& j) {
      std::vector<Vec> pts;
      for (const auto& v : j) pts.push_back(vec_from_json(v));
      return pts;
    });
  if (doc.find("/sampler")) p.sampler = doc.convert("/sampler", sampler_from_json);
  if (doc.find("/k")) p.k = doc.convert("/k", [](const Json& j) { return j.get<int>(); });
  if (doc.find("/l")) p.l = doc.convert("/l", [](const Json& j) { return j.get<int>(); });
  if (doc.find("/epsilon")) p.epsilon = doc.convert("/epsilon", expr_from_json);
  if (p.k < 0) doc.fail("/k", "k must be non-negative");
  if (p.map && p.sampler && p.sampler->box.dim() != p.map->domain_dim())
    doc.fail("/sampler/box", "sampler box dimension differs from the map's domain");
  for (std::size_t i = 0; i < p.points.size(); ++i)
    if (p.map && p.points[i].size() != p.map->domain_dim())
      doc.fail("/points/" + std::to_string(i), "point dimension differs from the map's domain");

  static const char* common[] = {"version", "seed", "map",    "stratification", "mode",
                                 "points",  "sampler", "k", "l",              "epsilon"};
  for (const auto& [key, value] : root.items()) {
    bool known = false;
    for (const char* c : common) known = known || key == c;
    if (!known) p.sections[key] = value;
  }
  return p;
}

Json problem_to_json(const Problem& p) {
  Json o = p.sections;
  o["version"] = p.version;
  if (p.seed) o["seed"] = *p.seed;
  if (p.map) o["map"] = map_to_json(*p.map);
  if (p.stratification) o["stratification"] = stratification_to_json(*p.stratification);
  o["mode"] = p.mode;
  if (!p.points.empty()) {
    Json pts = Json::array();
    for (const auto& v : p.points) pts.push_back(vec_to_json(v));
    o["points"] = pts;
  }
  if (p.sampler) o["sampler"] = sampler_to_json(*p.sampler);
  o["k"] = p.k;
  o["l"] = p.l;
  if (p.epsilon) o["epsilon"] = expr_to_json(*p.epsilon);
  return o;
}

// ---- reports ----------------------------------------------------------------

namespace {

Json vecs_to_json(const std::vector<Vec>& vs) {
  Json a = Json::array();
  for (const auto& v : vs) a.push_back(vec_to_json(v));
  return a;
}

Json doubles_to_json(const std::vector<double>& vs) {
  Json a = Json::array();
  for (double v : vs) a.push_back(double_to_json(v));
  return a;
}

}  // namespace

Json to_json(const LinearSubspace& s) {
  Json basis = Json::array();
  for (long c = 0; c < s.basis().cols(); ++c) basis.push_back(vec_to_json(s.basis().col(c)));
  return Json{{"ambient_dim", s.ambient_dim()}, {"dim", s.dim()}, {"basis", basis}};
}

Json to_json(const TransversalityVerdict& v) {
  Json o{{"x", vec_to_json(v.x)},
         {"y", vec_to_json(v.y)},
         {"stratum", v.stratum},
         {"status", std::string(to_string(v.status))},
         {"distance", double_to_json(v.distance)},
         {"ambiguous", v.ambiguous},
         {"exact", v.exact}};
  if (v.status != TransStatus::NotInStratum) o["witness"] = double_to_json(v.witness);
  return o;
}

Json to_json(const RegionReport& r) {
  Json strata = Json::array();
  for (const auto& s : r.strata) {
    Json vs = Json::array();
    for (const auto& v : s.verdicts) vs.push_back(to_json(v));
    strata.push_back(Json{{"id", s.id},
                          {"verdicts", vs},
                          {"not_in_stratum", s.not_in_stratum},
                          {"transverse", s.transverse},
                          {"fail", s.fail},
                          {"ambiguous", s.ambiguous},
                          {"min_margin", double_to_json(s.min_margin)}});
  }
  return Json{{"transverse", r.transverse}, {"samples", r.samples}, {"strata", strata}, {"errors", r.errors}};
}

Json to_json(const ValidationReport& r) {
  Json strata = Json::array();
  for (const auto& s : r.strata)
    strata.push_back(Json{{"id", s.id}, {"samples", s.samples}, {"certified", s.certified},
                          {"pass_rate", s.pass_rate()}});
  Json dis = Json::array();
  for (const auto& d : r.disjointness)
    dis.push_back(Json{{"first", d.first}, {"second", d.second}, {"witness", vec_to_json(d.witness)}});
  Json fr = Json::array();
  for (const auto& p : r.frontier)
    fr.push_back(Json{{"x", p.x}, {"y", p.y}, {"base", vec_to_json(p.base)},
                      {"best_distance", double_to_json(p.best_distance)}, {"passed", p.passed}});
  return Json{{"valid", r.valid}, {"strata", strata}, {"disjointness", dis}, {"frontier", fr}, {"problems", r.problems}};
}

Json to_json(const ProbeOutcome& o) {
  Json j{{"label", o.label},
         {"explicit", o.explicit_curve},
         {"valid", o.valid},
         {"converged", o.converged},
         {"deviation", double_to_json(o.deviation)},
         {"tail_gap", double_to_json(o.tail_gap)},
         {"deviations", doubles_to_json(o.deviations)}};
  if (!o.explicit_curve && o.direction.size() > 0) j["direction"] = vec_to_json(o.direction);
  if (!o.reason.empty()) j["reason"] = o.reason;
  if (o.limit) j["limit"] = to_json(*o.limit);
  return j;
}

Json to_json(const RegularityVerdict& v) {
  Json probes = Json::array();
  for (const auto& p : v.probes) probes.push_back(to_json(p));
  Json o{{"x", v.x},
         {"y", v.y_id},
         {"point", vec_to_json(v.y)},
         {"status", std::string(to_string(v.status))},
         {"deviation", double_to_json(v.deviation)},
         {"probes", probes}};
  if (v.witness) o["witness"] = v.probes[*v.witness].label;
  if (v.recheck_deviation) o["recheck_deviation"] = double_to_json(*v.recheck_deviation);
  return o;
}

Json to_json(const RegularityReport& r) {
  Json pairs = Json::array();
  for (const auto& p : r.pairs) {
    Json vs = Json::array();
    for (const auto& v : p.verdicts) vs.push_back(to_json(v));
    pairs.push_back(Json{{"x", p.x}, {"y", p.y}, {"status", std::string(to_string(p.status))}, {"verdicts", vs}});
  }
  return Json{{"status", std::string(to_string(r.status))}, {"pairs", pairs}};
}

Json to_json(const RefinementReport& r) {
  Json parent = Json::object();
  for (const auto& [f, c] : r.parent) parent[f] = c;
  Json maps = Json::array();
  for (const auto& m : r.maps)
    maps.push_back(Json{{"index", m.index},
                        {"fine_transverse", m.fine_transverse},
                        {"coarse_transverse", m.coarse_transverse},
                        {"violation", m.violation}});
  return Json{{"membership_samples", r.membership_samples},
              {"parent", parent},
              {"maps", maps},
              {"inclusion_holds", r.inclusion_holds}};
}

Json to_json(const PerturbResult& r) {
  return Json{{"g", map_to_json(r.g)},
              {"s", doubles_to_json(r.s)},
              {"draws", r.draws},
              {"rejections", r.rejections},
              {"R", r.R},
              {"C", rational_to_json(r.C)},
              {"phi", expr_to_json(r.phi)},
              {"phi_family", r.phi_family},
              {"neighborhood", Json{{"inside", r.neighborhood.inside}, {"margin", double_to_json(r.neighborhood.margin)}}},
              {"report", to_json(r.report)}};
}

Json to_json(const PrescribedResult& r) {
  Json frame = Json::array();
  for (long c = 0; c < r.frame.cols(); ++c) frame.push_back(vec_to_json(r.frame.col(c)));
  return Json{{"f", map_to_json(r.f)},
              {"x0", vec_to_json(r.x0)},
              {"s", doubles_to_json(r.s)},
              {"draws", r.draws},
              {"stratum", r.stratum},
              {"frame", frame},
              {"value_exact", r.value_exact},
              {"image_gap", double_to_json(r.image_gap)},
              {"report", to_json(r.report)}};
}

Json to_json(const RadiusEstimate& r) {
  return Json{{"radius", expr_to_json(r.radius)},
              {"family", r.family},
              {"scale", double_to_json(r.scale)},
              {"power", r.power},
              {"probes", r.probes},
              {"samples", vecs_to_json(r.samples)}};
}

Json to_json(const EscapeResult& r) {
  return Json{{"x_star", double_to_json(r.x_star)},
              {"certificate", double_to_json(static_cast<double>(r.certificate))},
              {"start", double_to_json(r.start)},
              {"doublings", r.doublings}};
}

Json to_json(const D0Result& r) {
  Json es = Json::array();
  for (const auto& e : r.entries) {
    Json o{{"epsilon", e.epsilon}, {"differs_at_10", e.differs_at_10}};
    o["i0"] = e.i0 ? Json(*e.i0) : Json(nullptr);
    es.push_back(o);
  }
  return Json{{"entries", es}, {"passed", r.passed}};
}

Json to_json(const OpennessResult& r) {
  Json lv = Json::array();
  for (const auto& l : r.levels)
    lv.push_back(Json{{"delta", double_to_json(l.delta)},
                      {"tested", l.tested},
                      {"transverse", l.transverse},
                      {"min_margin", double_to_json(l.min_margin)}});
  return Json{{"regularity", std::string(to_string(r.regularity))},
              {"levels", lv},
              {"stability_radius", double_to_json(r.stability_radius)}};
}

Json to_json(const TrotmanResult& r) {
  Json steps = Json::array();
  for (const auto& s : r.steps)
    steps.push_back(Json{{"i", s.i},
                         {"x_i", vec_to_json(s.x_i)},
                         {"value_gap", double_to_json(s.value_gap)},
                         {"image_gap", double_to_json(s.image_gap)},
                         {"sigma_min", double_to_json(s.sigma_min)},
                         {"status", std::string(to_string(s.status))},
                         {"jet_distance", double_to_json(s.jet_distance)}});
  return Json{{"x", r.x},
              {"y", r.y},
              {"point", vec_to_json(r.point)},
              {"deviation", double_to_json(r.deviation)},
              {"tau", to_json(r.tau)},
              {"h", to_json(r.h)},
              {"base", to_json(r.base)},
              {"base_transverse", r.base_transverse},
              {"steps", steps},
              {"fact_a", r.fact_a},
              {"fact_b", r.fact_b},
              {"fact_c", r.fact_c},
              {"passed", r.passed}};
}

Json to_json(const DensityReport& r) {
  return Json{{"grid_size", r.grid_size},
              {"failing", r.failing},
              {"fraction", double_to_json(r.fraction)},
              {"failing_parameters", vecs_to_json(r.failing_parameters)},
              {"submersion_checks", r.submersion_checks}};
}

Json to_json(const DensityResult& r) {
  Json lv = Json::array();
  for (const auto& l : r.levels) lv.push_back(Json{{"points_per_axis", l.points_per_axis}, {"report", to_json(l.report)}});
  return Json{{"levels", lv}, {"ratios", doubles_to_json(r.ratios)}, {"passed", r.passed}};
}

}  // namespace dtrans
