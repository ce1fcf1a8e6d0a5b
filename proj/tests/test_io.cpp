#include <doctest.h>

#include "dtrans/io.hpp"
#include "oracles.hpp"

using namespace dtrans;

namespace {

const char* kProblems[] = {"circle.json",        "circle_tangent.json",  "cone.json",          "cone_trotman_control.json",
                           "d0.json",            "density.json",         "escape.json",        "example23.json",
                           "flat.json",          "invalid_frontier.json", "invalid_overlap.json", "parabola.json",
                           "perturb_cubic.json", "perturb_exhausted.json", "perturb_flat.json",  "perturb_saddle.json",
                           "prescribed.json",    "umbrella.json"};

std::string schema_message(const std::string& text) {
  try {
    (void)problem_from_document(JsonDocument::parse(text, "p.json"));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaError);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parse, serialize, parse is the identity on every fixture") {
  for (const char* name : kProblems) {
    CAPTURE(name);
    const Problem p = oracle::load_problem(name);
    const Json once = problem_to_json(p);
    const Problem q = problem_from_document(JsonDocument::parse(once.dump(2), name));
    const Json twice = problem_to_json(q);
    CHECK(once == twice);
    CHECK(p.version == q.version);
    CHECK(p.seed == q.seed);
    CHECK(p.k == q.k);
    CHECK(p.l == q.l);
    CHECK(p.mode == q.mode);
    CHECK(p.sections == q.sections);
    if (p.stratification) {
      REQUIRE(q.stratification);
      CHECK(p.stratification->strata().size() == q.stratification->strata().size());
      for (std::size_t i = 0; i < p.stratification->strata().size(); ++i) {
        const auto& a = p.stratification->strata()[i];
        const auto& b = q.stratification->strata()[i];
        CHECK(a.id() == b.id());
        CHECK(a.dim() == b.dim());
        for (std::size_t e = 0; e < a.implicit().equations.size(); ++e)
          CHECK(structurally_equal(a.implicit().equations[e], b.implicit().equations[e]));
      }
      CHECK(p.stratification->adjacency() == q.stratification->adjacency());
    }
    if (p.map) {
      REQUIRE(q.map);
      for (int c = 0; c < p.map->codomain_dim(); ++c)
        CHECK(structurally_equal(p.map->component(c), q.map->component(c)));
    }
  }
}

TEST_CASE("schema errors carry a line and column") {
  const std::string bad_version = "{\n  \"version\": 3\n}\n";
  CHECK(schema_message(bad_version).find("p.json:2:14: /version") != std::string::npos);

  const std::string bad_expr =
      "{\"version\": 1,\n \"map\": {\"domain_dim\": 1,\n   \"components\": [\"x +\"]}}";
  const std::string m = schema_message(bad_expr);
  CHECK(m.find("p.json:2:") != std::string::npos);
  CHECK(m.find("/map") != std::string::npos);

  const std::string malformed = "{\"version\": 1,\n \"map\": [}";
  CHECK(schema_message(malformed).find("p.json:2:") != std::string::npos);
  CHECK(schema_message(malformed).find("malformed JSON") != std::string::npos);

  const std::string bad_mode = "{\"version\": 1, \"mode\": \"sideways\"}";
  CHECK(schema_message(bad_mode).find("/mode") != std::string::npos);
}

TEST_CASE("json locations") {
  const JsonDocument d = JsonDocument::parse("{\"a\": [1,\n  {\"b\": 2}]}");
  CHECK(d.locate("/a/1/b").line == 2);
  CHECK(d.locate("/a/1/b").column == 9);
  CHECK(d.locate("/a/7").line == 1);
  CHECK(d.find("/a/0")->get<int>() == 1);
  CHECK(d.find("/zzz") == nullptr);
  CHECK_THROWS_AS(d.at("/zzz"), Error);
}

TEST_CASE("stratifications and samplers round-trip") {
  const Problem p = oracle::load_problem("circle.json");
  const Json fine = p.sections.at("refinement").at("fine");
  const Stratification s = stratification_from_json(fine);
  CHECK(stratification_to_json(s) == stratification_to_json(stratification_from_json(stratification_to_json(s))));
  const RegionSampler r = *p.sampler;
  const RegionSampler back = sampler_from_json(sampler_to_json(r));
  CHECK(back.generate().size() == r.generate().size());
  const Problem c = oracle::load_problem("cone.json");
  const PinnedPoint pin = pinned_from_json(c.sections.at("regularity").at("pinned")[0]);
  CHECK(pinned_to_json(pinned_from_json(pinned_to_json(pin))) == pinned_to_json(pin));
}
