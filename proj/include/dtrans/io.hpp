#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtrans/experiments.hpp"
#include "dtrans/parse.hpp"
#include "dtrans/regularity.hpp"
#include "dtrans/strata.hpp"
#include "dtrans/transversality.hpp"
#include "dtrans/tubular.hpp"

namespace dtrans {

struct SourceLocation {
  int line = 0;
  int column = 0;
};

// Parsed JSON text that remembers where every value starts, so schema errors
// can point at a line and column.
class JsonDocument {
 public:
  // SchemaError with line/column on malformed JSON.
  static JsonDocument parse(const std::string& text, std::string name = "<input>");
  static JsonDocument load(const std::string& path);

  const Json& root() const { return root_; }
  const std::string& name() const { return name_; }
  // Location of the value at a JSON pointer ("" is the root); falls back to
  // the nearest recorded ancestor.
  SourceLocation locate(const std::string& pointer) const;

  const Json* find(const std::string& pointer) const;
  // SchemaError when the pointer does not resolve.
  const Json& at(const std::string& pointer) const;
  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const;

  // Runs conv on the value at pointer, turning any Error or JSON exception
  // into a SchemaError carrying the location.
  template <class F>
  auto convert(const std::string& pointer, F&& conv) const -> decltype(conv(std::declval<const Json&>())) {
    const Json& j = at(pointer);
    try {
      return conv(j);
    } catch (const Error& e) {
      fail(pointer, e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(pointer, e.what());
    }
  }

 private:
  std::string name_;
  std::string text_;
  Json root_;
  std::map<std::string, std::size_t> offsets_;
};

// {"id", "dim", "equations": [...], "inequalities": [...], "bounds"?} or
// {"id", "dim", "chart": map, "params": box, "bounds"?}
Stratum stratum_from_json(const Json& j, int ambient_dim);
Json stratum_to_json(const Stratum& s);
// {"ambient_dim", "strata": [...], "adjacency": [[X, Y], ...], "bounds"?}
Stratification stratification_from_json(const Json& j);
Json stratification_to_json(const Stratification& s);
// {"box", "points_per_dim"?, "points"?, "random_points"?, "seed"?}
RegionSampler sampler_from_json(const Json& j);
Json sampler_to_json(const RegionSampler& s);
// {"x", "y", "point", "probes": [{"label", "curve": map} | {"label", "direction"}]}
PinnedPoint pinned_from_json(const Json& j);
Json pinned_to_json(const PinnedPoint& p);
LinearSubspace subspace_from_json(const Json& j, int ambient_dim);

// The common part of a problem file.  Command blocks stay as JSON in
// `sections` and are read by the command that needs them.
struct Problem {
  int version = 1;
  std::optional<std::uint64_t> seed;
  std::optional<DefMap> map;
  std::optional<Stratification> stratification;
  std::string mode = "region";
  std::vector<Vec> points;
  std::optional<RegionSampler> sampler;
  int k = 0;
  int l = 0;
  std::optional<Expr> epsilon;
  Json sections = Json::object();
};

inline constexpr int kProblemVersion = 1;
// Keys of the common part; everything else goes to sections.
Problem problem_from_document(const JsonDocument& doc);
Json problem_to_json(const Problem& p);

Json to_json(const LinearSubspace& s);
Json to_json(const TransversalityVerdict& v);
Json to_json(const RegionReport& r);
Json to_json(const ValidationReport& r);
Json to_json(const ProbeOutcome& o);
Json to_json(const RegularityVerdict& v);
Json to_json(const RegularityReport& r);
Json to_json(const RefinementReport& r);
Json to_json(const PerturbResult& r);
Json to_json(const PrescribedResult& r);
Json to_json(const RadiusEstimate& r);
Json to_json(const EscapeResult& r);
Json to_json(const D0Result& r);
Json to_json(const OpennessResult& r);
Json to_json(const TrotmanResult& r);
Json to_json(const DensityResult& r);
Json to_json(const DensityReport& r);

}  // namespace dtrans
