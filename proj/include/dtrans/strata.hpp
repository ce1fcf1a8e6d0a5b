#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtrans/expr.hpp"
#include "dtrans/linalg.hpp"
#include "dtrans/random.hpp"

namespace dtrans {

inline constexpr double kMembershipTol = 1e-7;

// {E(x) = 0, g(x) > 0} in R^n.
struct ImplicitPatch {
  std::vector<Expr> equations;
  std::vector<Expr> inequalities;
};

// Image of an open parameter box under an immersion.
struct ParamPatch {
  DefMap chart;
  Box params;
};

class Stratum {
 public:
  Stratum() = default;
  Stratum(std::string id, int ambient_dim, int dim, ImplicitPatch patch, std::optional<Box> bounds = std::nullopt);
  Stratum(std::string id, int dim, ParamPatch patch, std::optional<Box> bounds = std::nullopt);

  const std::string& id() const { return id_; }
  int ambient_dim() const { return ambient_dim_; }
  int dim() const { return dim_; }
  int codim() const { return ambient_dim_ - dim_; }
  bool is_implicit() const { return !param_.has_value(); }
  const ImplicitPatch& implicit() const { return implicit_; }
  const ParamPatch& parametric() const { return *param_; }
  // Sampling box, if declared.
  const std::optional<Box>& bounds() const { return bounds_; }
  bool is_polynomial() const;

  // Equations as a map R^n -> R^{#eq} (implicit only).
  const DefMap& equation_map() const { return eq_map_; }

 private:
  std::string id_;
  int ambient_dim_ = 0;
  int dim_ = 0;
  ImplicitPatch implicit_;
  std::optional<ParamPatch> param_;
  std::optional<Box> bounds_;
  DefMap eq_map_;
};

struct Membership {
  bool member = false;
  // max |E_i(x)| (implicit) or distance to the chart image (parametric).
  double residual = 0.0;
  // min g_j(x); +inf without inequalities.
  double inequality_min = 0.0;
  std::optional<Vec> parameter;
};

// Implicit: all |E_i(x)| <= tol and every g_j(x) > 0 (inequalities are
// strict, with no tolerance).  Parametric: the nearest chart point found by a
// multi-start Gauss-Newton solve lies within tol.  Guard errors propagate.
Membership membership(const Stratum& s, const Vec& x, double tol = kMembershipTol);

// Tangent space at x.  NotOnStratum when x fails membership at tol,
// RankDefect when the equation Jacobian (or chart Jacobian) has the wrong rank.
LinearSubspace tangent_space(const Stratum& s, const Vec& x, double tol = kMembershipTol);
// Exact rank of the equation Jacobian at a rational point (polynomial
// implicit strata only, NotPolynomial otherwise).
int exact_equation_rank(const Stratum& s, std::span<const Rational> x);

// Nearest point on the zero set of the equations from x by minimum-norm
// Gauss-Newton (implicit), or chart point nearest x (parametric).  The result
// is not checked against the inequalities.
SolveResult project_to_equations(const Stratum& s, const Vec& x, double tol = 1e-12, int max_iter = 100);

// Up to `count` distinct points of s inside box (or the stratum's bounds, or
// [-2, 2]^n), each carrying a manifold certificate.
std::vector<Vec> sample_stratum(const Stratum& s, int count, Rng& rng, const std::optional<Box>& box = std::nullopt);

class Stratification {
 public:
  Stratification() = default;
  Stratification(int ambient_dim, std::vector<Stratum> strata,
                 std::vector<std::pair<std::string, std::string>> adjacency, std::optional<Box> bounds = std::nullopt);

  int ambient_dim() const { return ambient_dim_; }
  const std::vector<Stratum>& strata() const { return strata_; }
  // (X, Y) meaning Y lies in the closure of X.
  const std::vector<std::pair<std::string, std::string>>& adjacency() const { return adjacency_; }
  const std::optional<Box>& bounds() const { return bounds_; }
  const Stratum& find(const std::string& id) const;
  bool has(const std::string& id) const;
  std::optional<Box> sampling_box(const Stratum& s) const;

 private:
  int ambient_dim_ = 0;
  std::vector<Stratum> strata_;
  std::vector<std::pair<std::string, std::string>> adjacency_;
  std::optional<Box> bounds_;
};

struct StratumCertificate {
  std::string id;
  int samples = 0;
  int certified = 0;
  double pass_rate() const { return samples ? static_cast<double>(certified) / samples : 0.0; }
};

struct DisjointnessViolation {
  std::string first;
  std::string second;
  Vec witness;
};

struct FrontierProbe {
  std::string x;
  std::string y;
  Vec base;
  // Distance from base to the closest point of X reached along the probes.
  double best_distance = 0.0;
  bool passed = false;
};

struct ValidationReport {
  bool valid = false;
  std::vector<StratumCertificate> strata;
  std::vector<DisjointnessViolation> disjointness;
  std::vector<FrontierProbe> frontier;
  std::vector<std::string> problems;
};

inline constexpr double kFrontierTol = 1e-4;

// probe_budget samples per stratum; frontier probes use rays y + t v with
// t = 2^-j projected back onto X.
ValidationReport validate_stratification(const Stratification& sigma, int probe_budget, Rng& rng);

// Strata pi^{-1}(S) with equations and inequalities composed with pi.
// NotSubmersion (message carries the point) when D pi has rank below dim N at
// a sampled point of a pulled-back stratum.
Stratification pullback_stratification(const Stratification& sigma, const DefMap& pi, Rng& rng,
                                       const std::optional<Box>& bounds = std::nullopt, int samples = 20);

}  // namespace dtrans
