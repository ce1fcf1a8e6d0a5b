#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtrans/approx.hpp"
#include "dtrans/jets.hpp"
#include "dtrans/strata.hpp"

namespace dtrans {

enum class TransStatus { NotInStratum, Transverse, Fail };
std::string_view to_string(TransStatus s);

struct TransOptions {
  double membership_tol = kMembershipTol;
  // Points whose distance to S lies in (membership_tol, ambiguity_tol] are
  // flagged as ambiguous.
  double ambiguity_tol = 1e-5;
  double rank_tol = kDefaultRankTol;
  // Use exact rational rank whenever the data allow it.
  bool allow_exact = true;
  // Refuse non-polynomial data (NotPolynomial) instead of falling back.
  bool exact_only = false;
};

struct TransversalityVerdict {
  Vec x;
  Vec y;
  std::string stratum;
  TransStatus status = TransStatus::NotInStratum;
  // n-th singular value of [Df(x) | basis of T_y S] (0 when rank-deficient
  // by shape); absent for NotInStratum.
  double witness = 0.0;
  double distance = 0.0;
  bool ambiguous = false;
  bool exact = false;
};

// Verdict at one point.  Guard violations inside the stratum's equations count
// as "not on the stratum"; guard violations of f propagate.
TransversalityVerdict is_transverse_at(const DefMap& f, const Stratum& s, const Vec& x, const TransOptions& opts = {});

// Points of the domain to examine: a tensor grid over box, explicit points, and
// optionally seeded random points.
struct RegionSampler {
  Box box;
  int points_per_dim = 11;
  std::vector<Vec> points;
  int random_points = 0;
  std::uint64_t seed = 0;

  std::vector<Vec> generate() const;
};

struct StratumReport {
  std::string id;
  std::vector<TransversalityVerdict> verdicts;
  int not_in_stratum = 0;
  int transverse = 0;
  int fail = 0;
  int ambiguous = 0;
  // Smallest witness among transverse points (near-miss margin).
  double min_margin = 0.0;
};

struct RegionReport {
  bool transverse = true;
  int samples = 0;
  std::vector<StratumReport> strata;
  std::vector<std::string> errors;

  int fail_count() const;
};

// Samples f over the sampler; intersection points f(x) in S are located by
// Gauss-Newton on E_S(f(x)) = 0 from every sample and then tested.
RegionReport is_transverse_on(const DefMap& f, const Stratification& sigma, const RegionSampler& sampler,
                              const TransOptions& opts = {});

// Transversality of x -> j^k f(x) to a stratification of J^k(R^m, R^n).
// SpecMismatch when sigma.ambient_dim() != m + n + nA.
RegionReport jet_transverse(const DefMap& f, const Stratification& sigma, int k, const RegionSampler& sampler,
                            const TransOptions& opts = {});

// The stratum g^{-1}(S).
Stratum preimage_stratum(const DefMap& g, const Stratum& s);

struct CompositionReport {
  std::vector<TransversalityVerdict> outer;      // g vs S at f(x)
  std::vector<TransversalityVerdict> inner;      // f vs g^{-1}(S) at x
  std::vector<TransversalityVerdict> composite;  // g o f vs S at x
  bool conclusion_holds = true;
};
// HypothesisFailed when a premise fails at a sample.
CompositionReport compose_transversality_check(const DefMap& f, const DefMap& g, const Stratum& s,
                                               const std::vector<Vec>& samples, const TransOptions& opts = {});

struct PerturbOptions {
  int max_draws = 100;
  std::uint64_t seed = 0;
  // Replaces the certified minorant (used to show why phi must decay).
  std::optional<Expr> phi_override;
  GridOptions grid;
  TransOptions trans;
};

struct PerturbResult {
  DefMap g;
  // s_{i, alpha}, component-major, alpha over |alpha| <= k in grlex order.
  std::vector<double> s;
  int draws = 0;
  int rejections = 0;
  std::uint64_t R = 0;
  Rational C;
  Expr phi;
  std::string phi_family;
  RegionReport report;
  NeighborhoodResult neighborhood;
};

// f_s = f + phi * sum_{|alpha| <= k} s_{i,alpha} x^alpha per component, with
// s uniform in (0,1) and phi a certified minorant of
// eps / (2 C (1 + |x|^2)^ceil(l/2)).  Accepts the first draw with
// j^k f_s transverse to sigma on the sampler and f_s in U^l_eps(f) on the
// sampler points.  ExhaustedDraws otherwise.
PerturbResult perturb_to_transverse(const DefMap& f, const Stratification& sigma, int k, int l, const Expr& eps,
                                    const RegionSampler& sampler, const PerturbOptions& opts = {});

struct DensityReport {
  int grid_size = 0;
  int failing = 0;
  double fraction = 0.0;
  std::vector<Vec> failing_parameters;
  int submersion_checks = 0;
};
// phi: R^{m + p} -> R^n in variables (x, s), m = sampler dimension.  For each
// s in s_grid the slice x -> phi(x, s) is tested with is_transverse_on.
// NotSubmersion when D phi has rank < n at a sampled (x, s).
DensityReport parametric_density_experiment(const DefMap& phi, const Stratification& sigma,
                                            const std::vector<Vec>& s_grid, const RegionSampler& sampler,
                                            const TransOptions& opts = {});

struct PrescribedOptions {
  std::uint64_t seed = 0;
  int max_draws = 100;
  RegionSampler sampler;  // over R^{M_dim}; defaults to [-1,1]^M, 9 per axis
  TransOptions trans;
};

struct PrescribedResult {
  DefMap f;
  Vec x0;
  std::vector<double> s;
  int draws = 0;
  std::string stratum;
  // Orthogonal change of coordinates: columns are a basis of H followed by a
  // basis of its complement.
  Mat frame;
  bool value_exact = false;
  double image_gap = 0.0;
  RegionReport report;
};
// f = p + Q psi_s(L x) with psi_s(z) = (z, s_1 |z|^2, ..., s_{n-k} |z|^2),
// L the projection R^{M_dim} -> R^k and Q the frame of (H, H^perp); f(0) = p
// and D_0 f(R^{M_dim}) = H.  HypothesisFailed when H + T_p S != R^n or
// M_dim < dim H; ExhaustedDraws when no s gives f transverse on the sampler.
PrescribedResult transverse_with_derivative(int m_dim, const Stratification& sigma, const Vec& p,
                                            const LinearSubspace& h, const PrescribedOptions& opts = {});

// Stratum of sigma containing y (first match), if any.
std::optional<std::size_t> stratum_containing(const Stratification& sigma, const Vec& y, double tol = kMembershipTol);

}  // namespace dtrans
