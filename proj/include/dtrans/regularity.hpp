#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtrans/strata.hpp"
#include "dtrans/transversality.hpp"

namespace dtrans {

// A curve in X landing at y as t -> 0: either an explicit map t -> curve(t),
// or the ray y + t v pulled back onto X by Gauss-Newton.
struct ProbeCurve {
  std::optional<DefMap> curve;
  Vec landing;
  Vec direction;
  std::string label;

  static ProbeCurve explicit_curve(DefMap c, Vec y, std::string label = "curve");
  static ProbeCurve projected_ray(Vec y, Vec v, std::string label = "ray");
  bool is_explicit() const { return curve.has_value(); }
  // Point at parameter t, or nullopt when the projection fails.
  std::optional<Vec> at(const Stratum& x, double t) const;
};

struct RegularityOptions {
  double pass_threshold = 1e-6;
  double fault_threshold = 1e-3;
  int j_first = 3;
  int j_last = 30;
  double limit_tol = 1e-5;
  double membership_tol = kMembershipTol;
  int base_points = 5;
  int random_rays = 6;
  std::uint64_t seed = 0;
};

enum class RegStatus { Regular, Fault, Inconclusive };
std::string_view to_string(RegStatus s);

struct ProbeOutcome {
  std::string label;
  bool explicit_curve = false;
  // Ray direction (projected rays only).
  Vec direction;
  bool valid = false;
  bool converged = false;
  // asym_deviation(T_y Y, tau) for the limit tau.
  double deviation = 0.0;
  double tail_gap = 0.0;
  std::vector<double> t;
  std::vector<Vec> points;
  // asym_deviation(T_y Y, T_{x_j} X) along the schedule.
  std::vector<double> deviations;
  std::optional<LinearSubspace> limit;
  std::string reason;
};

struct RegularityVerdict {
  std::string x;
  std::string y_id;
  Vec y;
  RegStatus status = RegStatus::Inconclusive;
  std::vector<ProbeOutcome> probes;
  // Index of the worst valid probe, if any.
  std::optional<std::size_t> witness;
  double deviation = 0.0;
  // Fault only: the witness recomputed on the shifted schedule j_first+1..j_last+1.
  std::optional<double> recheck_deviation;
};

// Follows every probe along t_j = 2^-j, takes the limit of tangent spaces and
// compares it with T_y Y.  ProbeInvalid when an explicit probe leaves X or does
// not approach y, or when no probe is usable.
RegularityVerdict whitney_a_pair(const Stratum& x, const Stratum& y, const Vec& point,
                                 const std::vector<ProbeCurve>& probes, const RegularityOptions& opts = {});

// One probe, on schedule j in [j_first, j_last].
ProbeOutcome follow_probe(const Stratum& x, const LinearSubspace& ty, const ProbeCurve& probe, int j_first, int j_last,
                          const RegularityOptions& opts);

struct PinnedPoint {
  std::string x;
  std::string y;
  Vec point;
  std::vector<ProbeCurve> probes;
};

struct PairReport {
  std::string x;
  std::string y;
  RegStatus status = RegStatus::Regular;
  std::vector<RegularityVerdict> verdicts;
};

struct RegularityReport {
  RegStatus status = RegStatus::Regular;
  std::vector<PairReport> pairs;
};

// Every adjacent pair, at base_points sampled points of Y plus pinned points,
// each probed by random_rays projected rays in normal directions plus the
// pinned probes.
RegularityReport whitney_a_stratification(const Stratification& sigma, const RegularityOptions& opts = {},
                                          const std::vector<PinnedPoint>& pinned = {});

struct RefinementMapResult {
  std::size_t index = 0;
  bool coarse_transverse = false;
  bool fine_transverse = false;
  // Transverse to the refinement but not to the coarse stratification.
  bool violation = false;
};

struct RefinementReport {
  int membership_samples = 0;
  // fine stratum id -> containing coarse stratum id
  std::vector<std::pair<std::string, std::string>> parent;
  std::vector<RefinementMapResult> maps;
  bool inclusion_holds = true;
};

// NotARefinement when a sampled point of a fine stratum leaves its coarse
// parent or a sampled point of a coarse stratum is not covered.
RefinementReport refinement_inclusion_check(const Stratification& coarse, const Stratification& fine,
                                            const std::vector<DefMap>& maps, const RegionSampler& sampler,
                                            std::uint64_t seed = 0, int samples_per_stratum = 12);

}  // namespace dtrans
