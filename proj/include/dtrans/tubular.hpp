#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtrans/strata.hpp"

namespace dtrans {

struct TubeOptions {
  int max_iter = 50;
  double tol = 1e-10;
  int cloud_size = 200;
};

LinearSubspace normal_space(const Stratum& m, const Vec& x, double tol = kMembershipTol);

// Tube {x + v : v normal at x, |v| < radius(x)} around m.  The point cloud used
// for initial guesses is sampled once at construction.
class TubularNeighborhood {
 public:
  TubularNeighborhood(Stratum m, Expr radius, Rng& rng, std::optional<Box> box = std::nullopt, TubeOptions opts = {});

  const Stratum& manifold() const { return m_; }
  const Expr& radius() const { return radius_; }
  const std::vector<Vec>& cloud() const { return cloud_; }
  const TubeOptions& options() const { return opts_; }
  // Same manifold and point cloud, different radius.
  TubularNeighborhood with_radius(Expr radius) const;

  struct Result {
    Vec x;
    int iterations = 0;
    // |P_T (w - x)| / max(1, |w - x|)
    double orthogonality = 0.0;
  };
  // NoConvergence when the Newton solve fails, when the foot point is not
  // inside the tube, or when two distinct foot points lie inside it.
  Result retract(const Vec& w) const;

 private:
  std::optional<Result> solve_from(const Vec& w, const Vec& start) const;

  Stratum m_;
  Expr radius_;
  TubeOptions opts_;
  std::vector<Vec> cloud_;
  DefMap hessians_;
};

struct RadiusEstimate {
  Expr radius;
  // "constant" or "inverse_power"
  std::string family;
  double scale = 0.0;
  int power = 0;
  int probes = 0;
  std::vector<Vec> samples;
};

// Tries c, c/(1+|x|^2), c/(1+|x|^2)^2 for c = 1, 1/2, ..., 2^-12 and accepts the
// first for which every probe x + t r(x) n (sampled x, random unit normals n,
// t in {0.25, 0.5, 0.75, 0.95}) retracts back to x.
// CertificationFailure when nothing passes.
RadiusEstimate estimate_radius(const Stratum& m, int sample_budget, Rng& rng, std::optional<Box> box = std::nullopt);

}  // namespace dtrans
