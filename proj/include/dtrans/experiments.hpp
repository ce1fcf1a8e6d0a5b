#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dtrans/regularity.hpp"
#include "dtrans/transversality.hpp"

namespace dtrans {

// ---- neighborhood escape -------------------------------------------------

struct EscapeResult {
  double x_star = 0.0;
  // log|q(x*)| + x*, non-negative at the witness.
  long double certificate = 0.0L;
  double start = 0.0;
  int doublings = 0;
};
// First point of the doubling ladder B, 2B, 4B, ... (B the Cauchy root bound;
// constants try 0, then 1, 2, 4, ...) with |q(x)| >= e^-x.  Coefficients are
// in increasing degree.
// ZeroPolynomial when every coefficient vanishes.
EscapeResult escape_experiment(const std::vector<double>& coeffs);

// ---- D^0 convergence without compact agreement ---------------------------

struct D0Entry {
  std::string epsilon;
  // least i with |x|^-2i < eps(x) on every sample
  std::optional<int> i0;
  // f_i(10) != f(10) for every i <= i0
  bool differs_at_10 = false;
};
struct D0Result {
  std::vector<D0Entry> entries;
  bool passed = false;
};
// f = (x, 0), f_i = (x, x^-2i) on |x| > 1.
D0Result d0_convergence_experiment(const std::vector<Expr>& catalog, int i_max, const std::vector<double>& samples);

// ---- openness -------------------------------------------------------------

struct OpennessOptions {
  std::vector<double> deltas{0.1, 0.01, 0.001};
  int trials = 8;
  int degree = 2;
  std::uint64_t seed = 0;
  // Skip the regularity gate (control runs on fault fixtures).
  bool require_regular = true;
  RegularityOptions regularity;
  std::vector<PinnedPoint> pinned;
  // Extra perturbations g tested at each delta when d(j^1 g, j^1 f) < delta.
  std::vector<DefMap> adversarial;
};
struct OpennessLevel {
  double delta = 0.0;
  int tested = 0;
  int transverse = 0;
  double min_margin = 0.0;
};
struct OpennessResult {
  RegStatus regularity = RegStatus::Regular;
  std::vector<OpennessLevel> levels;
  // Largest delta from which every smaller rung stayed transverse (0 if none).
  double stability_radius = 0.0;
};
// HypothesisFailed when sigma is not classified Regular (unless bypassed) or
// when f itself fails transversality on the sampler.
OpennessResult openness_experiment(const Stratification& sigma, const DefMap& f, const RegionSampler& sampler,
                                   const OpennessOptions& opts = {});

// ---- non-openness at an (a)-fault ----------------------------------------

struct TrotmanOptions {
  int m_dim = 2;
  int steps = 8;
  std::uint64_t seed = 0;
  RegularityOptions regularity;
  std::vector<PinnedPoint> pinned;
  RegionSampler sampler;  // over R^m_dim; defaults to [-1,1]^m, 9 per axis
  double bump_inner = 0.25;
  double bump_outer = 0.75;
};
struct TrotmanStep {
  int i = 0;
  Vec x_i;
  double value_gap = 0.0;   // |g_i(x0) - x_i|
  double image_gap = 0.0;   // gap(D g_i(x0) R^m, H_i)
  double sigma_min = 0.0;   // witness of is_transverse_at(g_i, X, x0)
  TransStatus status = TransStatus::NotInStratum;
  double jet_distance = 0.0;  // max over samples of d(j^1 g_i, j^1 f)
};
struct TrotmanResult {
  std::string x;
  std::string y;
  Vec point;
  double deviation = 0.0;
  LinearSubspace tau;
  LinearSubspace h;
  PrescribedResult base;
  bool base_transverse = false;
  std::vector<TrotmanStep> steps;
  // g_i, i = 1..steps
  std::vector<DefMap> g;
  bool fact_a = false;
  bool fact_b = false;
  bool fact_c = false;
  bool passed = false;
};
// HypothesisFailed when the regularity scan finds no fault.
TrotmanResult trotman_experiment(const Stratification& sigma, const TrotmanOptions& opts = {});

// H with dim H = n - dim T, H + T = R^n and H + tau != R^n.  HypothesisFailed
// when T is contained in tau.
LinearSubspace trotman_complement(const LinearSubspace& t, const LinearSubspace& tau);

// ---- parametric density ----------------------------------------------------

struct DensityLevel {
  int points_per_axis = 0;
  DensityReport report;
};
struct DensityResult {
  std::vector<DensityLevel> levels;
  std::vector<double> ratios;
  bool passed = false;
};
// Parameter grids on s_box with (n0 - 1) 2^l + 1 points per axis, l < levels.
// Passes when each refinement shrinks the failing fraction by min_ratio.
DensityResult density_experiment(const DefMap& phi, const Stratification& sigma, const Box& s_box,
                                 const RegionSampler& sampler, int n0 = 9, int levels = 3, double min_ratio = 1.5);

}  // namespace dtrans
