#pragma once

#include <mslab/gauge.hpp>
#include <mslab/grid.hpp>

#include <limits>

namespace mslab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dyadic levels lo..hi (inclusive) used as the cube family of a scan.
struct LevelRange {
  int lo = 0;
  int hi = 0;
};

/// Largest admissible level range for a grid.
LevelRange full_levels(const Grid& g);

struct LevelMax {
  int level = 0;
  double value = 0.0;
  DyadicCube argmax;
  Index cubes = 0;
};

struct WeightReport {
  double q = 2.0;
  double rh_constant = 1.0;
  LevelRange levels;
  std::vector<LevelMax> per_level;
  double doubling = 1.0;
  std::vector<std::pair<double, double>> ainfty_profile;  // (s, RH_{1/s} constant of ω^s)
  bool ainfty_consistent = true;
  double ainfty_growth = 1.0;  // largest constant ratio when the deepest level is added
};

/// max over cubes of (⨍_Q ω^q)^{1/q} / ⨍_Q ω (q = inf: max_Q ω / ⨍_Q ω).
/// Cubes where ω vanishes identically are skipped.
WeightReport rh_constant(const Grid& g, const WeightField& w, double q, LevelRange levels);

/// max over dyadic Q with 2Q inside the grid of Σ_{2Q} ω / Σ_Q ω.
double doubling_constant(const Grid& g, const WeightField& w, LevelRange levels);

/// RH_{1/s} constants of ω^s; A∞-consistent when adding the deepest level
/// changes no constant by more than 25%.
WeightReport ainfty_profile(const Grid& g, const WeightField& w, const std::vector<double>& s_list,
                            LevelRange levels);

/// Largest q among the candidates whose RH_q constant stays below threshold.
double rh_largest_exponent(const Grid& g, const WeightField& w, const std::vector<double>& q_candidates,
                           double threshold, LevelRange levels);

struct ControlReport {
  double C1 = 0.0;
  double C2 = 0.0;
  bool has_C2 = false;
  bool gradient_numeric = false;
  double pointwise = 0.0;  // max |B|/V over nodes (inf if V vanishes where B does not)
  DyadicCube worst_C1, worst_C2;
  std::vector<LevelMax> per_level_C1;
};

/// sup_Q |B| ≤ C1 ⨍_Q V and sup_Q |∇B| ≤ C2 (⨍_Q V)^{3/2}. Without an analytic
/// gradient C2 is computed from centred differences and flagged; pass
/// with_gradient = false to omit it.
ControlReport control_condition_check(const Grid& g, const MagneticField& B, const WeightField& V,
                                      LevelRange levels, bool with_gradient = true);

/// nq/(n-q) for q < n, inf otherwise.
inline double sobolev_conjugate(double q, int n) { return q < n ? n * q / (n - q) : kInf; }

/// m_β(x) = x for x ≤ 1 and x^β for x ≥ 1.
double m_beta(double x, double beta);

/// [∫_Q |Lu|^p + ω|u|^p] / [(m_β(R^p ⨍_Q ω)/R^p) ∫_Q |u|^p], with |Lu| built
/// from the edges lying inside Q.
double fefferman_phong_ratio(const Grid& g, const Field& u, const EdgePhaseField& theta,
                             const WeightField& w, const Cube& q, double p, double beta = 0.5);

struct ShenAlpha {
  double alpha = 0.0;       // min over pairs of log ρ / log(r/R)
  double regression = 0.0;  // least-squares slope through the origin
  bool flagged = false;     // no positive decay margin
  std::vector<double> ratios;
};

/// ρ = r²⨍_{Q(y,r)}V / (R²⨍_{Q(y,R)}V) over the pairs; Q(y, r) has side r.
ShenAlpha shen_alpha_estimate(const Grid& g, const WeightField& V, const Point& y,
                              const std::vector<std::pair<double, double>>& pairs);

struct DyadicSum {
  double value = 0.0;
  int level_lo = 0, level_hi = 0;  // levels actually summed
  bool clipped = false;
  std::vector<double> terms;
};

/// Σ_{l=-L}^{L} (4^l ⨍_{Q(y,2^l)} V)^{1/2} / (1 + 4^l ⨍_{Q(y,2^l)} V) over the
/// levels whose cube stays inside the grid.
DyadicSum dyadic_sum(const Grid& g, const WeightField& V, const Point& y, int L);

/// Default cube sizes for the maximal function: 1, 2, 3, 4, 6, 8, 12, ... ≤ N.
std::vector<int> maximal_sizes(const Grid& g);

/// Uncentred maximal function: max over node cubes of the given sizes that lie
/// inside the lattice and contain x of the mean of |values|.
VectorXd maximal_function(const Grid& g, const VectorXd& values, std::vector<int> sizes = {});

}  // namespace mslab
