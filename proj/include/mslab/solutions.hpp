#pragma once

#include <mslab/families.hpp>
#include <mslab/grid.hpp>
#include <mslab/operators.hpp>
#include <mslab/weights.hpp>

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace mslab {

enum class ProbeMode { inverse_column, boundary_value };

/// u with Hu = f on the nodes marked `solved`; f vanishes on 4Q.
struct SolutionProbe {
  HOperator H;
  Cube q;
  ProbeMode mode = ProbeMode::inverse_column;
  Field f;
  Field u;
  std::vector<char> solved;
  double residual = 0.0;      // max_{4Q} |Hu - f| / max|u|
  double pinned_error = 0.0;  // boundary mode: max |u - data| on pinned nodes
};

/// True when every lattice position strictly inside λ·q lies on the grid.
bool cube_inside(const Grid& g, const Cube& q);

/// u = H^{-1} f with f vanishing on 4Q.
SolutionProbe source_probe(const HOperator& H, const Cube& q, const Field& f);
/// f = δ_y / h^n with y outside 4Q.
SolutionProbe column_probe(const HOperator& H, const Cube& q, Index y);
/// Box of 4Q grown by one layer (clipped), or the closed cube of physical side
/// `box_side` around the centre of q; nodes with a lattice neighbour outside
/// the box are pinned to `data`, the rest solve Hu = 0.
SolutionProbe boundary_probe(const HOperator& H, const Cube& q, const Field& data, double box_side = 0.0);

struct EstimateRow {
  std::string id;
  double R = 0.0;  // physical side of Q
  std::map<std::string, double> params;
  double lhs = 0.0;
  double rhs = 0.0;  // without constant
  double constant = 0.0;
  bool exact = false;
  bool skipped = false;
  std::string reason;
};

/// ∫_Q |Lu|² + V|u|² against ∫_{2Q}|f||u| + R^{-2}∫_{2Q}|u|².
EstimateRow caccioppoli_check(const SolutionProbe& p, const Cube& q);

struct SubharmonicReport {
  double r = 0.0;              // max_Q |Δ|u|² - 2|Lu|²_fwd - 2V|u|²|, u scaled to max_Q |u| = 1
  double peak = 0.0;           // max_Q Δ|u|²
  double min_laplacian = 0.0;  // min_Q Δ|u|²
  double exact_residual = 0.0; // with forward and backward edges: max_Q |Δ|u|² - fwd - bwd - 2V|u|²|
  Index nodes = 0;
};

SubharmonicReport subharmonic_identity_check(const SolutionProbe& p, const Cube& q);
SubharmonicReport subharmonic_identity_check(const SolutionProbe& p, const std::vector<Index>& nodes);

/// sup_Q |u| / (⨍_{μQ} |u|^r)^{1/r}.
EstimateRow mean_value_check(const SolutionProbe& p, const Cube& q, double r, double mu);

/// Finite r: (⨍_Q (ωF^s)^r)^{1/r} / ⨍_{μQ} ωF^s.
/// r = inf:  sup_Q F^s · ⨍_Q ω / ⨍_{μQ} ωF^s.
/// Throws InputError when F has a negative discrete Laplacian on 2Q.
EstimateRow weighted_mean_value_check(const Grid& g, const WeightField& omega, const WeightField& F,
                                      const Cube& q, double s, double r, double mu);

/// Discrete Laplacian with the 2n+1 stencil (zero ghost values).
VectorXd discrete_laplacian(const Grid& g, const VectorXd& v);

struct SuiteParams {
  double q = 0.0;  // reverse Hölder exponent of V; 0 takes the family value
  std::vector<double> k_list{0.0, 1.0, 2.0};
  std::vector<double> delta_list{2.0, 1.0};
  std::vector<double> r_list{2.0, 0.5};
  double mu = 2.0;
  double mu_lo = 1.0, mu_hi = 2.0;  // decay pair μQ ⊂ μ'Q
  double p_morrey = 0.0;            // Morrey exponent; 0 gives 2n
  double s = 0.5;                   // weighted mean value exponent, ω = V, F = |u|²
};

/// rh_potential, rh_gradient and gradient_bound(_sup) rows on one cube.
std::vector<EstimateRow> reverse_holder_suite(const SolutionProbe& p, const Cube& q, const SuiteParams& sp);
/// decay_* rows on one cube.
std::vector<EstimateRow> decay_probe(const SolutionProbe& p, const Cube& q, const SuiteParams& sp);

/// Boundary-value problem with Landau phases of the family field on a
/// Dirichlet grid whose outer nodes sit at ±side/2 (spacing side/(points-1)).
struct ProbeProblem {
  FamilySpec family;
  int dim = 2;
  int points = 65;
  double side = 8.0;
  double cube_side = 1.0;  // physical side of Q
  Point center = Point::Zero();
  std::function<Complex(const Point&)> data;
  double box_side = 0.0;  // pinned box; 0 gives 4Q plus one layer
};

Grid probe_grid(const ProbeProblem& pb);

/// Smooth data Σ c_m e^{i w_m·x} with seeded coefficients.
std::function<Complex(const Point&)> plane_wave_data(std::uint64_t seed, int waves = 3, double frequency = 2.0);

SolutionProbe build_probe(const ProbeProblem& pb);

struct RefinementPair {
  double r_coarse = 0.0, r_fine = 0.0;
  double ratio = 0.0;
  double min_laplacian = 0.0;  // over both resolutions
  double exact_residual = 0.0;
  double residual = 0.0;       // solve residual, both resolutions
};

/// Subharmonicity identity residual at `points` and 2·points-1 on the same physical problem:
/// one pinned box (4Q plus one coarse layer) and the coarse nodes of Q, which
/// both lattices share.
RefinementPair subharmonic_refinement(const ProbeProblem& pb);

struct ScaleTrend {
  std::string key;
  std::vector<double> constants;
  double ratio = 1.0;  // max/min of the nonzero constants
  bool bounded = true;
};

struct SuiteConfig {
  FamilySpec family;
  int dim = 2;
  int points = 65;
  double side = 8.0;
  std::vector<double> cube_sides{0.5, 1.0, 1.5};
  ProbeMode mode = ProbeMode::boundary_value;
  std::uint64_t seed = 1;
  SuiteParams params;
  double refinement_limit = 0.67;
  double bounded_limit = 3.0;
};

struct EstimateSuiteReport {
  SuiteConfig config;
  std::vector<EstimateRow> rows;
  std::vector<ScaleTrend> trends;
  RefinementPair refinement;
  double residual = 0.0;
  double pinned_error = 0.0;
  bool exact_ok = true;
  bool refinement_ok = true;
  std::vector<std::string> violations;
  bool ok() const { return exact_ok && refinement_ok; }
};

/// Rows keyed by id and parameters, grouped across cube scales.
std::vector<ScaleTrend> scale_trends(const std::vector<EstimateRow>& rows, double limit = 3.0);

EstimateSuiteReport run_suite(const SuiteConfig& cfg);

nlohmann::json row_to_json(const EstimateRow& r);
nlohmann::json suite_to_json(const EstimateSuiteReport& rep);
/// id,R,params,lhs,rhs,constant,exact,skipped,reason
void write_rows_csv(std::ostream& os, const std::vector<EstimateRow>& rows);

}  // namespace mslab
