#pragma once

#include <mslab/families.hpp>
#include <mslab/operators.hpp>
#include <mslab/weights.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mslab {

enum class TransformKind {
  L_inv_sqrt,         // L_j H^{-1/2}
  V_half_inv_sqrt,    // V^{1/2} H^{-1/2}
  H0_half_inv_sqrt,   // H₀^{1/2} H^{-1/2}
  LL_inv,             // L_s L_k H^{-1}
  V_half_L_inv,       // V^{1/2} L_j H^{-1}
  V_inv,              // V H^{-1}
  H0_inv,             // H₀ H^{-1}
  L_inv_Lstar,        // L_j H^{-1} L_k*
  L_inv_V_half,       // L_j H^{-1} V^{1/2}
  V_half_inv_V_half,  // V^{1/2} H^{-1} V^{1/2}
  V_half_inv_Lstar,   // V^{1/2} H^{-1} L_k*
  imaginary_power,    // H^{iy}
};

/// Index j = -1 (or k = -1) stacks every direction; the result is then a
/// vector field at the nodes whose pointwise size is the Euclidean norm.
struct TransformSpec {
  TransformKind kind = TransformKind::L_inv_sqrt;
  int j = 0;
  int k = 0;
  double y = 0.0;

  std::string id() const;
};

/// "L_j H^-1/2" style identifiers, e.g. "LH-1/2:j=0", "VH-1", "V1/2LH-1:j=-1", "Hiy:y=1".
TransformSpec parse_transform(const std::string& text);

/// Dense transform. Row r of component c at node x is r = c·nodes + x (for
/// edge-valued single-direction outputs, rows are the edges of that direction).
struct Transform {
  TransformSpec spec;
  MatrixXcd matrix;
  int out_groups = 1;
  int in_groups = 1;
  double shift = 0.0;
};

/// Spectral caches of H (and H₀ when needed). λ₀ defaults to the cache's
/// default shift; an explicit negative value means "use the default".
struct TransformContext {
  const HOperator* H = nullptr;
  const SpectralCache* cache = nullptr;
  const SpectralCache* cache0 = nullptr;  // for H₀^{1/2}
  double lambda0 = -1.0;
};

Transform transform_matrix(const TransformContext& ctx, const TransformSpec& spec);

enum class PNormMethod { automatic, exact, dual_power, random_probe };

struct PNormOptions {
  PNormMethod method = PNormMethod::automatic;
  int starts = 4;
  bool two_sided = true;  // also iterate on T* in the conjugate exponent
  int max_iterations = 100;
  double tolerance = 1e-6;
  int probes = 1000;
  std::uint64_t seed = 7;
  int out_groups = 1;
  int in_groups = 1;
};

struct PNormEstimate {
  double value = 0.0;
  std::string method;
  int iterations = 0;
  bool converged = true;
  bool exact = false;
  std::vector<double> transcript;
  VectorXcd maximizer;
};

/// Grouped ℓ^p norm: (Σ_x (Σ_c |v_{c,x}|²)^{p/2})^{1/p}; groups = 1 is plain ℓ^p.
/// h-weights cancel in every induced norm of this module and are omitted.
double grouped_norm(const VectorXcd& v, double p, int groups = 1);

/// Induced ℓ^p → ℓ^p norm. Exact for p ∈ {1, ∞} (column / row sums, ungrouped);
/// otherwise a lower bound: Boyd-Higham dual power iteration, which for p = 2
/// is run as its Krylov-accelerated form (Golub-Kahan-Lanczos).
PNormEstimate pnorm_estimate(const MatrixXcd& T, double p, const PNormOptions& opt = {});

/// max over the battery of ‖Tf‖_p / ‖f‖_p.
double battery_lower_bound(const MatrixXcd& T, double p, const std::vector<VectorXcd>& battery,
                           int out_groups = 1, int in_groups = 1);

/// Largest singular value.
double spectral_norm(const MatrixXcd& T);

struct Battery {
  std::string version;
  std::vector<std::string> names;
  std::vector<Field> members;
};

/// Seeded random fields, Gaussian bumps at three widths, waves at three
/// frequencies and delta columns.
Battery make_battery(const Grid& g, std::uint64_t seed = 11);

/// Zero the battery members on λQ (for the Shen probe).
Battery restrict_outside(const Grid& g, const Battery& b, const Cube& q);

struct TheoremRange {
  std::string estimate;
  std::string transform;
  double lo = 1.0;
  double hi = 1.0;  // exclusive, before the unknown ε
  bool lo_inclusive = true;
};

/// Admissible p-ranges predicted for V ∈ RH_q in dimension n.
std::vector<TheoremRange> predicted_ranges(double q, int n);

struct SweepRow {
  std::string transform;
  double p = 2.0;
  int resolution = 0;
  double domain = 0.0;
  double norm = 0.0;
  std::string method;
  int iterations = 0;
  bool converged = true;
};

struct SweepFlag {
  std::string transform;
  double p = 2.0;
  double resolution_ratio = 1.0;  // finest / next finest resolution, largest domain
  double domain_ratio = 1.0;      // largest / next largest domain, finest resolution
  bool consistent = false;        // both ratios within [1/1.2, 1.2]
  bool growth = false;            // some ratio ≥ 2
};

struct SweepReport {
  std::string family;
  std::string battery_version;
  std::vector<SweepRow> rows;
  std::vector<SweepFlag> flags;
  std::vector<TheoremRange> ranges;
  double rh_q = 0.0;
  double control_C1 = 0.0, control_C2 = 0.0;
  bool p2_contract_ok = true;  // every L_jH^{-1/2}, V^{1/2}H^{-1/2} p = 2 norm ≤ 1 + 1e-8
};

struct SweepConfig {
  FamilySpec family;
  std::vector<TransformSpec> transforms;
  std::vector<double> p_list = {2.0, 4.0, 8.0};
  std::vector<int> resolutions = {24, 32, 48};
  std::vector<double> domains = {8.0, 12.0};
  int dim = 2;
  bool reverse = true;  // include the reverse-estimate ratio rows
  bool force = false;   // run even when the control condition fails
  PNormOptions pnorm;
  std::uint64_t seed = 11;
};

/// Norm table over (transform, p, resolution, domain) with stabilization flags.
SweepReport theorem_sweep(const SweepConfig& cfg);

inline constexpr const char* kReverseId = "reverse";

/// max over the battery of ‖H^{1/2}f‖_p / (‖Lf‖_p + ‖V^{1/2}f‖_p).
double reverse_ratio(const HOperator& H, const SpectralCache& S, const Battery& b, double p);

enum class WeakTypeMode {
  gradient,    // |{|Lf| > α}| ≤ (C/α) ‖H^{1/2}f‖₁
  square_root  // |{|H^{1/2}f| > α}| ≤ (C/α) ∫|Lf| + V^{1/2}|f|
};

/// max over (f, α) of α·#{|Tf| > α} / (right-hand side sum). Empty α list:
/// 24 geometric levels between 1e-3·max|Tf| and max|Tf| per member.
double weak_type_check(const HOperator& H, const SpectralCache& S, const Battery& b,
                       const std::vector<double>& alphas, WeakTypeMode mode);

struct L1Ratios {
  double potential = 0.0;  // Σ V|u| / Σ|f|, contract ≤ 1
  double free = 0.0;       // Σ |H₀u| / Σ|f|, contract ≤ 2
  double shift = 0.0;
};

/// u = (H+λ₀)^{-1} f by sparse factorization.
L1Ratios l1_maximal_check(const HOperator& H, const Field& f, double lambda0 = 0.0);

struct ShenProbe {
  double C = 0.0;
  double worst_lhs = 0.0;
  std::string worst_member;
};

/// Smallest C with (⨍_Q|Tf|^{q0})^{1/q0} ≤ C[(⨍_{α1Q}|Tf|^{p0})^{1/p0} + (S f)(x)]
/// for all battery members and x ∈ Q. Members must vanish on α2Q.
/// S may be empty (S = 0).
ShenProbe shen_hypothesis_probe(const Grid& g, const Transform& T,
                                const std::function<VectorXd(const VectorXcd&)>& S, const Cube& q,
                                const std::vector<VectorXcd>& battery, double p0, double q0,
                                double alpha1 = 2.0, double alpha2 = 4.0,
                                const std::vector<std::string>& names = {});

/// S f = (M |V^{1/2}H^{-1}L* f|²)^{1/2} for the LH^{-1}L* probe.
std::function<VectorXd(const VectorXcd&)> maximal_square(const Grid& g, const Transform& inner);

struct ImaginaryPowerRow {
  double y = 0.0;
  double p = 2.0;
  double norm = 0.0;
};

/// ‖H^{iy}‖_p over a y list (reported only).
std::vector<ImaginaryPowerRow> imaginary_power_profile(const TransformContext& ctx,
                                                       const std::vector<double>& ys,
                                                       const std::vector<double>& ps,
                                                       const PNormOptions& opt = {});

}  // namespace mslab
