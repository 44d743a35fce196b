#pragma once

#include <mslab/gauge.hpp>
#include <mslab/grid.hpp>

#include <optional>

namespace mslab {

/// H = Σ_j L_j† L_j + diag(V) on a lattice.
class HOperator {
 public:
  HOperator(const Grid& g, EdgePhaseField theta, WeightField V);

  const Grid& grid() const noexcept { return grid_; }
  const EdgePhaseField& theta() const noexcept { return theta_; }
  const WeightField& potential() const noexcept { return V_; }
  const SparseMatrixXcd& L(int j) const { return L_.at(j); }
  /// Square node-to-node forward difference: (D_j u)(x) = (L_j u)(x -> x+h e_j).
  const SparseMatrixXcd& D(int j) const { return D_.at(j); }
  const SparseMatrixXcd& matrix() const noexcept { return H_; }
  MatrixXcd dense() const { return MatrixXcd(H_); }
  Index size() const noexcept { return H_.rows(); }

  std::vector<EdgeField> gradient(const Field& u) const;
  /// Σ_j ‖L_j u‖² + ‖V^{1/2} u‖² (plain sums, no cell volume).
  double energy(const Field& u) const;
  /// Re ⟨Hu, u⟩.
  double form(const Field& u) const;

 private:
  Grid grid_;
  EdgePhaseField theta_;
  WeightField V_;
  std::vector<SparseMatrixXcd> L_;
  std::vector<SparseMatrixXcd> D_;
  SparseMatrixXcd H_;
};

/// Pointwise |Lu| at the nodes (square root of the gradient density).
VectorXd gradient_magnitude(const HOperator& H, const Field& u);

HOperator assemble(const Grid& g, const EdgePhaseField& theta, const WeightField& V);
/// -Δ on the same lattice and boundary condition.
HOperator free_laplacian(const Grid& g);
/// The same operator with V replaced by zero (H_0 = H(a, 0)).
HOperator magnetic_part(const HOperator& H);

inline constexpr Index kSpectralCap = 4096;

struct SpectralCache {
  VectorXd values;    // ascending
  MatrixXcd vectors;  // orthonormal columns

  double max_value() const { return values.size() ? std::max(std::abs(values(0)), std::abs(values(values.size() - 1))) : 0.0; }
  /// Eigenvalues within 1e-10·max of zero.
  Index kernel_dim() const;
  /// 1e-8·max when a kernel is present, otherwise 0.
  double default_shift() const;
  double reconstruction_error(const MatrixXcd& H) const;
  double orthonormality_error() const;
};

SpectralCache spectral_decompose(const MatrixXcd& H, Index cap = kSpectralCap);
SpectralCache spectral_decompose(const HOperator& H, Index cap = kSpectralCap);

enum class SymbolKind { identity, sqrt, inv_sqrt, resolvent, imaginary_power, heat };

/// One of x^{1/2}, (x+λ₀)^{-1/2}, (x+λ₀)^{-1}, x^{iy}, e^{-tx}.
struct Symbol {
  SymbolKind kind = SymbolKind::identity;
  double lambda0 = 0.0;
  double y = 0.0;
  double t = 0.0;

  static Symbol sqrt() { return {SymbolKind::sqrt}; }
  static Symbol inv_sqrt(double l0 = 0.0) { return {SymbolKind::inv_sqrt, l0}; }
  static Symbol resolvent(double l0 = 0.0) { return {SymbolKind::resolvent, l0}; }
  static Symbol imaginary_power(double y) { return {SymbolKind::imaginary_power, 0.0, y}; }
  static Symbol heat(double t) { return {SymbolKind::heat, 0.0, 0.0, t}; }
};

/// f(λ_i) for every eigenvalue; throws NumericalError for a singular symbol at
/// a kernel eigenvalue without shift. x^{iy} vanishes on the kernel.
VectorXcd symbol_values(const SpectralCache& S, const Symbol& f);
Field apply_function(const SpectralCache& S, const Symbol& f, const Field& u);
MatrixXcd function_matrix(const SpectralCache& S, const Symbol& f);

/// max_x (|e^{-tH}u| - e^{tΔ}|u|)(x).
double heat_domination_check(const SpectralCache& H, const SpectralCache& free, double t,
                             const Field& u);
/// max_x (|(H+λ)^{-1}f| - (-Δ+λ)^{-1}|f|)(x).
double kato_simon_check(const SpectralCache& H, const SpectralCache& free, double lambda,
                        const Field& f);
/// Same via sparse factorizations (no size cap).
double kato_simon_check(const HOperator& H, const HOperator& free, double lambda, const Field& f);

/// (H + λ₀)^{-1} b by sparse LDLᵀ; throws NumericalError when singular.
Field solve_shifted(const HOperator& H, double lambda0, const Field& b);

struct KernelSlice {
  Index source = 0;
  double lambda0 = 0.0;
  Field column;         // Γ(·, y) = (H + λ₀)^{-1} δ_y / h^n
  VectorXd distance;    // |x - y|
  double exponent = 0.0;  // log-log slope of |Γ| over the fit range
  double fit_lo = 0.0, fit_hi = 0.0;
  Index fit_points = 0;
  double offsource_residual = 0.0;  // max_{x≠y} |((H+λ₀)Γ)(x)| relative to max|Γ|·‖H‖
  double bound_constant = 0.0;      // max_{x≠y} |Γ| |x-y|^{n-2}
};

/// Fit range defaults to [4h, side/4].
KernelSlice green_kernel(const HOperator& H, Index y, double lambda0,
                         std::optional<std::pair<double, double>> fit = std::nullopt);

/// Continuum identity [L_k, H₀] = Σ_j (2i F_kj L_j + ∂_j F_kj) checked on
/// the lattice with forward differences. Returns ‖residual‖₂/‖u‖₂.
struct CommutatorReport {
  double residual = 0.0;
  double lhs_norm = 0.0;
};
CommutatorReport commutator_identity_check(const HOperator& H0, const MagneticField& B,
                                           const std::function<Eigen::Matrix3d(const Point&, int)>& dF,
                                           int k, const Field& u);

}  // namespace mslab
