#include <mslab/operators.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mslab {

HOperator::HOperator(const Grid& g, EdgePhaseField theta, WeightField V)
    : grid_(g), theta_(std::move(theta)), V_(std::move(V)) {
  require(theta_.matches(g), "assemble: phase field does not match grid");
  require(V_.size() == g.nodes(), "assemble: potential does not match grid");
  require(V_.allFinite() && (V_.size() == 0 || V_.minCoeff() >= 0.0),
          "assemble: potential must be finite and nonnegative");
  const Index n = g.nodes();
  H_.resize(n, n);
  std::vector<Eigen::Triplet<Complex>> diag;
  for (Index k = 0; k < n; ++k) diag.emplace_back(k, k, V_[k]);
  H_.setFromTriplets(diag.begin(), diag.end());
  for (int j = 0; j < g.dim(); ++j) {
    L_.push_back(covariant_matrix(g, theta_, j));
    SparseMatrixXcd LtL = SparseMatrixXcd(L_.back().adjoint()) * L_.back();
    H_ += LtL;
    // P_j picks the forward edge of every node
    SparseMatrixXcd P(n, g.edges(j));
    std::vector<Eigen::Triplet<Complex>> trip;
    for (Index k = 0; k < n; ++k) trip.emplace_back(k, g.forward_edge(k, j), 1.0);
    P.setFromTriplets(trip.begin(), trip.end());
    D_.push_back(P * L_.back());
  }
  H_.makeCompressed();
}

std::vector<EdgeField> HOperator::gradient(const Field& u) const {
  require(u.size() == size(), "gradient: field does not match grid");
  std::vector<EdgeField> out;
  for (const auto& L : L_) out.push_back(L * u);
  return out;
}

double HOperator::energy(const Field& u) const {
  double e = 0.0;
  for (const auto& Lu : gradient(u)) e += Lu.squaredNorm();
  for (Index k = 0; k < size(); ++k) e += V_[k] * std::norm(u[k]);
  return e;
}

double HOperator::form(const Field& u) const {
  require(u.size() == size(), "form: field does not match grid");
  return (H_ * u).dot(u).real();
}

HOperator assemble(const Grid& g, const EdgePhaseField& theta, const WeightField& V) {
  return HOperator(g, theta, V);
}

HOperator free_laplacian(const Grid& g) {
  return HOperator(g, EdgePhaseField::zero(g), WeightField::Zero(g.nodes()));
}

HOperator magnetic_part(const HOperator& H) {
  return HOperator(H.grid(), H.theta(), WeightField::Zero(H.size()));
}

Index SpectralCache::kernel_dim() const {
  const double tol = 1e-10 * max_value();
  Index c = 0;
  for (Index i = 0; i < values.size(); ++i)
    if (std::abs(values(i)) <= tol) ++c;
  return c;
}

double SpectralCache::default_shift() const {
  return kernel_dim() > 0 ? 1e-8 * max_value() : 0.0;
}

double SpectralCache::reconstruction_error(const MatrixXcd& H) const {
  const MatrixXcd R = vectors * values.asDiagonal() * vectors.adjoint() - H;
  return R.norm() / std::max(H.norm(), 1e-300);
}

double SpectralCache::orthonormality_error() const {
  const Index n = vectors.cols();
  return (vectors.adjoint() * vectors - MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
}

SpectralCache spectral_decompose(const MatrixXcd& H, Index cap) {
  require(H.rows() == H.cols(), "spectral_decompose: matrix must be square");
  if (H.rows() > cap)
    throw NumericalError("spectral_decompose: " + std::to_string(H.rows()) +
                         " nodes exceed the dense cap of " + std::to_string(cap) +
                         "; use the iterative resolvent mode (solve_shifted / green_kernel)");
  const double asym = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff()))
    throw InputError("spectral_decompose: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_decompose: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

SpectralCache spectral_decompose(const HOperator& H, Index cap) {
  if (H.size() > cap)
    throw NumericalError("spectral_decompose: " + std::to_string(H.size()) +
                         " nodes exceed the dense cap of " + std::to_string(cap) +
                         "; use the iterative resolvent mode (solve_shifted / green_kernel)");
  return spectral_decompose(H.dense(), cap);
}

VectorXcd symbol_values(const SpectralCache& S, const Symbol& f) {
  const double tol = 1e-10 * S.max_value();
  const Index n = S.values.size();
  VectorXcd out(n);
  for (Index i = 0; i < n; ++i) {
    const double x = std::max(S.values(i), 0.0);
    const bool zero = std::abs(S.values(i)) <= tol;
    switch (f.kind) {
      case SymbolKind::identity:
        out(i) = 1.0;
        break;
      case SymbolKind::sqrt:
        out(i) = zero ? 0.0 : std::sqrt(x);
        break;
      case SymbolKind::inv_sqrt:
      case SymbolKind::resolvent: {
        require(f.lambda0 >= 0.0, "symbol: shift must be nonnegative");
        if (zero && f.lambda0 <= 0.0)
          throw NumericalError("symbol: singular at a kernel eigenvalue; supply a shift λ₀ > 0");
        const double s = x + f.lambda0;
        out(i) = f.kind == SymbolKind::resolvent ? 1.0 / s : 1.0 / std::sqrt(s);
        break;
      }
      case SymbolKind::imaginary_power:
        out(i) = zero ? Complex(0.0) : std::exp(I * f.y * std::log(x));
        break;
      case SymbolKind::heat:
        require(f.t >= 0.0, "symbol: heat time must be nonnegative");
        out(i) = std::exp(-f.t * S.values(i));
        break;
    }
  }
  return out;
}

Field apply_function(const SpectralCache& S, const Symbol& f, const Field& u) {
  require(u.size() == S.vectors.rows(), "apply_function: field does not match operator");
  const VectorXcd c = S.vectors.adjoint() * u;
  return S.vectors * symbol_values(S, f).cwiseProduct(c);
}

MatrixXcd function_matrix(const SpectralCache& S, const Symbol& f) {
  return S.vectors * symbol_values(S, f).asDiagonal() * S.vectors.adjoint();
}

double heat_domination_check(const SpectralCache& H, const SpectralCache& free, double t,
                             const Field& u) {
  require(t >= 0.0, "heat_domination_check: t must be nonnegative");
  const Field a = apply_function(H, Symbol::heat(t), u);
  const Field b = apply_function(free, Symbol::heat(t), u.cwiseAbs().cast<Complex>());
  return (a.cwiseAbs() - b.real()).maxCoeff();
}

double kato_simon_check(const SpectralCache& H, const SpectralCache& free, double lambda,
                        const Field& f) {
  require(lambda > 0.0, "kato_simon_check: λ must be positive");
  const Field a = apply_function(H, Symbol::resolvent(lambda), f);
  const Field b = apply_function(free, Symbol::resolvent(lambda), f.cwiseAbs().cast<Complex>());
  return (a.cwiseAbs() - b.real()).maxCoeff();
}

VectorXd gradient_magnitude(const HOperator& H, const Field& u) {
  return gradient_density(H.grid(), H.gradient(u)).cwiseSqrt();
}

Field solve_shifted(const HOperator& H, double lambda0, const Field& b) {
  require(lambda0 >= 0.0, "solve_shifted: shift must be nonnegative");
  require(b.size() == H.size(), "solve_shifted: right-hand side does not match");
  SparseMatrixXcd A = H.matrix();
  if (lambda0 > 0.0) {
    SparseMatrixXcd Id(A.rows(), A.cols());
    Id.setIdentity();
    A += lambda0 * Id;
  }
  Eigen::SimplicialLDLT<SparseMatrixXcd> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw NumericalError("solve_shifted: factorization failed");
  const double dmin = ldlt.vectorD().real().cwiseAbs().minCoeff();
  const double dmax = ldlt.vectorD().real().cwiseAbs().maxCoeff();
  if (!(dmin > 1e-13 * dmax)) throw NumericalError("solve_shifted: singular system; supply a shift");
  Field x = ldlt.solve(b);
  if (!x.allFinite()) throw NumericalError("solve_shifted: non-finite solution");
  return x;
}

double kato_simon_check(const HOperator& H, const HOperator& free, double lambda, const Field& f) {
  require(lambda > 0.0, "kato_simon_check: λ must be positive");
  require(H.grid() == free.grid(), "kato_simon_check: grid mismatch");
  const Field a = solve_shifted(H, lambda, f);
  const Field b = solve_shifted(free, lambda, f.cwiseAbs().cast<Complex>());
  return (a.cwiseAbs() - b.real()).maxCoeff();
}

KernelSlice green_kernel(const HOperator& H, Index y, double lambda0,
                         std::optional<std::pair<double, double>> fit) {
  const Grid& g = H.grid();
  require(y >= 0 && y < g.nodes(), "green_kernel: source outside the grid");
  KernelSlice K;
  K.source = y;
  K.lambda0 = lambda0;
  Field delta = Field::Zero(g.nodes());
  delta[y] = 1.0 / g.cell_volume();
  K.column = solve_shifted(H, lambda0, delta);

  const Point py = g.coord(y);
  K.distance.resize(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) K.distance[k] = (g.coord(k) - py).norm();

  Field r = H.matrix() * K.column + lambda0 * K.column - delta;
  r[y] = 0.0;
  double hnorm = 0.0;
  for (Index k = 0; k < H.matrix().outerSize(); ++k) {
    double s = 0.0;
    for (SparseMatrixXcd::InnerIterator it(H.matrix(), k); it; ++it) s += std::abs(it.value());
    hnorm = std::max(hnorm, s);
  }
  hnorm += lambda0;
  K.offsource_residual = r.cwiseAbs().maxCoeff() / (hnorm * K.column.cwiseAbs().maxCoeff());

  const auto [lo, hi] = fit.value_or(std::make_pair(4.0 * g.spacing(), g.side_length() / 4.0));
  K.fit_lo = lo;
  K.fit_hi = hi;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (Index k = 0; k < g.nodes(); ++k) {
    const double d = K.distance[k];
    if (k != y) K.bound_constant = std::max(K.bound_constant, std::abs(K.column[k]) * std::pow(d, g.dim() - 2));
    if (d < lo - 1e-12 || d > hi + 1e-12 || std::abs(K.column[k]) <= 0.0) continue;
    const double lx = std::log(d), ly = std::log(std::abs(K.column[k]));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++K.fit_points;
  }
  if (K.fit_points >= 2) {
    const double m = static_cast<double>(K.fit_points);
    const double den = m * sxx - sx * sx;
    K.exponent = den > 0 ? (m * sxy - sx * sy) / den : 0.0;
  }
  return K;
}

CommutatorReport commutator_identity_check(const HOperator& H0, const MagneticField& B,
                                           const std::function<Eigen::Matrix3d(const Point&, int)>& dF,
                                           int k, const Field& u) {
  const Grid& g = H0.grid();
  require(k >= 0 && k < g.dim(), "commutator_identity_check: direction out of range");
  require(u.size() == H0.size(), "commutator_identity_check: field does not match grid");
  require(H0.potential().cwiseAbs().maxCoeff() == 0.0, "commutator_identity_check: needs H(a, 0)");
  // The plaquette fluxes of θ must carry B.
  for (Index x = 0; x < g.nodes(); ++x)
    for (int a = 0; a < g.dim(); ++a)
      for (int b = a + 1; b < g.dim(); ++b) {
        if (g.neighbor(x, a, 1) < 0 || g.neighbor(x, b, 1) < 0) continue;
        const double want = plaquette_flux(g, B, x, a, b);
        const double got = H0.theta().plaquette_flux(g, x, a, b);
        if (std::abs(std::remainder(want - got, 2 * std::numbers::pi)) > 1e-6 + 1e-3 * std::abs(want))
          throw InputError("commutator_identity_check: θ is inconsistent with B");
      }
  const SparseMatrixXcd& H = H0.matrix();
  const SparseMatrixXcd& Dk = H0.D(k);
  const Field lhs = Dk * (H * u) - H * (Dk * u);
  Field rhs = Field::Zero(u.size());
  std::vector<Field> Du;
  for (int j = 0; j < g.dim(); ++j) Du.push_back(H0.D(j) * u);
  for (Index x = 0; x < g.nodes(); ++x) {
    const Point p = g.coord(x);
    const Eigen::Matrix3d F = B.strength(p);
    double div = 0.0;
    for (int j = 0; j < g.dim(); ++j) {
      rhs[x] += 2.0 * I * F(k, j) * Du[j][x];
      div += dF(p, j)(k, j);
    }
    rhs[x] += div * u[x];
  }
  return {(lhs - rhs).norm() / u.norm(), lhs.norm() / u.norm()};
}

}  // namespace mslab
