#pragma once

#include <mslab/grid.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <functional>

namespace mslab {

/// Magnetic field as its antisymmetric strength F_jk = ∂_j a_k - ∂_k a_j.
/// In 2D only F_01 = b is used.
struct MagneticField {
  int dim = 2;
  std::function<Eigen::Matrix3d(const Point&)> strength;
  // |∇B|(x); empty when no analytic gradient is available.
  std::function<double(const Point&)> gradient_norm;

  /// |B| = Σ_{j<k} |F_jk|.
  double magnitude(const Point& x) const;
  /// b = F_01 (planar component).
  double planar(const Point& x) const { return strength(x)(0, 1); }
};

MagneticField zero_field(int dim);
MagneticField constant_field(int dim, double b);
/// Planar field b(x) (F_01 = b, F_10 = -b); in 3D it is extended as
/// independent of x3, which keeps it closed.
MagneticField planar_field(int dim, std::function<double(const Point&)> b,
                           std::function<Eigen::Vector3d(const Point&)> grad = {});
MagneticField scaled(const MagneticField& B, double c);
MagneticField sum(const MagneticField& A, const MagneticField& B);

class FluxMismatch : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Exact flux ∫ F_ab over the plaquette at node k (3x3 Gauss).
double plaquette_flux(const Grid& g, const MagneticField& B, Index k, int a, int b);

/// Discrete Landau gauge (2D, Dirichlet): θ_0 = 0 and θ_1 accumulates the
/// exact plaquette fluxes along x_0, so every plaquette carries its exact flux.
EdgePhaseField landau_phases(const Grid& g, const MagneticField& B);

/// θ_j(x) = ∫ a_j along each edge (Simpson).
EdgePhaseField phases_from_potential(const Grid& g,
                                     const std::function<Eigen::Vector3d(const Point&)>& a);

/// Independent uniform phases in [-amplitude, amplitude].
EdgePhaseField random_phases(const Grid& g, std::uint64_t seed, double amplitude = 3.14159265358979);

enum class FluxGauge { landau, symmetric };
/// Periodic 2D lattice with flux 2πm/N² through every plaquette (including
/// those closing around the torus).
EdgePhaseField uniform_flux_phases(const Grid& g, int m, FluxGauge gauge);

/// Block of lattice nodes lo[a] .. lo[a]+extent[a] on every axis.
struct NodeBox {
  MultiIndex lo{0, 0, 0};
  MultiIndex extent{1, 1, 0};

  static NodeBox square(const MultiIndex& lo, int extent, int dim);
  int max_extent(int dim) const;

  Index count(int dim) const;
  MultiIndex local(Index i, int dim) const;
  Index local_index(const MultiIndex& m, int dim) const;
  bool contains(const MultiIndex& m, int dim) const;
};

/// Bounding node box of a cube (clipped to the grid).
NodeBox box_of(const Grid& g, const Cube& q);
/// Global node indices of the box in local order (axis 0 fastest).
std::vector<Index> box_nodes(const Grid& g, const NodeBox& box);

/// Poincaré gauge h_k(x) = ∫_0^1 t (x-c)_j F_jk(c + t(x-c)) dt.
Eigen::Vector3d poincare_h(const MagneticField& B, const Point& c, const Point& x);
/// Axis-integration gauge (2D): h = (-∫_{c_1}^{x_1} b(x_0, s) ds, 0).
Eigen::Vector3d axis_h(const MagneticField& B, const Point& c, const Point& x);

struct GaugeData {
  NodeBox box;
  Point center = Point::Zero();
  double R = 0.0;  // physical side of the box (longest axis)
  std::vector<VectorXd> h;        // node samples, local order, per component
  std::vector<VectorXd> h_edges;  // ∫ h_j along box edges, local lower-node order
  VectorXd phi;                   // recovered phase, local order (empty until recover_phi)
  double sup_h = 0.0;
  double sup_B = 0.0;
  double sup_grad_h = 0.0;
  double sup_grad_B = 0.0;  // from the analytic gradient or differences
  bool grad_B_numeric = false;
  double curl_residual = 0.0;  // max_plaquette |∮h/h² - F(plaquette centre)|
  double mismatch = 0.0;       // max loop mismatch from recover_phi
  double tolerance = 0.0;

  double bound_ratio() const { return sup_B > 0 ? sup_h / (R * sup_B) : 0.0; }
  /// sup|∇h| / (sup|B| + R sup|∇B|)
  double gradient_ratio() const;
};

enum class GaugeKind { poincare, axis };

GaugeData poincare_gauge(const Grid& g, const MagneticField& B, const NodeBox& box,
                         GaugeKind kind = GaugeKind::poincare);

/// Sums θ - h_edges along axis-ordered paths from the lowest corner of the box.
/// Throws FluxMismatch when some elementary loop disagrees by more than
/// `tolerance` (negative: default 10 h² max(curl residual, 1e-6 sup|B|) + 1e-9).
void recover_phi(const Grid& g, const EdgePhaseField& theta, GaugeData& gauge,
                 double tolerance = -1.0);

/// Phases equal to h_edges + dφ on box edges and θ elsewhere.
EdgePhaseField regauged_phases(const Grid& g, const EdgePhaseField& theta, const GaugeData& gauge);

/// Separable mollification of B with the (1-(s/ρ)²)² kernel.
MagneticField mollify(const MagneticField& B, double radius);

/// Gauge of the mollified field; bound constants are reported against the
/// un-mollified sup|B|.
GaugeData mollified_gauge(const Grid& g, const MagneticField& B, const NodeBox& box,
                          double radius);

}  // namespace mslab
