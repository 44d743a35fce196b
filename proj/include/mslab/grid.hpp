#pragma once

#include <mslab/types.hpp>

#include <cmath>
#include <vector>

namespace mslab {

enum class Boundary { dirichlet, periodic };

/// Uniform lattice with N points per side in dimension 2 or 3.
///
/// Nodes are numbered with axis 0 fastest. Under Dirichlet conditions fields
/// extend by zero outside the lattice; under periodic conditions indices wrap.
///
/// Edges of direction j are labelled by their lower endpoint. Dirichlet
/// lattices carry one extra layer of edges per line (lower endpoint index -1,
/// i.e. entering the lattice from the ghost layer), so that N+1 edges join the
/// N nodes of a line to the zero boundary on both sides.
class Grid {
 public:
  Grid(int dim, int points, double spacing, Boundary boundary, const Point& origin);

  int dim() const noexcept { return dim_; }
  int points() const noexcept { return points_; }
  double spacing() const noexcept { return spacing_; }
  Boundary boundary() const noexcept { return boundary_; }
  const Point& origin() const noexcept { return origin_; }

  Index nodes() const noexcept { return nodes_; }
  double side_length() const noexcept { return points_ * spacing_; }
  double cell_volume() const noexcept { return std::pow(spacing_, dim_); }

  Index index(const MultiIndex& m) const noexcept {
    Index k = 0;
    for (int a = dim_ - 1; a >= 0; --a) k = k * points_ + m[a];
    return k;
  }
  MultiIndex multi_index(Index k) const noexcept {
    MultiIndex m{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      m[a] = static_cast<int>(k % points_);
      k /= points_;
    }
    return m;
  }
  bool contains(const MultiIndex& m) const noexcept {
    for (int a = 0; a < dim_; ++a)
      if (m[a] < 0 || m[a] >= points_) return false;
    return true;
  }

  Point coord(const MultiIndex& m) const noexcept {
    Point x = origin_;
    for (int a = 0; a < dim_; ++a) x[a] += spacing_ * m[a];
    return x;
  }
  Point coord(Index k) const noexcept { return coord(multi_index(k)); }
  // Physical location of a fractional lattice position.
  Point coord(const Eigen::Vector3d& fractional) const noexcept {
    Point x = origin_;
    for (int a = 0; a < dim_; ++a) x[a] += spacing_ * fractional[a];
    return x;
  }

  /// Neighbour of node k one step (+1 or -1) along axis; -1 when it falls
  /// outside a Dirichlet lattice.
  Index neighbor(Index k, int axis, int step) const noexcept;

  Index edges(int axis) const noexcept;
  /// Edge whose lower endpoint is m; m[axis] == -1 denotes a ghost edge
  /// (Dirichlet only).
  Index edge_index(MultiIndex lower, int axis) const noexcept;
  Index forward_edge(Index node, int axis) const noexcept {
    return edge_index(multi_index(node), axis);
  }
  MultiIndex edge_lower(Index e, int axis) const noexcept;

  bool operator==(const Grid&) const = default;

 private:
  int dim_;
  int points_;
  double spacing_;
  Boundary boundary_;
  Point origin_;
  Index nodes_;
};

Grid make_grid(int dim, int points, double spacing, Boundary boundary,
               const Point& origin = Point::Zero());

/// Grid of N points per side centred at the physical origin spanning `side`.
Grid centered_grid(int dim, int points, double side, Boundary boundary);

/// Axis-aligned cube in lattice coordinates. Node i belongs to the cube when
/// |i_a - center_a| < side/2 on every axis (strict), so a dilation of a
/// single-node cube by 2 is still that node.
struct Cube {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double side = 1.0;  // in lattice units

  Cube dilate(double factor) const { return {center, side * factor}; }
  double physical_side(const Grid& g) const { return side * g.spacing(); }
};

/// Centered cube of physical side R around a physical point.
Cube cube_around(const Grid& g, const Point& center, double physical_side);

std::vector<Index> cube_nodes(const Grid& g, const Cube& q);
bool cube_contains(const Grid& g, const Cube& q, const MultiIndex& m);

/// Cube of the dyadic family at `level`: 2^level nodes per side whose lowest
/// node is `corner`.
struct DyadicCube {
  int level = 0;
  MultiIndex corner{0, 0, 0};

  int side_nodes() const noexcept { return 1 << level; }
  double side(const Grid& g) const noexcept { return side_nodes() * g.spacing(); }
  Cube cube(int dim) const;
  bool operator==(const DyadicCube&) const = default;
};

struct CubeFamily {
  int level = 0;
  std::vector<DyadicCube> cubes;
  Index dropped = 0;  // partial cubes at the far edges that were not clipped
};

/// Disjoint dyadic cubes of side 2^level·h covering the lattice; trailing
/// partial cubes are dropped and counted.
CubeFamily dyadic_cubes(const Grid& g, int level);

/// (1/|Q ∩ grid|) Σ_{x∈Q} |value(x)|^s over the lattice nodes of q.
template <typename Derived>
double cube_average(const Grid& g, const Eigen::MatrixBase<Derived>& values, const Cube& q,
                    double s = 1.0) {
  require(s > 0.0, "cube_average: exponent must be positive");
  require(values.size() == g.nodes(), "cube_average: field does not match grid");
  const auto nodes = cube_nodes(g, q);
  require(!nodes.empty(), "cube_average: cube does not meet the grid");
  double sum = 0.0;
  for (Index k : nodes) {
    const double v = std::abs(values(k));
    sum += (s == 1.0) ? v : std::pow(v, s);
  }
  return sum / static_cast<double>(nodes.size());
}

template <typename Derived>
double cube_sup(const Grid& g, const Eigen::MatrixBase<Derived>& values, const Cube& q) {
  const auto nodes = cube_nodes(g, q);
  require(!nodes.empty(), "cube_sup: cube does not meet the grid");
  double m = 0.0;
  for (Index k : nodes) m = std::max(m, static_cast<double>(std::abs(values(k))));
  return m;
}

/// Magnetic potential as per-edge line integrals θ_j(x) = ∫_{x}^{x+h e_j} a_j.
/// Indexed by the lower node; ghost edges of a Dirichlet lattice need no phase
/// since the field vanishes on the ghost layer.
struct EdgePhaseField {
  std::vector<VectorXd> theta;

  static EdgePhaseField zero(const Grid& g);
  bool matches(const Grid& g) const;
  /// θ_j(x) + φ(x+h e_j) - φ(x): the phases after u -> e^{iφ} u.
  EdgePhaseField gauge_shift(const Grid& g, const VectorXd& phi) const;
  /// Counter-clockwise flux through the plaquette spanned by axes (a, b) at
  /// node k, reduced to (-π, π]. Returns 0 when the plaquette leaves a
  /// Dirichlet lattice.
  double plaquette_flux(const Grid& g, Index k, int a, int b) const;
};

/// Sparse matrix of L_j = (1/(i h)) (e^{-iθ_j} S_j - 1) from nodes to edges of
/// direction j.
SparseMatrixXcd covariant_matrix(const Grid& g, const EdgePhaseField& theta, int axis);

/// L_j u on the edges of direction j.
EdgeField covariant_derivative(const Grid& g, const Field& u, const EdgePhaseField& theta,
                               int axis);

/// Forward-edge values of an edge field restricted to nodes: out(x) = e(x -> x+h e_j).
Field forward_values(const Grid& g, const EdgeField& e, int axis);

/// Pointwise |Lu|^2 at nodes: Σ_j |L_j u(x -> x+h e_j)|^2, plus the ghost edge
/// entering x when x lies on the lower Dirichlet face. Summing over nodes
/// reproduces Σ_j ‖L_j u‖² exactly.
WeightField gradient_density(const Grid& g, const std::vector<EdgeField>& Lu);

/// Same but forward edges only (first-order pointwise quantity).
WeightField forward_gradient_density(const Grid& g, const std::vector<EdgeField>& Lu);

/// h-weighted discrete L^p norm (p = inf gives the max).
template <typename Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& v, double p, double cell_volume) {
  if (std::isinf(p)) return v.size() ? static_cast<double>(v.cwiseAbs().maxCoeff()) : 0.0;
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v(i)), p);
  return std::pow(s * cell_volume, 1.0 / p);
}

}  // namespace mslab
