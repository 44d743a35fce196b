#include <mslab/grid.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mslab {

Grid::Grid(int dim, int points, double spacing, Boundary boundary, const Point& origin)
    : dim_(dim), points_(points), spacing_(spacing), boundary_(boundary), origin_(origin) {
  require(dim == 2 || dim == 3, "grid: dimension must be 2 or 3");
  require(points >= 2, "grid: need at least 2 points per side");
  require(spacing > 0.0 && std::isfinite(spacing), "grid: spacing must be positive");
  require(origin.allFinite(), "grid: origin must be finite");
  for (int a = dim; a < 3; ++a) origin_[a] = 0.0;
  nodes_ = 1;
  for (int a = 0; a < dim; ++a) nodes_ *= points;
}

Index Grid::neighbor(Index k, int axis, int step) const noexcept {
  MultiIndex m = multi_index(k);
  int v = m[axis] + step;
  if (v < 0 || v >= points_) {
    if (boundary_ == Boundary::dirichlet) return -1;
    v = ((v % points_) + points_) % points_;
  }
  m[axis] = v;
  return index(m);
}

Index Grid::edges(int axis) const noexcept {
  (void)axis;
  if (boundary_ == Boundary::periodic) return nodes_;
  return nodes_ / points_ * (points_ + 1);
}

// Along `axis` the edge coordinate runs over -1..N-1 (Dirichlet) or 0..N-1;
// the remaining axes keep node ordering.
Index Grid::edge_index(MultiIndex lower, int axis) const noexcept {
  const int shift = boundary_ == Boundary::dirichlet ? 1 : 0;
  const int len = points_ + shift;
  Index k = 0;
  for (int a = dim_ - 1; a >= 0; --a) {
    if (a == axis)
      k = k * len + (lower[a] + shift);
    else
      k = k * points_ + lower[a];
  }
  return k;
}

MultiIndex Grid::edge_lower(Index e, int axis) const noexcept {
  const int shift = boundary_ == Boundary::dirichlet ? 1 : 0;
  const int len = points_ + shift;
  MultiIndex m{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    if (a == axis) {
      m[a] = static_cast<int>(e % len) - shift;
      e /= len;
    } else {
      m[a] = static_cast<int>(e % points_);
      e /= points_;
    }
  }
  return m;
}

Grid make_grid(int dim, int points, double spacing, Boundary boundary, const Point& origin) {
  return Grid(dim, points, spacing, boundary, origin);
}

Grid centered_grid(int dim, int points, double side, Boundary boundary) {
  require(side > 0.0, "centered_grid: side must be positive");
  const double h = side / points;
  Point o = Point::Zero();
  for (int a = 0; a < dim; ++a) o[a] = -0.5 * h * (points - 1);
  return Grid(dim, points, h, boundary, o);
}

Cube cube_around(const Grid& g, const Point& center, double physical_side) {
  require(physical_side > 0.0, "cube_around: side must be positive");
  Cube q;
  for (int a = 0; a < g.dim(); ++a) q.center[a] = (center[a] - g.origin()[a]) / g.spacing();
  q.side = physical_side / g.spacing();
  return q;
}

namespace {

constexpr double kCubeSlack = 1e-9;

// Lattice index range on one axis strictly inside the cube.
std::pair<int, int> axis_range(const Grid& g, const Cube& q, int a) {
  const double half = 0.5 * q.side - kCubeSlack;
  int lo = static_cast<int>(std::ceil(q.center[a] - half));
  int hi = static_cast<int>(std::floor(q.center[a] + half));
  lo = std::max(lo, 0);
  hi = std::min(hi, g.points() - 1);
  return {lo, hi};
}

}  // namespace

bool cube_contains(const Grid& g, const Cube& q, const MultiIndex& m) {
  const double half = 0.5 * q.side - kCubeSlack;
  for (int a = 0; a < g.dim(); ++a)
    if (std::abs(m[a] - q.center[a]) > half) return false;
  return g.contains(m);
}

std::vector<Index> cube_nodes(const Grid& g, const Cube& q) {
  std::array<std::pair<int, int>, 3> r{{{0, 0}, {0, 0}, {0, 0}}};
  for (int a = 0; a < g.dim(); ++a) {
    r[a] = axis_range(g, q, a);
    if (r[a].first > r[a].second) return {};
  }
  std::vector<Index> out;
  MultiIndex m{0, 0, 0};
  for (m[2] = r[2].first; m[2] <= r[2].second; ++m[2])
    for (m[1] = r[1].first; m[1] <= r[1].second; ++m[1])
      for (m[0] = r[0].first; m[0] <= r[0].second; ++m[0]) out.push_back(g.index(m));
  return out;
}

Cube DyadicCube::cube(int dim) const {
  Cube q;
  const double s = side_nodes();
  for (int a = 0; a < dim; ++a) q.center[a] = corner[a] + 0.5 * (s - 1.0);
  q.side = s;
  return q;
}

CubeFamily dyadic_cubes(const Grid& g, int level) {
  require(level >= 0, "dyadic_cubes: level must be nonnegative");
  require(level < 31 && (1 << level) <= g.points(), "dyadic_cubes: cube exceeds the domain");
  const int s = 1 << level;
  const int per_axis = g.points() / s;
  CubeFamily fam;
  fam.level = level;
  Index total = 1, kept = 1;
  for (int a = 0; a < g.dim(); ++a) {
    total *= (g.points() + s - 1) / s;
    kept *= per_axis;
  }
  fam.dropped = total - kept;
  const int zmax = g.dim() == 3 ? per_axis : 1;
  for (int z = 0; z < zmax; ++z)
    for (int y = 0; y < per_axis; ++y)
      for (int x = 0; x < per_axis; ++x)
        fam.cubes.push_back(DyadicCube{level, MultiIndex{x * s, y * s, z * s}});
  return fam;
}

EdgePhaseField EdgePhaseField::zero(const Grid& g) {
  EdgePhaseField t;
  t.theta.assign(g.dim(), VectorXd::Zero(g.nodes()));
  return t;
}

bool EdgePhaseField::matches(const Grid& g) const {
  if (static_cast<int>(theta.size()) != g.dim()) return false;
  for (const auto& t : theta)
    if (t.size() != g.nodes() || !t.allFinite()) return false;
  return true;
}

EdgePhaseField EdgePhaseField::gauge_shift(const Grid& g, const VectorXd& phi) const {
  require(matches(g) && phi.size() == g.nodes(), "gauge_shift: grid mismatch");
  EdgePhaseField out = *this;
  for (int j = 0; j < g.dim(); ++j)
    for (Index k = 0; k < g.nodes(); ++k) {
      const Index up = g.neighbor(k, j, 1);
      if (up >= 0) out.theta[j][k] += phi[up] - phi[k];
    }
  return out;
}

double EdgePhaseField::plaquette_flux(const Grid& g, Index k, int a, int b) const {
  const Index ka = g.neighbor(k, a, 1);
  const Index kb = g.neighbor(k, b, 1);
  if (ka < 0 || kb < 0) return 0.0;
  const double circ = theta[a][k] + theta[b][ka] - theta[a][kb] - theta[b][k];
  return std::remainder(circ, 2.0 * std::numbers::pi);
}

SparseMatrixXcd covariant_matrix(const Grid& g, const EdgePhaseField& theta, int axis) {
  require(theta.matches(g), "covariant_matrix: phase field does not match grid");
  require(axis >= 0 && axis < g.dim(), "covariant_matrix: direction out of range");
  const Complex c = 1.0 / (I * g.spacing());
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(2 * g.edges(axis));
  for (Index k = 0; k < g.nodes(); ++k) {
    const MultiIndex m = g.multi_index(k);
    const Index e = g.edge_index(m, axis);
    trip.emplace_back(e, k, -c);
    const Index up = g.neighbor(k, axis, 1);
    if (up >= 0) trip.emplace_back(e, up, c * std::exp(-I * theta.theta[axis][k]));
    if (g.boundary() == Boundary::dirichlet && m[axis] == 0) {
      MultiIndex ghost = m;
      ghost[axis] = -1;
      trip.emplace_back(g.edge_index(ghost, axis), k, c);
    }
  }
  SparseMatrixXcd L(g.edges(axis), g.nodes());
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

EdgeField covariant_derivative(const Grid& g, const Field& u, const EdgePhaseField& theta,
                               int axis) {
  require(u.size() == g.nodes(), "covariant_derivative: field does not match grid");
  return covariant_matrix(g, theta, axis) * u;
}

Field forward_values(const Grid& g, const EdgeField& e, int axis) {
  require(e.size() == g.edges(axis), "forward_values: edge field does not match grid");
  Field out(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) out[k] = e[g.forward_edge(k, axis)];
  return out;
}

WeightField forward_gradient_density(const Grid& g, const std::vector<EdgeField>& Lu) {
  require(static_cast<int>(Lu.size()) == g.dim(), "gradient_density: need one edge field per axis");
  WeightField out = WeightField::Zero(g.nodes());
  for (int j = 0; j < g.dim(); ++j) out += forward_values(g, Lu[j], j).cwiseAbs2();
  return out;
}

WeightField gradient_density(const Grid& g, const std::vector<EdgeField>& Lu) {
  WeightField out = forward_gradient_density(g, Lu);
  if (g.boundary() != Boundary::dirichlet) return out;
  for (int j = 0; j < g.dim(); ++j)
    for (Index k = 0; k < g.nodes(); ++k) {
      MultiIndex m = g.multi_index(k);
      if (m[j] != 0) continue;
      m[j] = -1;
      out[k] += std::norm(Lu[j][g.edge_index(m, j)]);
    }
  return out;
}

}  // namespace mslab
