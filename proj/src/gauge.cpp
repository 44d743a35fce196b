#include <mslab/gauge.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mslab {

namespace {

// Gauss–Legendre rules on [0, 1].
struct Rule {
  std::vector<double> x, w;
};

Rule legendre(int n) {
  static const double x8[] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                              0.9602898564975363};
  static const double w8[] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                              0.1012285362903763};
  Rule r;
  if (n == 3) {
    const double s = std::sqrt(0.6);
    r.x = {0.5 * (1 - s), 0.5, 0.5 * (1 + s)};
    r.w = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    return r;
  }
  for (int i = 3; i >= 0; --i) {
    r.x.push_back(0.5 * (1 - x8[i]));
    r.w.push_back(0.5 * w8[i]);
  }
  for (int i = 0; i < 4; ++i) {
    r.x.push_back(0.5 * (1 + x8[i]));
    r.w.push_back(0.5 * w8[i]);
  }
  return r;
}

const Rule& gl3() {
  static const Rule r = legendre(3);
  return r;
}
const Rule& gl8() {
  static const Rule r = legendre(8);
  return r;
}

void check_antisymmetric(const Eigen::Matrix3d& F) {
  const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
  if ((F + F.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InputError("magnetic field: strength is not antisymmetric");
}

// Largest |F_ab| outside the (0,1) plane.
double off_plane(const Eigen::Matrix3d& F) {
  return std::max(std::abs(F(0, 2)), std::abs(F(1, 2)));
}

}  // namespace

double MagneticField::magnitude(const Point& x) const {
  const Eigen::Matrix3d F = strength(x);
  double s = 0.0;
  for (int a = 0; a < dim; ++a)
    for (int b = a + 1; b < dim; ++b) s += std::abs(F(a, b));
  return s;
}

MagneticField zero_field(int dim) { return constant_field(dim, 0.0); }

MagneticField constant_field(int dim, double b) {
  MagneticField B = planar_field(dim, [b](const Point&) { return b; },
                                 [](const Point&) { return Eigen::Vector3d::Zero().eval(); });
  return B;
}

MagneticField planar_field(int dim, std::function<double(const Point&)> b,
                           std::function<Eigen::Vector3d(const Point&)> grad) {
  require(dim == 2 || dim == 3, "planar_field: dimension must be 2 or 3");
  MagneticField B;
  B.dim = dim;
  B.strength = [b](const Point& x) {
    Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
    F(0, 1) = b(x);
    F(1, 0) = -F(0, 1);
    return F;
  };
  if (grad) B.gradient_norm = [grad](const Point& x) { return grad(x).norm(); };
  return B;
}

MagneticField scaled(const MagneticField& B, double c) {
  MagneticField out;
  out.dim = B.dim;
  out.strength = [B, c](const Point& x) { return (c * B.strength(x)).eval(); };
  if (B.gradient_norm) out.gradient_norm = [B, c](const Point& x) { return std::abs(c) * B.gradient_norm(x); };
  return out;
}

MagneticField sum(const MagneticField& A, const MagneticField& B) {
  require(A.dim == B.dim, "sum: dimension mismatch");
  MagneticField out;
  out.dim = A.dim;
  out.strength = [A, B](const Point& x) { return (A.strength(x) + B.strength(x)).eval(); };
  // triangle bound; exact when one of the gradients vanishes
  if (A.gradient_norm && B.gradient_norm)
    out.gradient_norm = [A, B](const Point& x) { return A.gradient_norm(x) + B.gradient_norm(x); };
  return out;
}

double plaquette_flux(const Grid& g, const MagneticField& B, Index k, int a, int b) {
  const Point x = g.coord(k);
  const double h = g.spacing();
  const Rule& r = gl3();
  double s = 0.0;
  for (size_t i = 0; i < r.x.size(); ++i)
    for (size_t j = 0; j < r.x.size(); ++j) {
      Point y = x;
      y[a] += h * r.x[i];
      y[b] += h * r.x[j];
      s += r.w[i] * r.w[j] * B.strength(y)(a, b);
    }
  return s * h * h;
}

EdgePhaseField landau_phases(const Grid& g, const MagneticField& B) {
  require(g.boundary() == Boundary::dirichlet, "landau_phases: needs a Dirichlet grid");
  require(B.dim == g.dim(), "landau_phases: field dimension does not match grid");
  EdgePhaseField t = EdgePhaseField::zero(g);
  for (Index k = 0; k < g.nodes(); ++k) {
    const Eigen::Matrix3d F = B.strength(g.coord(k));
    check_antisymmetric(F);
    if (g.dim() == 3 && off_plane(F) > 1e-12 * std::max(1.0, std::abs(F(0, 1))))
      throw InputError("landau_phases: only planar fields are supported; use phases_from_potential");
  }
  for (Index k = 0; k < g.nodes(); ++k) {
    const MultiIndex m = g.multi_index(k);
    if (m[0] == 0) continue;
    MultiIndex left = m;
    left[0] -= 1;
    const Index kl = g.index(left);
    t.theta[1][k] = t.theta[1][kl] + plaquette_flux(g, B, kl, 0, 1);
  }
  return t;
}

EdgePhaseField phases_from_potential(const Grid& g,
                                     const std::function<Eigen::Vector3d(const Point&)>& a) {
  EdgePhaseField t = EdgePhaseField::zero(g);
  const double h = g.spacing();
  for (int j = 0; j < g.dim(); ++j)
    for (Index k = 0; k < g.nodes(); ++k) {
      const Point x = g.coord(k);
      Point mid = x, end = x;
      mid[j] += 0.5 * h;
      end[j] += h;
      t.theta[j][k] = h / 6.0 * (a(x)[j] + 4.0 * a(mid)[j] + a(end)[j]);
    }
  require(t.matches(g), "phases_from_potential: non-finite potential");
  return t;
}

EdgePhaseField random_phases(const Grid& g, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amplitude, amplitude);
  EdgePhaseField t = EdgePhaseField::zero(g);
  for (int j = 0; j < g.dim(); ++j)
    for (Index k = 0; k < g.nodes(); ++k) t.theta[j][k] = U(rng);
  return t;
}

EdgePhaseField uniform_flux_phases(const Grid& g, int m, FluxGauge gauge) {
  require(g.dim() == 2 && g.boundary() == Boundary::periodic,
          "uniform_flux_phases: needs a periodic 2D grid");
  const int N = g.points();
  const double phi = 2.0 * std::numbers::pi * m / (double(N) * N);
  EdgePhaseField t = EdgePhaseField::zero(g);
  for (Index k = 0; k < g.nodes(); ++k) {
    const MultiIndex x = g.multi_index(k);
    t.theta[1][k] = phi * x[0];
    if (x[0] == N - 1) t.theta[0][k] = -N * phi * x[1];
  }
  if (gauge == FluxGauge::landau) return t;
  VectorXd chi(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) {
    const MultiIndex x = g.multi_index(k);
    chi[k] = -0.5 * phi * x[0] * x[1];
  }
  return t.gauge_shift(g, chi);
}

NodeBox NodeBox::square(const MultiIndex& lo, int extent, int dim) {
  NodeBox b;
  b.lo = lo;
  b.extent = {0, 0, 0};
  for (int a = 0; a < dim; ++a) b.extent[a] = extent;
  return b;
}

int NodeBox::max_extent(int dim) const {
  int e = 0;
  for (int a = 0; a < dim; ++a) e = std::max(e, extent[a]);
  return e;
}

Index NodeBox::count(int dim) const {
  Index c = 1;
  for (int a = 0; a < dim; ++a) c *= extent[a] + 1;
  return c;
}

MultiIndex NodeBox::local(Index i, int dim) const {
  MultiIndex m{0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    m[a] = static_cast<int>(i % (extent[a] + 1));
    i /= extent[a] + 1;
  }
  return m;
}

Index NodeBox::local_index(const MultiIndex& m, int dim) const {
  Index k = 0;
  for (int a = dim - 1; a >= 0; --a) k = k * (extent[a] + 1) + m[a];
  return k;
}

bool NodeBox::contains(const MultiIndex& m, int dim) const {
  for (int a = 0; a < dim; ++a)
    if (m[a] < lo[a] || m[a] > lo[a] + extent[a]) return false;
  return true;
}

NodeBox box_of(const Grid& g, const Cube& q) {
  const auto nodes = cube_nodes(g, q);
  require(!nodes.empty(), "box_of: cube does not meet the grid");
  const MultiIndex first = g.multi_index(nodes.front());
  const MultiIndex last = g.multi_index(nodes.back());
  NodeBox b;
  b.lo = first;
  b.extent = {0, 0, 0};
  for (int a = 0; a < g.dim(); ++a) b.extent[a] = last[a] - first[a];
  return b;
}

std::vector<Index> box_nodes(const Grid& g, const NodeBox& box) {
  std::vector<Index> out(box.count(g.dim()));
  for (Index i = 0; i < static_cast<Index>(out.size()); ++i) {
    MultiIndex m = box.local(i, g.dim());
    for (int a = 0; a < g.dim(); ++a) m[a] += box.lo[a];
    require(g.contains(m), "box_nodes: box leaves the grid");
    out[i] = g.index(m);
  }
  return out;
}

Eigen::Vector3d poincare_h(const MagneticField& B, const Point& c, const Point& x) {
  const Eigen::Vector3d d = x - c;
  const Rule& r = gl8();
  Eigen::Vector3d h = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < r.x.size(); ++i) {
    const double t = r.x[i];
    const Eigen::Matrix3d F = B.strength(c + t * d);
    h += r.w[i] * t * (F.transpose() * d);
  }
  for (int a = B.dim; a < 3; ++a) h[a] = 0.0;
  return h;
}

Eigen::Vector3d axis_h(const MagneticField& B, const Point& c, const Point& x) {
  require(B.dim == 2, "axis_h: planar gauge only");
  const Rule& r = gl8();
  const double len = x[1] - c[1];
  double s = 0.0;
  for (size_t i = 0; i < r.x.size(); ++i) {
    Point y = x;
    y[1] = c[1] + r.x[i] * len;
    s += r.w[i] * B.planar(y);
  }
  return Eigen::Vector3d(-s * len, 0.0, 0.0);
}

double GaugeData::gradient_ratio() const {
  const double den = sup_B + R * sup_grad_B;
  return den > 0 ? sup_grad_h / den : 0.0;
}

GaugeData poincare_gauge(const Grid& g, const MagneticField& B, const NodeBox& box,
                         GaugeKind kind) {
  require(B.dim == g.dim(), "poincare_gauge: field dimension does not match grid");
  const int n = g.dim();
  const double hs = g.spacing();
  const auto nodes = box_nodes(g, box);
  const Index cnt = static_cast<Index>(nodes.size());

  GaugeData G;
  G.box = box;
  Eigen::Vector3d mid = Eigen::Vector3d::Zero();
  for (int a = 0; a < n; ++a) mid[a] = box.lo[a] + 0.5 * box.extent[a];
  G.center = g.coord(mid);
  G.R = box.max_extent(n) * hs;
  auto hfun = [&](const Point& x) {
    return kind == GaugeKind::poincare ? poincare_h(B, G.center, x) : axis_h(B, G.center, x);
  };

  G.h.assign(n, VectorXd::Zero(cnt));
  G.h_edges.assign(n, VectorXd::Zero(cnt));
  for (Index i = 0; i < cnt; ++i) {
    const Point x = g.coord(nodes[i]);
    const Eigen::Matrix3d F = B.strength(x);
    check_antisymmetric(F);
    const Eigen::Vector3d hv = hfun(x);
    for (int a = 0; a < n; ++a) G.h[a][i] = hv[a];
    G.sup_h = std::max(G.sup_h, hv.norm());
    G.sup_B = std::max(G.sup_B, B.magnitude(x));
    if (B.gradient_norm) G.sup_grad_B = std::max(G.sup_grad_B, B.gradient_norm(x));
  }
  for (Index i = 0; i < cnt; ++i) {
    const MultiIndex m = box.local(i, n);
    const Point x = g.coord(nodes[i]);
    for (int j = 0; j < n; ++j) {
      if (m[j] == box.extent[j]) continue;
      Point xm = x, xe = x;
      xm[j] += 0.5 * hs;
      xe[j] += hs;
      G.h_edges[j][i] = hs / 6.0 * (hfun(x)[j] + 4.0 * hfun(xm)[j] + hfun(xe)[j]);
    }
  }

  // Jacobian of h and (if needed) of B by one-sided differences inside the box.
  if (!B.gradient_norm) G.grad_B_numeric = true;
  for (Index i = 0; i < cnt; ++i) {
    const MultiIndex m = box.local(i, n);
    double jac = 0.0, jacB = 0.0;
    for (int j = 0; j < n; ++j) {
      MultiIndex o = m;
      int sgn = 1;
      if (m[j] < box.extent[j]) {
        o[j] += 1;
      } else if (m[j] > 0) {
        o[j] -= 1;
        sgn = -1;
      } else {
        continue;
      }
      const Index io = box.local_index(o, n);
      for (int a = 0; a < n; ++a) jac += std::pow((G.h[a][io] - G.h[a][i]) / hs, 2);
      if (G.grad_B_numeric) {
        const Eigen::Matrix3d d = sgn * (B.strength(g.coord(nodes[io])) - B.strength(g.coord(nodes[i]))) / hs;
        for (int a = 0; a < n; ++a)
          for (int b = a + 1; b < n; ++b) jacB += d(a, b) * d(a, b);
      }
    }
    G.sup_grad_h = std::max(G.sup_grad_h, std::sqrt(jac));
    if (G.grad_B_numeric) G.sup_grad_B = std::max(G.sup_grad_B, std::sqrt(jacB));
  }

  for (Index i = 0; i < cnt; ++i) {
    const MultiIndex m = box.local(i, n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        if (m[a] == box.extent[a] || m[b] == box.extent[b]) continue;
        MultiIndex ma = m, mb = m;
        ma[a] += 1;
        mb[b] += 1;
        const double circ = G.h_edges[a][i] + G.h_edges[b][box.local_index(ma, n)] -
                            G.h_edges[a][box.local_index(mb, n)] - G.h_edges[b][i];
        Point c = g.coord(nodes[i]);
        c[a] += 0.5 * hs;
        c[b] += 0.5 * hs;
        G.curl_residual = std::max(G.curl_residual, std::abs(circ / (hs * hs) - B.strength(c)(a, b)));
      }
  }
  return G;
}

void recover_phi(const Grid& g, const EdgePhaseField& theta, GaugeData& G, double tolerance) {
  require(theta.matches(g), "recover_phi: phase field does not match grid");
  const int n = g.dim();
  const NodeBox& box = G.box;
  const auto nodes = box_nodes(g, box);
  const Index cnt = static_cast<Index>(nodes.size());
  require(static_cast<Index>(G.h_edges.size()) == n && G.h_edges[0].size() == cnt,
          "recover_phi: gauge data does not match the box");
  const double hs = g.spacing();
  if (tolerance < 0.0)
    tolerance = 10.0 * hs * hs * std::max(G.curl_residual, 1e-6 * G.sup_B) + 1e-9;
  G.tolerance = tolerance;

  G.phi = VectorXd::Zero(cnt);
  for (Index i = 1; i < cnt; ++i) {
    MultiIndex m = box.local(i, n);
    int axis = 0;
    for (int a = n - 1; a >= 0; --a)
      if (m[a] > 0) {
        axis = a;
        break;
      }
    m[axis] -= 1;
    const Index p = box.local_index(m, n);
    G.phi[i] = G.phi[p] + theta.theta[axis][nodes[p]] - G.h_edges[axis][p];
  }

  G.mismatch = 0.0;
  for (Index i = 0; i < cnt; ++i) {
    const MultiIndex m = box.local(i, n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        if (m[a] == box.extent[a] || m[b] == box.extent[b]) continue;
        MultiIndex ma = m, mb = m;
        ma[a] += 1;
        mb[b] += 1;
        const Index ia = box.local_index(ma, n), ib = box.local_index(mb, n);
        const double ct = theta.theta[a][nodes[i]] + theta.theta[b][nodes[ia]] -
                          theta.theta[a][nodes[ib]] - theta.theta[b][nodes[i]];
        const double ch = G.h_edges[a][i] + G.h_edges[b][ia] - G.h_edges[a][ib] - G.h_edges[b][i];
        G.mismatch = std::max(G.mismatch, std::abs(std::remainder(ct - ch, 2.0 * std::numbers::pi)));
      }
  }
  if (G.mismatch > tolerance)
    throw FluxMismatch("recover_phi: loop mismatch " + std::to_string(G.mismatch) +
                       " exceeds tolerance " + std::to_string(tolerance));
}

EdgePhaseField regauged_phases(const Grid& g, const EdgePhaseField& theta, const GaugeData& G) {
  require(G.phi.size() == G.box.count(g.dim()), "regauged_phases: phase not recovered");
  const int n = g.dim();
  const auto nodes = box_nodes(g, G.box);
  EdgePhaseField out = theta;
  for (Index i = 0; i < static_cast<Index>(nodes.size()); ++i) {
    const MultiIndex m = G.box.local(i, n);
    for (int j = 0; j < n; ++j) {
      if (m[j] == G.box.extent[j]) continue;
      MultiIndex up = m;
      up[j] += 1;
      out.theta[j][nodes[i]] = G.h_edges[j][i] + G.phi[G.box.local_index(up, n)] - G.phi[i];
    }
  }
  return out;
}

MagneticField mollify(const MagneticField& B, double radius) {
  require(radius > 0.0, "mollify: radius must be positive");
  const Rule& r = gl8();
  const int n = B.dim;
  // nodes and weights of the normalized 1D kernel on [-ρ, ρ] (and its derivative)
  std::vector<double> s, w, dw;
  double mass = 0.0;
  for (size_t i = 0; i < r.x.size(); ++i) {
    const double y = (2.0 * r.x[i] - 1.0) * radius;
    const double u = 1.0 - (y / radius) * (y / radius);
    s.push_back(y);
    w.push_back(2.0 * radius * r.w[i] * u * u);
    dw.push_back(2.0 * radius * r.w[i] * 2.0 * u * (-2.0 * y / (radius * radius)));
    mass += w.back();
  }
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] /= mass;
    dw[i] /= mass;
  }
  const int q = static_cast<int>(s.size());
  const int total = n == 2 ? q * q : q * q * q;
  // ∫ K(y) F(x - y) dy, and ∫ ∂_i K(y) F(x - y) dy for the gradient
  auto integrate = [=](const Point& x, int deriv) {
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    for (int t = 0; t < total; ++t) {
      int idx[3] = {t % q, (t / q) % q, n == 3 ? t / (q * q) : 0};
      Point y = x;
      double wt = 1.0;
      for (int a = 0; a < n; ++a) {
        y[a] -= s[idx[a]];
        wt *= (a == deriv) ? dw[idx[a]] : w[idx[a]];
      }
      acc += wt * B.strength(y);
    }
    return acc;
  };
  MagneticField out;
  out.dim = n;
  out.strength = [integrate](const Point& x) { return integrate(x, -1); };
  out.gradient_norm = [integrate, n](const Point& x) {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::Matrix3d d = integrate(x, i);
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) s2 += d(a, b) * d(a, b);
    }
    return std::sqrt(s2);
  };
  return out;
}

GaugeData mollified_gauge(const Grid& g, const MagneticField& B, const NodeBox& box,
                          double radius) {
  require(radius >= g.spacing(), "mollified_gauge: smoothing radius below the grid spacing");
  GaugeData G = poincare_gauge(g, mollify(B, radius), box);
  double sup = 0.0;
  for (Index k : box_nodes(g, box)) sup = std::max(sup, B.magnitude(g.coord(k)));
  G.sup_B = sup;
  return G;
}

}  // namespace mslab
