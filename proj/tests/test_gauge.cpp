#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mslab/gauge.hpp>
#include <mslab/operators.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace mslab;

namespace {

Grid box_grid(int N, double side) { return centered_grid(2, N, side, Boundary::dirichlet); }

NodeBox whole(const Grid& g) { return NodeBox::square({0, 0, 0}, g.points() - 1, g.dim()); }

// θ equal to the h-edge integrals of a gauge on its box (zero elsewhere).
EdgePhaseField phases_of(const Grid& g, const GaugeData& G) {
  GaugeData copy = G;
  copy.phi = VectorXd::Zero(G.box.count(g.dim()));
  return regauged_phases(g, EdgePhaseField::zero(g), copy);
}

}  // namespace

TEST_CASE("zero field gives zero gauge") {
  const Grid g = box_grid(9, 2.0);
  const GaugeData G = poincare_gauge(g, zero_field(2), whole(g));
  CHECK(G.sup_h == 0.0);
  CHECK(G.bound_ratio() == 0.0);
}

TEST_CASE("constant field: closed form of the radial gauge") {
  const double b = 1.7;
  const Grid g = box_grid(11, 3.0);
  const GaugeData G = poincare_gauge(g, constant_field(2, b), whole(g));
  const auto nodes = box_nodes(g, G.box);
  for (size_t i = 0; i < nodes.size(); ++i) {
    const Point x = g.coord(nodes[i]) - G.center;
    CHECK(G.h[0][i] == doctest::Approx(-0.5 * b * x.y()).epsilon(1e-13));
    CHECK(G.h[1][i] == doctest::Approx(0.5 * b * x.x()).epsilon(1e-13));
  }
  CHECK(std::abs(G.sup_h - b * G.R * std::sqrt(2.0) / 4.0) < 1e-9);
  CHECK(G.bound_ratio() <= 1.0);
  CHECK(G.curl_residual < 1e-12);
}

TEST_CASE("curl residual converges under refinement") {
  // b depends on x_0 only
  const MagneticField B = planar_field(2, [](const Point& x) { return 1.0 + std::sin(2.0 * x.x()); });
  double prev = 0.0;
  for (int N : {9, 17, 33}) {
    const Grid g = box_grid(N, 2.0);
    const GaugeData G = poincare_gauge(g, B, whole(g));
    if (prev > 0.0) CHECK(prev / G.curl_residual >= 1.8);
    prev = G.curl_residual;
  }
}

TEST_CASE("gauge is linear in B") {
  const Grid g = box_grid(9, 2.0);
  const MagneticField B1 = planar_field(2, [](const Point& x) { return x.x() * x.y(); });
  const MagneticField B2 = planar_field(2, [](const Point& x) { return std::cos(x.y()); });
  const GaugeData a = poincare_gauge(g, B1, whole(g));
  const GaugeData b = poincare_gauge(g, B2, whole(g));
  const GaugeData c = poincare_gauge(g, sum(B1, B2), whole(g));
  for (int k = 0; k < 2; ++k) {
    CHECK((c.h[k] - a.h[k] - b.h[k]).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((c.h_edges[k] - a.h_edges[k] - b.h_edges[k]).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("bound certificate in 2D and 3D") {
  const Grid g2 = box_grid(13, 4.0);
  const MagneticField B = planar_field(2, [](const Point& x) { return std::exp(-x.squaredNorm()) - 0.3 * x.x(); });
  CHECK(poincare_gauge(g2, B, whole(g2)).bound_ratio() <= 1.0);
  const Grid g3 = centered_grid(3, 7, 2.0, Boundary::dirichlet);
  MagneticField B3;
  B3.dim = 3;
  const Eigen::Vector3d w(0.3, -1.1, 0.7);
  B3.strength = [w](const Point&) {
    Eigen::Matrix3d F;
    F << 0, w.z(), -w.y(), -w.z(), 0, w.x(), w.y(), -w.x(), 0;
    return F;
  };
  const GaugeData G3 = poincare_gauge(g3, B3, NodeBox::square({0, 0, 0}, 6, 3));
  CHECK(G3.bound_ratio() <= 1.0);
  CHECK(G3.curl_residual < 1e-12);
}

TEST_CASE("non-antisymmetric input is rejected") {
  const Grid g = box_grid(5, 1.0);
  MagneticField bad;
  bad.dim = 2;
  bad.strength = [](const Point&) {
    Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
    F(0, 1) = 1.0;
    F(1, 0) = 1.0;
    return F;
  };
  CHECK_THROWS_AS(poincare_gauge(g, bad, whole(g)), InputError);
}

TEST_CASE("recover_phi") {
  const double b = 0.8;
  const Grid g = box_grid(10, 3.0);
  const MagneticField B = constant_field(2, b);
  SUBCASE("phases generated by h itself") {
    GaugeData G = poincare_gauge(g, B, whole(g));
    recover_phi(g, phases_of(g, G), G);
    CHECK(G.phi.cwiseAbs().maxCoeff() == 0.0);
    CHECK(G.mismatch < 1e-15);
  }
  SUBCASE("Landau phases against the radial gauge") {
    GaugeData G = poincare_gauge(g, B, whole(g));
    recover_phi(g, landau_phases(g, B), G);
    // a_L = (0, b (x_1 - o_1)), h = (b/2)(-(x_1-c_1), x_0-c_0), a_L - h = ∇φ
    const Point o = g.origin(), c = G.center;
    auto phi = [&](const Point& x) {
      return 0.5 * b * (x.x() - c.x()) * (x.y() - c.y()) + b * (c.x() - o.x()) * x.y();
    };
    const auto nodes = box_nodes(g, G.box);
    const double base = phi(g.coord(nodes[0]));
    for (size_t i = 0; i < nodes.size(); ++i)
      CHECK(G.phi[i] == doctest::Approx(phi(g.coord(nodes[i])) - base).epsilon(1e-12).scale(1.0));
    CHECK(G.mismatch < 1e-12);
  }
  SUBCASE("an extra flux quantum fragment is detected") {
    GaugeData G = poincare_gauge(g, B, whole(g));
    EdgePhaseField theta = landau_phases(g, B);
    theta.theta[0][g.index({4, 4, 0})] += 1.0;
    CHECK_THROWS_AS(recover_phi(g, theta, G), FluxMismatch);
  }
  SUBCASE("axis gauge is a gauge transform of the radial gauge") {
    const MagneticField Bv = planar_field(2, [](const Point& x) { return 1.0 + 0.5 * x.x() - x.y(); });
    GaugeData axis = poincare_gauge(g, Bv, whole(g), GaugeKind::axis);
    GaugeData radial = poincare_gauge(g, Bv, whole(g));
    recover_phi(g, phases_of(g, axis), radial);
    CHECK(radial.mismatch < 1e-12);
  }
}

TEST_CASE("spectral gauge invariance") {
  const Grid g = box_grid(12, 3.0);
  const MagneticField B = planar_field(2, [](const Point& x) { return 1.0 + 0.3 * x.x() - 0.2 * x.y() + 0.1 * x.x() * x.x(); });
  const EdgePhaseField theta = landau_phases(g, B);
  GaugeData G = poincare_gauge(g, B, whole(g));
  recover_phi(g, theta, G);
  WeightField V(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) V[k] = 1.0 + g.coord(k).squaredNorm();
  const VectorXd e1 = Eigen::SelfAdjointEigenSolver<MatrixXcd>(assemble(g, theta, V).dense()).eigenvalues();
  const VectorXd e2 =
      Eigen::SelfAdjointEigenSolver<MatrixXcd>(assemble(g, regauged_phases(g, theta, G), V).dense()).eigenvalues();
  CHECK((e1 - e2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mollified gauge") {
  const Grid g = box_grid(17, 4.0);
  const MagneticField B = planar_field(2, [](const Point& x) { return std::cos(x.x()) * std::sin(0.5 * x.y()) + 1.0; });
  const GaugeData exact = poincare_gauge(g, B, whole(g));
  double prev = 0.0;
  for (double rho : {1.0, 0.5}) {
    const GaugeData m = mollified_gauge(g, B, whole(g), rho);
    double diff = 0.0;
    for (int k = 0; k < 2; ++k) diff = std::max(diff, (m.h[k] - exact.h[k]).cwiseAbs().maxCoeff());
    CHECK(diff <= rho * exact.R * exact.sup_B);
    if (prev > 0.0) CHECK(diff < prev);
    prev = diff;
  }
  const MagneticField jump = planar_field(2, [](const Point& x) { return x.x() > 0.1 ? 2.0 : 0.0; });
  const GaugeData J = mollified_gauge(g, jump, whole(g), 0.5);
  CHECK(std::isfinite(J.bound_ratio()));
  CHECK(J.bound_ratio() <= 1.0);
  CHECK(std::isfinite(J.gradient_ratio()));
  CHECK_THROWS_AS(mollified_gauge(g, B, whole(g), 0.5 * g.spacing()), InputError);
}

TEST_CASE("uniform flux on the torus") {
  const Grid g = make_grid(2, 8, 1.0, Boundary::periodic);
  const EdgePhaseField L = uniform_flux_phases(g, 3, FluxGauge::landau);
  const EdgePhaseField S = uniform_flux_phases(g, 3, FluxGauge::symmetric);
  const double phi = 2.0 * std::numbers::pi * 3 / 64.0;
  for (Index k = 0; k < g.nodes(); ++k) {
    CHECK(L.plaquette_flux(g, k, 0, 1) == doctest::Approx(phi).epsilon(1e-12));
    CHECK(S.plaquette_flux(g, k, 0, 1) == doctest::Approx(phi).epsilon(1e-12));
  }
}
