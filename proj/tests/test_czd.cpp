#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mslab/czd.hpp>
#include <mslab/families.hpp>
#include <mslab/weights.hpp>

#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace mslab;

namespace {

// Node intervals of λQ for a dyadic cube, from the physical picture: the
// cube owns cells [c, c+s) and λQ owns [c + s/2 - λs/2, c + s/2 + λs/2).
struct Interval {
  int lo, hi;
};
Interval dilate_1d(int corner, int s, int lambda) {
  const double mid = corner + 0.5 * s, half = 0.5 * lambda * s;
  // node i owns cell [i, i+1); it belongs when that cell lies inside
  return {int(std::ceil(mid - half)), int(std::floor(mid + half)) - 1};
}

bool in_dilate(const DyadicCube& q, int lambda, int i, int j) {
  const Interval a = dilate_1d(q.corner[0], q.side_nodes(), lambda);
  const Interval b = dilate_1d(q.corner[1], q.side_nodes(), lambda);
  return i >= a.lo && i <= a.hi && j >= b.lo && j <= b.hi;
}

NodeMask disc_mask(const Grid& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int N = g.points();
  const int nd = 1 + int(U(rng) * 5);
  std::vector<std::array<double, 3>> discs;
  for (int i = 0; i < nd; ++i) discs.push_back({U(rng) * N, U(rng) * N, 2.0 + U(rng) * N / 4.0});
  NodeMask om(g.nodes(), 0);
  for (Index k = 0; k < g.nodes(); ++k) {
    const MultiIndex m = g.multi_index(k);
    for (const auto& d : discs)
      if (std::hypot(m[0] - d[0], m[1] - d[1]) < d[2]) om[k] = 1;
  }
  return om;
}

struct Setup {
  Grid g;
  Field f;
  EdgePhaseField theta;
  WeightField w;
  MagneticField B;
};

Setup bump_setup(int N, double side, const std::string& family, double width) {
  const Grid g = centered_grid(2, N, side, Boundary::dirichlet);
  const Family fam = make_family(parse_family(family));
  Setup s{g, Field(g.nodes()), {}, fam.sample(g), fam.field(2)};
  s.theta = landau_phases(g, s.B);
  for (Index k = 0; k < g.nodes(); ++k) {
    const Point x = g.coord(k);
    s.f[k] = std::exp(-(x - Point(0.4, -0.3, 0.0)).squaredNorm() / (2.0 * width * width)) *
             std::exp(I * 2.0 * x[0]);
  }
  return s;
}

double percentile(VectorXd v, double q) {
  std::sort(v.data(), v.data() + v.size());
  return v[Index(q * (v.size() - 1))];
}

}  // namespace

TEST_CASE("dilated ranges agree with the cell picture") {
  for (int s : {1, 2, 4, 8})
    for (int lambda : {1, 2, 4, 18}) {
      const DyadicCube q{int(std::log2(s)), {8, 16, 0}};
      const NodeRange r = dilated_range(q, 2, lambda);
      const Interval a = dilate_1d(8, s, lambda), b = dilate_1d(16, s, lambda);
      CHECK(r.lo[0] == a.lo);
      CHECK(r.hi[0] == a.hi);
      CHECK(r.lo[1] == b.lo);
      CHECK(r.hi[1] == b.hi);
    }
}

TEST_CASE("Whitney decomposition") {
  const Grid g = make_grid(2, 32, 1.0, Boundary::dirichlet);

  SUBCASE("empty set") { CHECK(whitney(g, NodeMask(g.nodes(), 0)).empty()); }
  SUBCASE("F empty is an error") { CHECK_THROWS_AS(whitney(g, NodeMask(g.nodes(), 1)), InputError); }

  SUBCASE("left half, exhaustive") {
    NodeMask om(g.nodes(), 0);
    for (Index k = 0; k < g.nodes(); ++k) om[k] = g.multi_index(k)[0] < 16;
    const auto cubes = whitney(g, om);
    std::vector<int> count(g.nodes(), 0);
    int far = 0;
    int smallest_at_interface = 64;
    for (const auto& q : cubes) {
      bool reaches_F = false;
      for (int j = -64; j < 96; ++j)
        for (int i = -64; i < 96; ++i) {
          const bool inside = i >= 0 && j >= 0 && i < 32 && j < 32;
          const bool in_omega = inside && om[g.index({i, j, 0})];
          if (in_dilate(q, 1, i, j)) {
            REQUIRE(inside);
            ++count[g.index({i, j, 0})];
          }
          if (in_dilate(q, 2, i, j)) CHECK(in_omega);
          if (in_dilate(q, 4, i, j) && !in_omega) reaches_F = true;
        }
      if (!reaches_F) ++far;
      if (q.corner[0] + q.side_nodes() == 16) smallest_at_interface = std::min(smallest_at_interface, q.side_nodes());
    }
    for (Index k = 0; k < g.nodes(); ++k) CHECK(count[k] == (om[k] ? 1 : 0));
    CHECK(smallest_at_interface == 1);  // cubes shrink toward the interface
    const WhitneyCheck c = check_whitney(g, om, cubes);
    CHECK(c.exact());
    CHECK(c.far_violations == far);
  }

  SUBCASE("random sets") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 10; ++t) {
      NodeMask om = disc_mask(g, rng);
      if (std::count(om.begin(), om.end(), 1) == g.nodes()) continue;
      const auto cubes = whitney(g, om);
      const WhitneyCheck c = check_whitney(g, om, cubes);
      CHECK(c.exact());
      // overlap of the 2Q_k by direct count
      int overlap = 0;
      for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
          int n = 0;
          for (const auto& q : cubes) n += in_dilate(q, 2, i, j);
          overlap = std::max(overlap, n);
        }
      CHECK(c.overlap == overlap);
    }
  }
}

TEST_CASE("partition of unity") {
  const Grid g = make_grid(2, 32, 1.0, Boundary::dirichlet);

  SUBCASE("single cube") {
    const DyadicCube q{2, {8, 8, 0}};
    const Partition P = partition_of_unity(g, {q});
    REQUIRE(P.pieces.size() == 1);
    CHECK(P.pieces[0].nodes.size() == 64);  // 2Q has 8 nodes per side
    for (double v : P.pieces[0].values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("two adjacent cubes") {
    const std::vector<DyadicCube> cubes{{2, {8, 8, 0}}, {2, {12, 8, 0}}};
    const Partition P = partition_of_unity(g, cubes);
    VectorXd sum = VectorXd::Zero(g.nodes());
    for (const auto& piece : P.pieces)
      for (size_t i = 0; i < piece.nodes.size(); ++i) {
        CHECK(piece.values[i] >= 0.0);
        CHECK(piece.values[i] <= 1.0 + 1e-15);
        sum[piece.nodes[i]] += piece.values[i];
      }
    for (int j = 8; j < 12; ++j)
      for (int i = 8; i < 16; ++i) CHECK(std::abs(sum[g.index({i, j, 0})] - 1.0) < 1e-12);
  }
  SUBCASE("randomized sets keep the constant bounded") {
    const Grid G = make_grid(2, 64, 1.0, Boundary::dirichlet);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 12; ++t) {
      NodeMask om = disc_mask(G, rng);
      if (std::count(om.begin(), om.end(), 1) == G.nodes()) continue;
      const auto cubes = whitney(G, om);
      const Partition P = partition_of_unity(G, cubes);
      CHECK(P.constant <= 20.0);
      VectorXd sum = VectorXd::Zero(G.nodes());
      for (const auto& piece : P.pieces)
        for (size_t i = 0; i < piece.nodes.size(); ++i) sum[piece.nodes[i]] += piece.values[i];
      for (Index k = 0; k < G.nodes(); ++k) CHECK(std::abs(sum[k] - (om[k] ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("tree gauge removes the phases on the tree") {
  const Grid g = make_grid(2, 10, 0.5, Boundary::dirichlet);
  const EdgePhaseField th = random_phases(g, 12, 1.0);
  NodeBox box;
  box.lo = {2, 3, 0};
  box.extent = {5, 4, 0};
  const VectorXd phi = tree_gauge(g, th, box);
  VectorXd full = VectorXd::Zero(g.nodes());
  const auto nodes = box_nodes(g, box);
  for (size_t i = 0; i < nodes.size(); ++i) full[nodes[i]] = phi[i];
  const EdgePhaseField shifted = th.gauge_shift(g, full);
  for (int j = 3; j <= 7; ++j)
    for (int i = 2; i <= 7; ++i) {
      const Index k = g.index({i, j, 0});
      if (j < 7) CHECK(std::abs(std::remainder(shifted.theta[1][k], 2 * M_PI)) < 1e-12);
      if (j == 3 && i < 7) CHECK(std::abs(std::remainder(shifted.theta[0][k], 2 * M_PI)) < 1e-12);
      if (i < 7 && j < 7) CHECK(shifted.plaquette_flux(g, k, 0, 1) == doctest::Approx(th.plaquette_flux(g, k, 0, 1)));
    }
}

TEST_CASE("Calderon-Zygmund decomposition") {
  const Setup s = bump_setup(32, 4.0, "constant:c0=1,c=0.5", 0.4);
  const HOperator H = assemble(s.g, s.theta, s.w);
  const double p = 1.0;
  // G from first principles: edge moduli summed at the lower nodes
  VectorXd G(s.g.nodes());
  {
    VectorXd d2 = VectorXd::Zero(s.g.nodes());
    for (int j = 0; j < 2; ++j) {
      const EdgeField e = H.L(j) * s.f;
      for (Index k = 0; k < s.g.nodes(); ++k) {
        d2[k] += std::norm(e[s.g.forward_edge(k, j)]);
        if (s.g.multi_index(k)[j] == 0) {
          MultiIndex m = s.g.multi_index(k);
          m[j] = -1;
          d2[k] += std::norm(e[s.g.edge_index(m, j)]);
        }
      }
    }
    for (Index k = 0; k < s.g.nodes(); ++k) G[k] = std::sqrt(d2[k]) + std::sqrt(s.w[k]) * std::abs(s.f[k]);
  }
  const VectorXd MG = maximal_function(s.g, G);

  SUBCASE("alpha above the maximal function") {
    CZInput in{s.g, s.f, s.theta, s.w, p, 1.01 * MG.maxCoeff(), {}, {}};
    const CZDecomposition D = cz_decompose(in);
    CHECK(D.cubes.empty());
    CHECK((D.g - s.f).cwiseAbs().maxCoeff() == 0.0);
    CHECK(D.certificate.ok);
  }

  SUBCASE("median alpha") {
    CZInput in{s.g, s.f, s.theta, s.w, p, percentile(MG, 0.5), {}, {}};
    const CZDecomposition D = cz_decompose(in);
    REQUIRE(!D.cubes.empty());
    const CZCertificate& c = D.certificate;
    CHECK(c.ok);
    CHECK((D.G - G).cwiseAbs().maxCoeff() < 1e-12 * G.maxCoeff());
    // exact reconstruction, supports, types and the F property
    Field sum = D.g;
    for (const auto& q : D.cubes) {
      for (size_t i = 0; i < q.nodes.size(); ++i) {
        const MultiIndex m = s.g.multi_index(q.nodes[i]);
        CHECK(in_dilate(q.cube, 2, m[0], m[1]));
        sum[q.nodes[i]] += q.b[i];
      }
      double mean = 0.0;
      int n = 0;
      for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i)
          if (in_dilate(q.cube, 1, i, j)) {
            mean += s.w[s.g.index({i, j, 0})];
            ++n;
          }
      const double R = q.cube.side_nodes() * s.g.spacing();
      CHECK(q.type == (R * R * mean / n > 1.0 ? 1 : 2));
    }
    CHECK((sum - s.f).cwiseAbs().maxCoeff() <= 1e-14 * s.f.cwiseAbs().maxCoeff());
    for (Index k = 0; k < s.g.nodes(); ++k)
      if (!D.omega_mask[k]) {
        CHECK(D.g[k] == s.f[k]);
        CHECK(G[k] <= in.alpha + 1e-12);
      }
    for (double v : {c.good_l2, c.bad_per_cube, c.level_measure, c.good_sup, c.partition, c.mean_offset}) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
    CHECK(c.overlap >= 1);
    CHECK(c.type1 + c.type2 == Index(D.cubes.size()));
    CHECK(c.mean_offset_pairs > 0);
    // Σ|Q_k| from the mask: the cubes tile Ω
    const double omega_measure = std::count(D.omega_mask.begin(), D.omega_mask.end(), 1) * s.g.cell_volume();
    CHECK(c.level_measure == doctest::Approx(omega_measure * in.alpha / (G.sum() * s.g.cell_volume())));
  }

  SUBCASE("verification catches tampering") {
    CZInput in{s.g, s.f, s.theta, s.w, p, percentile(MG, 0.6), {}, {}};
    const CZDecomposition D = cz_decompose(in);
    REQUIRE(D.certificate.ok);
    size_t k = 0;
    while (k < D.cubes.size() && D.cubes[k].b.cwiseAbs().maxCoeff() == 0.0) ++k;
    REQUIRE(k < D.cubes.size());

    CZDecomposition zeroed = D;
    zeroed.cubes[k].b.setZero();
    const CZCertificate c1 = cz_verify(zeroed);
    CHECK(!c1.ok);
    CHECK(c1.reconstruction > 1e-6);

    CZDecomposition scaled = D;
    scaled.cubes[k].chi *= 2.0;
    const CZCertificate c2 = cz_verify(scaled);
    CHECK(!c2.ok);
    CHECK(c2.partition_sum > 1e-6);
  }

  SUBCASE("input errors") {
    CHECK_THROWS_AS(cz_decompose({s.g, s.f, s.theta, s.w, 2.0, 1.0, {}, {}}), InputError);
    CHECK_THROWS_AS(cz_decompose({s.g, s.f, s.theta, s.w, 1.0, 0.0, {}, {}}), InputError);
    CHECK_THROWS_AS(cz_decompose({s.g, s.f, s.theta, s.w, 1.0, 1e-9 * MG.minCoeff(), {}, {}}), InputError);
  }
}

TEST_CASE("Poincare gauges on type-2 cubes") {
  const Setup s = bump_setup(24, 3.0, "poly:gamma=2,c=0.5", 0.3);
  const HOperator H = assemble(s.g, s.theta, s.w);
  VectorXd G = gradient_magnitude(H, s.f);
  for (Index k = 0; k < s.g.nodes(); ++k) G[k] += std::sqrt(s.w[k]) * std::abs(s.f[k]);
  const double alpha = percentile(maximal_function(s.g, G), 0.7);

  CZInput tree{s.g, s.f, s.theta, s.w, 1.5, alpha, {}, {}};
  CZInput poincare = tree;
  poincare.B = s.B;
  const CZDecomposition A = cz_decompose(tree), Bd = cz_decompose(poincare);
  CHECK(Bd.certificate.ok);
  CHECK(Bd.certificate.type2 > 0);
  // g differs by the gauge choice only through the phases of the means
  CHECK(A.cubes.size() == Bd.cubes.size());
  for (size_t k = 0; k < A.cubes.size(); ++k)
    if (A.cubes[k].type == 2) CHECK(std::abs(A.cubes[k].mean) == doctest::Approx(std::abs(Bd.cubes[k].mean)).epsilon(0.3));

  poincare.B = scaled(s.B, 5.0);
  CHECK_THROWS_AS(cz_decompose(poincare), FluxMismatch);
}

TEST_CASE("decomposition serialization") {
  const Setup s = bump_setup(16, 2.0, "constant:c0=1,c=0.5", 0.3);
  const HOperator H = assemble(s.g, s.theta, s.w);
  VectorXd G = gradient_magnitude(H, s.f);
  for (Index k = 0; k < s.g.nodes(); ++k) G[k] += std::abs(s.f[k]);
  const CZDecomposition D = cz_decompose({s.g, s.f, s.theta, s.w, 1.0, percentile(maximal_function(s.g, G), 0.5), {}, {}});
  const auto j = cz_manifest(D);
  CHECK(j["cubes"].get<size_t>() == D.cubes.size());
  CHECK(j["certificate"]["ok"].get<bool>());
  CHECK(j["gauge"] == "tree");

  std::ostringstream cubes, bad;
  write_cube_csv(cubes, D);
  write_bad_parts_csv(bad, D);
  const auto lines = [](const std::string& t) { return std::count(t.begin(), t.end(), '\n'); };
  CHECK(lines(cubes.str()) == Index(D.cubes.size()) + 1);
  Index values = 0;
  for (const auto& q : D.cubes) values += Index(q.nodes.size());
  CHECK(lines(bad.str()) == values + 1);
}
