#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mslab/weights.hpp>

#include "oracle.hpp"

#include <cmath>
#include <numbers>

using namespace mslab;

namespace {

template <typename F>
WeightField sample(const Grid& g, F f) {
  WeightField w(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) w[k] = f(g.coord(k));
  return w;
}

// Independent scan: explicit loops over aligned blocks, no library cube code.
double brute_rh(const Grid& g, const WeightField& w, double q, int lo, int hi) {
  const int N = g.points();
  double best = 1.0;
  for (int l = lo; l <= hi; ++l) {
    const int s = 1 << l;
    for (int bx = 0; bx + s <= N; bx += s)
      for (int by = 0; by + s <= N; by += s) {
        double s1 = 0, sq = 0;
        for (int i = bx; i < bx + s; ++i)
          for (int j = by; j < by + s; ++j) {
            const double v = w[g.index({i, j, 0})];
            s1 += v;
            sq += std::pow(v, q);
          }
        if (s1 <= 0) continue;
        const double n = double(s) * s;
        best = std::max(best, std::pow(sq / n, 1.0 / q) / (s1 / n));
      }
  }
  return best;
}

}  // namespace

TEST_CASE("reverse Holder constants") {
  const Grid g = centered_grid(2, 32, 2.0, Boundary::dirichlet);
  CHECK(rh_constant(g, WeightField::Ones(g.nodes()), 2.0, {0, 4}).rh_constant == doctest::Approx(1.0));

  const WeightField r = sample(g, [](const Point& x) { return x.norm(); });
  const double c = rh_constant(g, r, 2.0, {0, 3}).rh_constant;
  CHECK(std::isfinite(c));
  CHECK(c == doctest::Approx(brute_rh(g, r, 2.0, 0, 3)).epsilon(1e-12));
  // the same physical cubes at double resolution
  const Grid fine = centered_grid(2, 64, 2.0, Boundary::dirichlet);
  const double cf = rh_constant(fine, sample(fine, [](const Point& x) { return x.norm(); }), 2.0, {1, 4}).rh_constant;
  CHECK(std::abs(cf - c) / c < 0.1);

  const WeightField poly = sample(g, [](const Point& x) { return 1.0 + x.squaredNorm(); });
  const double p4 = rh_constant(g, poly, kInf, {0, 4}).rh_constant;
  const double p5 = rh_constant(g, poly, kInf, {0, 5}).rh_constant;
  CHECK(std::isfinite(p5));
  CHECK(p5 / p4 < 1.25);
  CHECK_THROWS_AS(rh_constant(g, WeightField::Zero(g.nodes()), 2.0, {0, 2}), InputError);
  CHECK_THROWS_AS(rh_constant(g, poly, 2.0, {0, 6}), InputError);
}

TEST_CASE("reverse Holder properties") {
  const Grid g = centered_grid(2, 32, 4.0, Boundary::dirichlet);
  const WeightField w = sample(g, [](const Point& x) { return std::pow(x.norm() + 0.05, 1.5) + 0.1 * std::sin(5 * x.x()) + 0.2; });
  double prev = 0.0;
  for (double q : {1.5, 2.0, 3.0, 6.0}) {
    const double c = rh_constant(g, w, q, {0, 5}).rh_constant;
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(rh_constant(g, w, kInf, {0, 5}).rh_constant >= prev);
  CHECK(rh_constant(g, (7.3 * w).eval(), 3.0, {0, 5}).rh_constant ==
        doctest::Approx(rh_constant(g, w, 3.0, {0, 5}).rh_constant).epsilon(1e-12));
  CHECK(rh_constant(g, w, 2.0, {0, 5}).doubling >= 1.0);
  // self-improvement: every candidate below the threshold is admitted
  CHECK(rh_largest_exponent(g, w, {2.0, 4.0, 8.0}, 1e9, {0, 5}) == 8.0);
  CHECK(rh_largest_exponent(g, w, {2.0, 4.0, 8.0}, 1.0, {0, 5}) == 1.0);
}

TEST_CASE("A-infinity profiles") {
  const Grid g = centered_grid(2, 64, 4.0, Boundary::dirichlet);
  const std::vector<double> s = {0.25, 0.5, 0.75};
  const WeightReport one = ainfty_profile(g, WeightField::Ones(g.nodes()), s, {0, 5});
  for (const auto& [si, c] : one.ainfty_profile) CHECK(c == doctest::Approx(1.0));
  CHECK(one.ainfty_consistent);

  const WeightReport power = ainfty_profile(g, sample(g, [](const Point& x) { return std::pow(x.norm(), 1.5); }), s, {0, 5});
  for (const auto& [si, c] : power.ainfty_profile) CHECK(std::isfinite(c));
  CHECK(power.ainfty_consistent);

  const WeightReport expo = ainfty_profile(g, sample(g, [](const Point& x) { return std::exp(8.0 * x.x()); }), s, {0, 5});
  CHECK_FALSE(expo.ainfty_consistent);
  CHECK(expo.ainfty_growth > 1.25);
}

TEST_CASE("control condition") {
  const Grid g = centered_grid(2, 16, 4.0, Boundary::dirichlet);
  const WeightField one = WeightField::Ones(g.nodes());
  const ControlReport unit = control_condition_check(g, constant_field(2, 1.0), one, {0, 4});
  CHECK(unit.C1 == doctest::Approx(1.0));
  CHECK(unit.C2 == 0.0);
  CHECK(unit.pointwise == doctest::Approx(1.0));
  const ControlReport none = control_condition_check(g, zero_field(2), one, {0, 4});
  CHECK(none.C1 == 0.0);
  CHECK(none.C2 == 0.0);

  const WeightField V = sample(g, [](const Point& x) { return 1.0 + x.squaredNorm(); });
  auto b = [](const Point& x) { return 1.0 + x.squaredNorm(); };
  auto db = [](const Point& x) { return Eigen::Vector3d(2 * x.x(), 2 * x.y(), 0); };
  const ControlReport rep = control_condition_check(g, planar_field(2, b, db), V, {0, 4});
  CHECK(std::isfinite(rep.C1));
  CHECK(std::isfinite(rep.C2));
  CHECK_FALSE(rep.gradient_numeric);
  const ControlReport tripled = control_condition_check(g, scaled(planar_field(2, b, db), 3.0), V, {0, 4});
  CHECK(tripled.C1 == doctest::Approx(3.0 * rep.C1));
  CHECK(tripled.C2 == doctest::Approx(3.0 * rep.C2));
  // numerical gradient fallback is flagged and close to the analytic one
  const ControlReport numeric = control_condition_check(g, planar_field(2, b), V, {0, 4});
  CHECK(numeric.gradient_numeric);
  CHECK(numeric.C2 == doctest::Approx(rep.C2).epsilon(1e-6));
  WeightField holey = V;
  holey[0] = 0.0;
  CHECK_THROWS_AS(control_condition_check(g, constant_field(2, 1.0), holey, {0, 2}), InputError);
}

TEST_CASE("m_beta") {
  CHECK(m_beta(0.5, 0.3) == 0.5);
  CHECK(m_beta(1.0, 0.7) == 1.0);
  CHECK(m_beta(4.0, 0.5) == doctest::Approx(2.0));
  for (double x = 0.0; x < 5.0; x += 0.01) CHECK(m_beta(x, 0.4) <= x + 1e-15);
  CHECK(m_beta(1.0 + 1e-12, 0.4) == doctest::Approx(1.0));
  CHECK_THROWS_AS(m_beta(1.0, 1.0), InputError);
}

TEST_CASE("Fefferman-Phong ratio") {
  const Grid g = centered_grid(2, 20, 2.0, Boundary::dirichlet);
  const Cube q = cube_around(g, Point(0.05, 0.05, 0), 1.0);
  const double c = 0.7;  // R^p c ≤ 1 with R = 1
  CHECK(fefferman_phong_ratio(g, Field::Ones(g.nodes()), EdgePhaseField::zero(g),
                              WeightField::Constant(g.nodes(), c), q, 1.0) == doctest::Approx(1.0));
  CHECK(fefferman_phong_ratio(g, Field::Ones(g.nodes()), EdgePhaseField::zero(g),
                              WeightField::Constant(g.nodes(), c), q, 1.5) == doctest::Approx(1.0));
  // lowest Dirichlet mode of the cube, tiny weight: ratio is large and finite
  Field u = Field::Zero(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) {
    const Point x = g.coord(k);
    if (std::abs(x.x() - 0.05) < 0.5 && std::abs(x.y() - 0.05) < 0.5)
      u[k] = std::cos(std::numbers::pi * (x.x() - 0.05)) * std::cos(std::numbers::pi * (x.y() - 0.05));
  }
  const double r = fefferman_phong_ratio(g, u, EdgePhaseField::zero(g), WeightField::Constant(g.nodes(), 1e-3), q, 2.0);
  CHECK(std::isfinite(r));
  CHECK(r >= 1.0);
  CHECK_THROWS_AS(fefferman_phong_ratio(g, Field::Zero(g.nodes()), EdgePhaseField::zero(g),
                                        WeightField::Ones(g.nodes()), q, 2.0),
                  InputError);
}

TEST_CASE("Shen exponent") {
  const Grid g = centered_grid(2, 65, 8.0, Boundary::dirichlet);
  const std::vector<std::pair<double, double>> pairs = {{0.5, 1.0}, {0.5, 4.0}, {1.0, 2.0}, {1.0, 6.0}, {2.0, 8.0}};
  const ShenAlpha one = shen_alpha_estimate(g, WeightField::Ones(g.nodes()), Point::Zero(), pairs);
  CHECK(one.alpha == doctest::Approx(2.0));
  CHECK(one.regression == doctest::Approx(2.0));
  const ShenAlpha quad = shen_alpha_estimate(g, sample(g, [](const Point& x) { return x.squaredNorm(); }), Point::Zero(), pairs);
  CHECK(quad.alpha >= 2.0);
  const ShenAlpha spike = shen_alpha_estimate(g, sample(g, [](const Point& x) { return x.norm() < 0.2 ? 1.0 : 0.0; }),
                                              Point::Zero(), pairs);
  CHECK(std::abs(spike.alpha - (2.0 - g.dim())) < 0.25);
  CHECK(spike.flagged);
  CHECK_THROWS_AS(shen_alpha_estimate(g, WeightField::Ones(g.nodes()), Point::Zero(), {{2.0, 1.0}}), InputError);
}

TEST_CASE("dyadic sum") {
  // side 64·17 = 1088 ≥ 2^10
  const Grid g = centered_grid(2, 65, 65.0 * 17.0, Boundary::dirichlet);
  const DyadicSum s = dyadic_sum(g, WeightField::Ones(g.nodes()), Point::Zero(), 10);
  double want = 0.0;
  for (int l = -10; l <= 10; ++l) want += std::ldexp(1.0, l) / (1.0 + std::ldexp(1.0, 2 * l));
  CHECK_FALSE(s.clipped);
  CHECK(s.value == doctest::Approx(want).epsilon(1e-12));
  CHECK(s.value == doctest::Approx(2.27).epsilon(0.01));
  for (size_t i = 0; i < s.terms.size(); ++i) {
    CHECK(s.terms[i] == doctest::Approx(s.terms[s.terms.size() - 1 - i]));
    CHECK(s.terms[i] <= std::ldexp(1.0, -std::abs(int(i) - 10) + 1));
  }
  double prev = 0.0;
  for (int L = 2; L <= 10; L += 2) {
    const double v = dyadic_sum(g, WeightField::Ones(g.nodes()), Point::Zero(), L).value;
    CHECK(want - v <= 4.0 * std::ldexp(1.0, -L));
    CHECK(v > prev);
    prev = v;
  }
  CHECK_THROWS_AS(dyadic_sum(g, WeightField::Zero(g.nodes()), Point::Zero(), 3), InputError);
}

namespace {

// Every cube of the given sizes inside the lattice, plain loops.
VectorXd brute_maximal(const Grid& g, const VectorXd& v, const std::vector<int>& sizes) {
  const int N = g.points();
  VectorXd M = VectorXd::Zero(g.nodes());
  for (int s : sizes)
    for (int c1 = 0; c1 + s <= N; ++c1)
      for (int c0 = 0; c0 + s <= N; ++c0) {
        double sum = 0.0;
        for (int j = c1; j < c1 + s; ++j)
          for (int i = c0; i < c0 + s; ++i) sum += std::abs(v[g.index({i, j, 0})]);
        const double mean = sum / (s * s);
        for (int j = c1; j < c1 + s; ++j)
          for (int i = c0; i < c0 + s; ++i) {
            const Index k = g.index({i, j, 0});
            M[k] = std::max(M[k], mean);
          }
      }
  return M;
}

}  // namespace

TEST_CASE("maximal function") {
  const Grid g = make_grid(2, 12, 1.0, Boundary::dirichlet);
  const auto sizes = maximal_sizes(g);
  CHECK(sizes == std::vector<int>{1, 2, 3, 4, 6, 8, 12});

  SUBCASE("matches the brute-force scan") {
    const Field r = testing_support::random_field(g.nodes(), 3);
    const VectorXd v = r.cwiseAbs();
    const VectorXd M = maximal_function(g, v);
    CHECK((M - brute_maximal(g, v, sizes)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((M.array() >= v.array() - 1e-15).all());
  }
  SUBCASE("spike") {
    VectorXd v = VectorXd::Zero(g.nodes());
    v[g.index({5, 6, 0})] = 1.0;
    const VectorXd M = maximal_function(g, v);
    CHECK((M - brute_maximal(g, v, sizes)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(M[g.index({5, 6, 0})] == doctest::Approx(1.0));
    // one node away only a side-2 cube covers both
    CHECK(M[g.index({6, 6, 0})] == doctest::Approx(0.25));
  }
  SUBCASE("constant input") {
    const VectorXd M = maximal_function(g, VectorXd::Constant(g.nodes(), 2.5));
    CHECK((M.array() - 2.5).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("monotone") {
    const VectorXd a = testing_support::random_field(g.nodes(), 5).cwiseAbs();
    const VectorXd b = a + testing_support::random_field(g.nodes(), 6).cwiseAbs();
    CHECK((maximal_function(g, b).array() >= maximal_function(g, a).array() - 1e-14).all());
  }
}
