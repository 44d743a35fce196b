// Acceptance battery: one PASS/FAIL line per criterion.
//
//   acceptance [--expect-fail 6,7] [criterion ...]
//
// Exit status 0 when the failing criteria are exactly the expected ones.

#include <mslab/czd.hpp>
#include <mslab/families.hpp>
#include <mslab/gauge.hpp>
#include <mslab/operators.hpp>
#include <mslab/riesz.hpp>
#include <mslab/solutions.hpp>
#include <mslab/weights.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace mslab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Field random_field(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Field u(n);
  for (Index i = 0; i < n; ++i) u[i] = {N(rng), N(rng)};
  return u;
}

WeightField bowl(const Grid& g) {
  WeightField V(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) V[k] = 1.0 + g.coord(k).squaredNorm();
  return V;
}

// ------------------------------------------------------------------ 1

Outcome energy_identity() {
  const Grid g = centered_grid(2, 32, 8.0, Boundary::dirichlet);
  const WeightField V = bowl(g);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const HOperator H = assemble(g, random_phases(g, 1000 + s), V);
    const Field u = random_field(g.nodes(), 2000 + s);
    double lhs = 0.0;
    for (int j = 0; j < 2; ++j) lhs += (H.L(j) * u).squaredNorm();
    lhs += (V.array() * u.cwiseAbs2().array()).sum();
    const double form = u.dot(H.matrix() * u).real();
    worst = std::max(worst, std::abs(lhs - form) / form);
  }
  return {worst <= 1e-10, fmt("100 fields, max relative defect %.2e (limit 1e-10)", worst)};
}

// ------------------------------------------------------------------ 2

Outcome p2_riesz_bounds() {
  const Grid g = centered_grid(2, 32, 8.0, Boundary::dirichlet);
  double worst = 0.0;
  int count = 0;
  for (const FamilySpec& spec : default_families()) {
    const Family fam = make_family(spec);
    const HOperator H = assemble(g, landau_phases(g, fam.field(2)), fam.sample(g));
    const SpectralCache S = spectral_decompose(H);
    const TransformContext ctx{&H, &S, nullptr, -1.0};
    for (const char* id : {"LH-1/2:j=0", "LH-1/2:j=1", "V1/2H-1/2"}) {
      const Transform T = transform_matrix(ctx, parse_transform(id));
      worst = std::max(worst, pnorm_estimate(T.matrix, 2.0).value);
      ++count;
    }
  }
  return {worst <= 1.0 + 1e-8, fmt("%d operators, max p=2 norm %.10f (limit 1 + 1e-8)", count, worst)};
}

// ------------------------------------------------------------------ 3

Outcome domination_suite() {
  const Grid g = centered_grid(2, 16, 4.0, Boundary::dirichlet);
  const SpectralCache free = spectral_decompose(free_laplacian(g));
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> U(0.0, 3.0);
  double ks = 0.0, heat = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    WeightField V(g.nodes());
    for (Index k = 0; k < g.nodes(); ++k) V[k] = U(rng);
    const SpectralCache S = spectral_decompose(assemble(g, random_phases(g, 300 + s), V));
    const Field f = random_field(g.nodes(), 400 + s);
    const double n = f.norm();
    for (double lambda : {0.1, 1.0}) ks = std::max(ks, kato_simon_check(S, free, lambda, f) / n);
    for (double t : {0.05, 0.5, 2.0}) heat = std::max(heat, heat_domination_check(S, free, t, f) / n);
  }
  return {ks <= 1e-10 && heat <= 1e-10,
          fmt("20 pairs, Kato-Simon %.2e, heat %.2e relative to |input| (limit 1e-10)", ks, heat)};
}

// ------------------------------------------------------------------ 4

Outcome diamagnetic() {
  const Grid g = make_grid(2, 32, 0.25, Boundary::periodic);
  Index violations = 0, checked = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const EdgePhaseField theta = random_phases(g, 500 + s);
    const Field u = random_field(g.nodes(), 600 + s);
    for (int j = 0; j < 2; ++j)
      for (Index k = 0; k < g.nodes(); ++k) {
        const Index up = g.neighbor(k, j, 1);
        const double lhs = std::abs(std::abs(u[up]) - std::abs(u[k]));
        const double rhs = std::abs(std::exp(Complex(0.0, -theta.theta[j][k])) * u[up] - u[k]);
        violations += lhs > rhs;
        ++checked;
      }
  }
  return {violations == 0, fmt("%ld edge checks, %ld violations", long(checked), long(violations))};
}

// ------------------------------------------------------------------ 5

Outcome l1_maximal() {
  const Grid g = centered_grid(2, 24, 8.0, Boundary::dirichlet);
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> node(0, 23);
  std::vector<MultiIndex> sources;
  for (int i = 0; i < 10; ++i) sources.push_back({node(rng), node(rng), 0});
  double pot = 0.0, fre = 0.0;
  for (const char* fam_id : {"poly:gamma=2,c=0.5", "power:gamma=-1,eps=0.25,c=0.5", "constant:c0=1,c=0.5"}) {
    const Family fam = make_family(parse_family(fam_id));
    const HOperator H = assemble(g, landau_phases(g, fam.field(2)), fam.sample(g));
    for (const auto& m : sources) {
      Field f = Field::Zero(g.nodes());
      f[g.index(m)] = 1.0 / g.cell_volume();
      const L1Ratios r = l1_maximal_check(H, f);
      pot = std::max(pot, r.potential);
      fre = std::max(fre, r.free);
    }
  }
  return {pot <= 1.0 + 1e-6 && fre <= 2.0 + 1e-6,
          fmt("30 columns, max ratios %.6f (limit 1 + 1e-6) and %.6f (limit 2 + 1e-6)", pot, fre)};
}

// ------------------------------------------------------------------ 6

Outcome cz_certificate() {
  const Grid g = centered_grid(2, 64, 8.0, Boundary::dirichlet);
  const Family fam = make_family(parse_family("poly:gamma=2,c=0.5"));
  const WeightField w = fam.sample(g);
  const EdgePhaseField theta = landau_phases(g, fam.field(2));
  const HOperator H = assemble(g, theta, w);
  const double h = g.spacing();
  int triples = 0, decomposed = 0;
  double reconstruction = 0.0;
  std::map<std::string, double> worst;
  for (double beta : {1.5, 1.9}) {
    Field f(g.nodes());
    for (Index k = 0; k < g.nodes(); ++k) {
      const Point x = g.coord(k);
      const Point c(0.3 * h, -0.2 * h, 0.0);
      f[k] = std::pow((x - c).squaredNorm() + 0.25 * h * h, -beta / 2) * std::exp(-x.squaredNorm() / 2.0);
    }
    const VectorXd Lf = gradient_magnitude(H, f);
    for (double p : {1.0, 1.5}) {
      VectorXd G(g.nodes());
      for (Index k = 0; k < g.nodes(); ++k) G[k] = std::pow(Lf[k], p) + std::pow(std::sqrt(w[k]) * std::abs(f[k]), p);
      const double top = std::pow(maximal_function(g, G).maxCoeff(), 1.0 / p) / 1.2;
      std::map<std::string, std::pair<double, double>> range;
      auto note = [&](const std::string& name, double v) {
        auto& [lo, hi] = range.try_emplace(name, kInf, 0.0).first->second;
        lo = std::min(lo, std::isfinite(v) ? v : 0.0);
        hi = std::max(hi, std::isfinite(v) ? v : kInf);
      };
      for (int k = 0; k <= 2; ++k) {
        ++triples;
        CZInput in{g, f, theta, w, p, top * std::pow(10.0, -k), std::nullopt, {}};
        try {
          const CZDecomposition d = cz_decompose(in);
          const CZCertificate& c = d.certificate;
          ++decomposed;
          reconstruction = std::max(reconstruction, c.reconstruction);
          note("bad_per_cube", c.bad_per_cube);
          note("level_measure", c.level_measure);
          note("overlap", c.overlap);
          note("good_sup", c.good_sup);
        } catch (const InputError&) {
          // Ω is the whole grid at this level
        }
      }
      for (const auto& [name, lh] : range) {
        const double ratio = lh.first > 0.0 ? lh.second / lh.first : kInf;
        worst[name] = std::max(worst[name], ratio);
      }
    }
  }
  bool pass = decomposed == triples && reconstruction <= 1e-12;
  for (const auto& [name, r] : worst) pass = pass && r <= 3.0;
  return {pass, fmt("%d/%d decompositions, reconstruction %.1e, max/min over alpha: bad_per_cube %.3g, level_measure %.3g, "
                    "overlap %.3g, good_sup %.3g (limit 3)",
                    decomposed, triples, reconstruction, worst["bad_per_cube"], worst["level_measure"], worst["overlap"], worst["good_sup"])};
}

// ------------------------------------------------------------------ 7

// Node interval of λQ: the cube owns the cells [c, c+s) and λQ the cells
// centred on the same point with λ times the side.
std::pair<int, int> dilate(int corner, int s, int lambda) {
  const double mid = corner + 0.5 * s, half = 0.5 * lambda * s;
  return {int(std::ceil(mid - half)), int(std::floor(mid + half)) - 1};
}

Outcome whitney_properties() {
  const int N = 64;
  const Grid g = make_grid(2, N, 1.0, Boundary::dirichlet);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int sets = 0, exact = 0, n_lo = 1 << 30, n_hi = 0;
  long cubes_total = 0, far_total = 0, agree = 0;
  while (sets < 50) {
    const int nd = 1 + int(U(rng) * 6);
    std::vector<std::array<double, 3>> discs;
    for (int i = 0; i < nd; ++i) discs.push_back({U(rng) * N, U(rng) * N, 3.0 + U(rng) * 20.0});
    NodeMask om(g.nodes(), 0);
    for (Index k = 0; k < g.nodes(); ++k) {
      const MultiIndex m = g.multi_index(k);
      for (const auto& d : discs)
        if (std::hypot(m[0] - d[0], m[1] - d[1]) < d[2]) om[k] = 1;
    }
    if (std::count(om.begin(), om.end(), 1) == g.nodes()) continue;
    ++sets;
    const auto cubes = whitney(g, om);
    auto in_omega = [&](int i, int j) { return i >= 0 && j >= 0 && i < N && j < N && om[g.index({i, j, 0})]; };
    std::vector<int> cover(g.nodes(), 0), overlap(g.nodes(), 0);
    bool ok = true;
    long far = 0;
    for (const auto& q : cubes) {
      const int s = q.side_nodes();
      const auto [a0, a1] = dilate(q.corner[0], s, 1);
      const auto [b0, b1] = dilate(q.corner[1], s, 1);
      for (int j = b0; j <= b1; ++j)
        for (int i = a0; i <= a1; ++i) {
          if (!in_omega(i, j)) ok = false;
          else ++cover[g.index({i, j, 0})];
        }
      const auto [c0, c1] = dilate(q.corner[0], s, 2);
      const auto [d0, d1] = dilate(q.corner[1], s, 2);
      for (int j = d0; j <= d1; ++j)
        for (int i = c0; i <= c1; ++i) {
          if (!in_omega(i, j)) ok = false;
          else ++overlap[g.index({i, j, 0})];
        }
      const auto [e0, e1] = dilate(q.corner[0], s, 4);
      const auto [f0, f1] = dilate(q.corner[1], s, 4);
      bool reaches_F = false;
      for (int j = f0; j <= f1 && !reaches_F; ++j)
        for (int i = e0; i <= e1 && !reaches_F; ++i) reaches_F = !in_omega(i, j);
      far += !reaches_F;
    }
    for (Index k = 0; k < g.nodes(); ++k)
      if (cover[k] != (om[k] ? 1 : 0)) ok = false;
    const int n = *std::max_element(overlap.begin(), overlap.end());
    exact += ok && far == 0;
    cubes_total += long(cubes.size());
    far_total += far;
    n_lo = std::min(n_lo, n);
    n_hi = std::max(n_hi, n);
    const WhitneyCheck c = check_whitney(g, om, cubes);
    agree += c.exact() == ok && c.far_violations == far && c.overlap == n;
  }
  return {exact == sets && agree == sets,
          fmt("%d/%d sets with every property, %ld/%ld cubes with 4Q inside the open set, overlap N in [%d, %d], "
              "library check agrees on %ld/%d",
              exact, sets, far_total, cubes_total, n_lo, n_hi, agree, sets)};
}

// ------------------------------------------------------------------ 8

Outcome gauge_bounds() {
  double closed = 0.0;
  for (double b : {0.5, 1.7})
    for (int N : {11, 21}) {
      const Grid g = centered_grid(2, N, 3.0, Boundary::dirichlet);
      for (const NodeBox& box : {NodeBox::square({0, 0, 0}, N - 1, 2), NodeBox::square({2, 1, 0}, N / 2, 2)}) {
        const GaugeData G = poincare_gauge(g, constant_field(2, b), box);
        closed = std::max(closed, std::abs(G.sup_h - b * G.R * std::sqrt(2.0) / 4.0));
      }
    }
  const MagneticField B = planar_field(2, [](const Point& x) { return 1.0 + std::sin(2.0 * x.x()); });
  double factor = kInf;
  double prev = 0.0;
  for (int N : {9, 17, 33}) {
    const Grid g = centered_grid(2, N, 2.0, Boundary::dirichlet);
    const GaugeData G = poincare_gauge(g, B, NodeBox::square({0, 0, 0}, N - 1, 2));
    if (prev > 0.0) factor = std::min(factor, prev / G.curl_residual);
    prev = G.curl_residual;
  }
  const Grid g = centered_grid(2, 12, 3.0, Boundary::dirichlet);
  const MagneticField Bv =
      planar_field(2, [](const Point& x) { return 1.0 + 0.3 * x.x() - 0.2 * x.y() + 0.1 * x.x() * x.x(); });
  const EdgePhaseField theta = landau_phases(g, Bv);
  GaugeData G = poincare_gauge(g, Bv, NodeBox::square({0, 0, 0}, 11, 2));
  recover_phi(g, theta, G);
  const WeightField V = bowl(g);
  const VectorXd e1 = Eigen::SelfAdjointEigenSolver<MatrixXcd>(assemble(g, theta, V).dense()).eigenvalues();
  const VectorXd e2 =
      Eigen::SelfAdjointEigenSolver<MatrixXcd>(assemble(g, regauged_phases(g, theta, G), V).dense()).eigenvalues();
  const double spectral = (e1 - e2).cwiseAbs().maxCoeff();
  return {closed <= 1e-9 && factor >= 1.8 && spectral <= 1e-9,
          fmt("closed form %.1e (limit 1e-9), curl refinement factor %.3f (limit 1.8), spectra %.1e (limit 1e-9)",
              closed, factor, spectral)};
}

// ------------------------------------------------------------------ 9

Outcome subharmonicity() {
  double worst_ratio = 0.0, min_lap = kInf;
  int probes = 0;
  const char* families[] = {"poly:gamma=2,c=0.5", "constant:c0=1,c=0.5", "power:gamma=1,eps=0.25,c=0.5",
                            "poly:gamma=1,c=0.5", "constant:c0=1,c=0"};
  for (int i = 0; i < 10; ++i) {
    ProbeProblem pb;
    pb.family = parse_family(families[i % 5]);
    pb.points = 49;
    pb.side = 6.0;
    pb.cube_side = i < 5 ? 1.0 : 0.75;
    pb.center = Point(0.25 * (i % 3), -0.25 * (i % 2), 0.0);
    pb.data = plane_wave_data(900 + i);
    const RefinementPair r = subharmonic_refinement(pb);
    worst_ratio = std::max(worst_ratio, r.ratio);
    min_lap = std::min(min_lap, r.min_laplacian);
    ++probes;
  }
  return {worst_ratio <= 0.67 && min_lap >= -1e-10,
          fmt("%d probes, worst r(h/2)/r(h) %.3f (limit 0.67), min Laplacian of |u|^2 %.3g (limit -1e-10)", probes,
              worst_ratio, min_lap)};
}

// ------------------------------------------------------------------ 10

Outcome commutator() {
  auto residual = [](const MagneticField& B, const std::function<Eigen::Matrix3d(const Point&, int)>& dF, int N) {
    const Grid g = centered_grid(2, N, 8.0, Boundary::dirichlet);
    const HOperator H0 = assemble(g, landau_phases(g, B), WeightField::Zero(g.nodes()));
    Field u(g.nodes());
    for (Index k = 0; k < g.nodes(); ++k) {
      const Point x = g.coord(k);
      u[k] = std::exp(-x.squaredNorm()) * std::exp(Complex(0.0, 0.5 * x.x()));
    }
    double r = 0.0;
    for (int k = 0; k < 2; ++k) r = std::max(r, commutator_identity_check(H0, B, dF, k, u).residual);
    return r;
  };
  auto zero_dF = [](const Point&, int) { return Eigen::Matrix3d::Zero().eval(); };
  const MagneticField c = constant_field(2, 0.7);
  const double rc = residual(c, zero_dF, 64) / residual(c, zero_dF, 32);
  const MagneticField poly =
      planar_field(2, [](const Point& x) { return 0.5 + 0.2 * x.x() - 0.1 * x.x() * x.y(); });
  auto poly_dF = [](const Point& x, int j) {
    Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
    const double d = j == 0 ? 0.2 - 0.1 * x.y() : -0.1 * x.x();
    F(0, 1) = d;
    F(1, 0) = -d;
    return F;
  };
  const double rp = residual(poly, poly_dF, 64) / residual(poly, poly_dF, 32);
  return {rc <= 0.67 && rp <= 0.67,
          fmt("refinement ratios: constant B %.3f, polynomial B %.3f (limit 0.67)", rc, rp)};
}

// ------------------------------------------------------------------ 11

Outcome theorem_sweeps() {
  SweepConfig cfg;
  cfg.family = parse_family("poly:gamma=2,c=0.5");
  for (const char* id : {"LH-1/2:j=0", "LH-1/2:j=1", "V1/2LH-1:j=-1", "VH-1"})
    cfg.transforms.push_back(parse_transform(id));
  cfg.p_list = {2.0, 4.0, 8.0};
  cfg.resolutions = {24, 32, 48};
  cfg.domains = {8.0, 12.0};
  const SweepReport rep = theorem_sweep(cfg);
  int consistent = 0;
  double worst = 1.0;
  std::string worst_name;
  for (const auto& f : rep.flags) {
    consistent += f.consistent;
    const double r = std::max({f.resolution_ratio, 1.0 / f.resolution_ratio, f.domain_ratio, 1.0 / f.domain_ratio});
    if (r > worst) {
      worst = r;
      worst_name = fmt("%s p=%g", f.transform.c_str(), f.p);
    }
  }
  const bool certified = std::isfinite(rep.control_C1) && rep.control_C1 > 0.0;
  return {certified && rep.p2_contract_ok && consistent == int(rep.flags.size()),
          fmt("%d/%zu flags consistent, worst ratio %.3f at %s (limit 1.2), RH_%g, control C1 %.3g", consistent,
              rep.flags.size(), worst, worst_name.c_str(), rep.rh_q, rep.control_C1)};
}

// ------------------------------------------------------------------ 12

Outcome dyadic_counterexample() {
  // 2^8 fits inside the box; cubes below h hold the single node at y
  const double h = 2.0;
  const Grid g = centered_grid(3, 129, 128 * h, Boundary::dirichlet);
  WeightField inv(g.nodes()), poly(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) {
    const double r2 = g.coord(k).squaredNorm();
    inv[k] = 1.0 / (r2 + h * h);
    poly[k] = 1.0 + r2;
  }
  const int L = 4;
  const DyadicSum a = dyadic_sum(g, inv, Point::Zero(), L), b = dyadic_sum(g, inv, Point::Zero(), 2 * L);
  const DyadicSum c = dyadic_sum(g, poly, Point::Zero(), L), d = dyadic_sum(g, poly, Point::Zero(), 2 * L);
  const double grow = b.value / a.value, change = std::abs(d.value / c.value - 1.0);
  return {grow >= 2.0 && change <= 0.1,
          fmt("levels %d -> %d: |x|^-2 sum grows %.3fx (limit 2), 1+|x|^2 sum changes %.1f%% (limit 10%%)%s", L,
              2 * L, grow, 100.0 * change, b.clipped || d.clipped ? ", clipped" : "")};
}

// ------------------------------------------------------------------ 13

Outcome kernel_decay() {
  const Grid g = centered_grid(3, 17, 16.0, Boundary::dirichlet);
  const double h = g.spacing();
  const Index y = g.index({8, 8, 8});
  const KernelSlice free = green_kernel(free_laplacian(g), y, 0.0, std::make_pair(2.0 * h, 4.0 * h));
  double violation = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const HOperator H = assemble(g, random_phases(g, 1300 + s), bowl(g));
    const KernelSlice m = green_kernel(H, y, 0.0);
    const double top = free.column.cwiseAbs().maxCoeff();
    for (Index k = 0; k < g.nodes(); ++k)
      violation = std::max(violation, (std::abs(m.column[k]) - free.column[k].real()) / top);
  }
  return {std::abs(free.exponent + 1.0) <= 0.3 && violation <= 1e-10,
          fmt("-Delta slope %.3f over radii [%.0fh, %.0fh] (target -1 +- 0.3), domination excess %.1e (limit 1e-10)",
              free.exponent, free.fit_lo / h, free.fit_hi / h, violation)};
}

// ------------------------------------------------------------------ 14

Outcome pnorm_estimator() {
  double exact = 0.0, search = 0.0;
  for (unsigned seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    Eigen::MatrixXd A(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) A(i, j) = N(rng);
    const MatrixXcd Ac = A.cast<Complex>();
    const double col = A.cwiseAbs().colwise().sum().maxCoeff();
    const double row = A.cwiseAbs().rowwise().sum().maxCoeff();
    const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
    exact = std::max({exact, std::abs(pnorm_estimate(Ac, 1.0).value - col) / col,
                      std::abs(pnorm_estimate(Ac, kInf).value - row) / row,
                      std::abs(pnorm_estimate(Ac, 2.0).value - sigma) / sigma});
    for (double p : {1.5, 3.0, 4.0}) {
      std::mt19937_64 r2(seed * 31 + unsigned(p * 10));
      double best = 0.0;
      Eigen::VectorXd x(5);
      for (int s = 0; s < 100000; ++s) {
        for (int i = 0; i < 5; ++i) x[i] = N(r2);
        const double v = std::pow((A * x).cwiseAbs().array().pow(p).sum(), 1 / p) /
                         std::pow(x.cwiseAbs().array().pow(p).sum(), 1 / p);
        best = std::max(best, v);
      }
      search = std::max(search, std::abs(pnorm_estimate(Ac, p).value - best) / best);
    }
  }
  return {exact <= 1e-6 && search <= 0.01,
          fmt("exact p in {1,2,inf}: %.1e (limit 1e-6), random search p in {1.5,3,4}: %.2f%% (limit 1%%)", exact,
              100.0 * search)};
}

struct Criterion {
  int id;
  const char* name;
  double budget;  // seconds, 0 for none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "energy identity", 5.0, energy_identity},
      {2, "p=2 Riesz bounds", 30.0, p2_riesz_bounds},
      {3, "domination suite", 60.0, domination_suite},
      {4, "diamagnetic inequality", 0.0, diamagnetic},
      {5, "L1 maximal inequalities", 0.0, l1_maximal},
      {6, "CZ decomposition certificate", 300.0, cz_certificate},
      {7, "Whitney properties", 0.0, whitney_properties},
      {8, "gauge bounds", 0.0, gauge_bounds},
      {9, "subharmonicity identity", 0.0, subharmonicity},
      {10, "commutator identity", 0.0, commutator},
      {11, "theorem sweeps", 900.0, theorem_sweeps},
      {12, "dyadic sum counterexample", 0.0, dyadic_counterexample},
      {13, "kernel decay", 0.0, kernel_decay},
      {14, "p-norm estimator", 0.0, pnorm_estimator},
  };
  std::set<int> expected, selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) expected.insert(std::stoi(item));
    } else {
      selected.insert(std::stoi(a));
    }
  }
  std::set<int> failed;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0.0 && dt > c.budget) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget);
    }
    if (!o.pass) failed.insert(c.id);
    std::printf("%s %2d %-30s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), dt);
    std::fflush(stdout);
  }
  std::set<int> want;
  for (int id : expected)
    if (selected.empty() || selected.count(id)) want.insert(id);
  if (failed != want) {
    std::printf("failing set differs from the expected set\n");
    return 1;
  }
  return 0;
}
