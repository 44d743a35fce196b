#include <mslab/solutions.hpp>

#include <mslab/gauge.hpp>

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

namespace mslab {

namespace {

double max_abs(const Field& u, const std::vector<Index>& nodes) {
  double m = 0.0;
  for (Index k : nodes) m = std::max(m, std::abs(u[k]));
  return m;
}

template <typename F>
double mean_of(const std::vector<Index>& nodes, F&& value) {
  double s = 0.0;
  for (Index k : nodes) s += value(k);
  return nodes.empty() ? 0.0 : s / static_cast<double>(nodes.size());
}

template <typename F>
double sup_of(const std::vector<Index>& nodes, F&& value) {
  double m = 0.0;
  for (Index k : nodes) m = std::max(m, value(k));
  return m;
}

// (⨍ v^t)^{1/t}, or sup when t is infinite.
double power_mean(const std::vector<Index>& nodes, const VectorXd& v, double t) {
  if (std::isinf(t)) return sup_of(nodes, [&](Index k) { return v[k]; });
  return std::pow(mean_of(nodes, [&](Index k) { return std::pow(v[k], t); }), 1.0 / t);
}

std::vector<Index> checked_nodes(const SolutionProbe& p, const Cube& c, const char* what) {
  const Grid& g = p.H.grid();
  if (!cube_inside(g, c)) throw InputError(std::string(what) + ": cube chain exceeds the grid");
  auto nodes = cube_nodes(g, c);
  for (Index k : nodes)
    if (!p.solved[k]) throw InputError(std::string(what) + ": cube leaves the solved region");
  return nodes;
}

EstimateRow make_row(std::string id, double R, std::map<std::string, double> params, double lhs,
                     double rhs) {
  EstimateRow r;
  r.id = std::move(id);
  r.R = R;
  r.params = std::move(params);
  r.lhs = lhs;
  r.rhs = rhs;
  if (lhs == 0.0 && rhs == 0.0) {
    r.skipped = true;
    r.reason = "lhs = rhs = 0";
  } else if (rhs == 0.0) {
    throw NumericalError(r.id + ": right side vanishes with positive left side");
  } else {
    r.constant = lhs / rhs;
  }
  return r;
}

EstimateRow skipped_row(std::string id, double R, std::map<std::string, double> params,
                        std::string reason) {
  EstimateRow r;
  r.id = std::move(id);
  r.R = R;
  r.params = std::move(params);
  r.skipped = true;
  r.reason = std::move(reason);
  return r;
}

double physical_side(const SolutionProbe& p, const Cube& q) { return q.physical_side(p.H.grid()); }

double finite_residual(const SolutionProbe& p, const std::vector<Index>& nodes) {
  const Field r = p.H.matrix() * p.u - p.f;
  const double scale = p.u.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  double m = 0.0;
  for (Index k : nodes) m = std::max(m, std::abs(r[k]));
  return m / scale;
}

struct Profiles {
  VectorXd absu, Lu, V;
};

Profiles profiles(const SolutionProbe& p) {
  return {p.u.cwiseAbs(), gradient_magnitude(p.H, p.u), p.H.potential()};
}

std::string number_key(double x) {
  if (std::isinf(x)) return "inf";
  std::ostringstream os;
  os << x;
  return os.str();
}

nlohmann::json number_json(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

}  // namespace

bool cube_inside(const Grid& g, const Cube& q) {
  const double half = 0.5 * q.side - 1e-9;
  for (int a = 0; a < g.dim(); ++a) {
    if (std::ceil(q.center[a] - half) < 0) return false;
    if (std::floor(q.center[a] + half) > g.points() - 1) return false;
  }
  return true;
}

SolutionProbe source_probe(const HOperator& H, const Cube& q, const Field& f) {
  const Grid& g = H.grid();
  require(f.size() == g.nodes(), "source_probe: source does not match grid");
  const Cube q4 = q.dilate(4.0);
  require(cube_inside(g, q4), "source_probe: 4Q must lie inside the grid");
  const auto nodes = cube_nodes(g, q4);
  for (Index k : nodes) require(f[k] == Complex(0.0), "source_probe: source must vanish on 4Q");
  SolutionProbe p{H, q, ProbeMode::inverse_column, f, solve_shifted(H, 0.0, f),
                  std::vector<char>(g.nodes(), 1), 0.0, 0.0};
  p.residual = finite_residual(p, nodes);
  return p;
}

SolutionProbe column_probe(const HOperator& H, const Cube& q, Index y) {
  const Grid& g = H.grid();
  require(y >= 0 && y < g.nodes(), "column_probe: source outside the grid");
  Field f = Field::Zero(g.nodes());
  f[y] = 1.0 / g.cell_volume();
  return source_probe(H, q, f);
}

SolutionProbe boundary_probe(const HOperator& H, const Cube& q, const Field& data, double box_side) {
  const Grid& g = H.grid();
  const int n = g.dim();
  require(data.size() == g.nodes(), "boundary_probe: data does not match grid");
  const Cube q4 = q.dilate(4.0);
  require(cube_inside(g, q4), "boundary_probe: 4Q must lie inside the grid");
  const auto core = cube_nodes(g, q4);
  require(!core.empty(), "boundary_probe: empty cube");

  std::vector<char> in_box(g.nodes(), 0);
  if (box_side > 0.0) {
    const double half = 0.5 * box_side / g.spacing() + 1e-9;
    for (Index k = 0; k < g.nodes(); ++k) {
      const MultiIndex m = g.multi_index(k);
      bool in = true;
      for (int a = 0; a < n; ++a) in = in && std::abs(m[a] - q.center[a]) <= half;
      in_box[k] = in;
    }
    for (Index k : core) require(in_box[k], "boundary_probe: box must contain 4Q");
  } else {
    MultiIndex lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < n; ++a) {
      lo[a] = g.points();
      hi[a] = -1;
    }
    for (Index k : core) {
      const MultiIndex m = g.multi_index(k);
      for (int a = 0; a < n; ++a) {
        lo[a] = std::min(lo[a], m[a]);
        hi[a] = std::max(hi[a], m[a]);
      }
    }
    for (Index k = 0; k < g.nodes(); ++k) {
      const MultiIndex m = g.multi_index(k);
      bool in = true;
      for (int a = 0; a < n; ++a) in = in && m[a] >= lo[a] - 1 && m[a] <= hi[a] + 1;
      in_box[k] = in;
    }
  }
  std::vector<char> interior(g.nodes(), 0);
  std::vector<Index> local(g.nodes(), -1);
  Index count = 0;
  for (Index k = 0; k < g.nodes(); ++k) {
    if (!in_box[k]) continue;
    bool inside = true;
    for (int a = 0; a < n && inside; ++a)
      for (int s : {-1, 1}) {
        const Index nb = g.neighbor(k, a, s);
        if (nb >= 0 && !in_box[nb]) inside = false;
      }
    if (inside) {
      interior[k] = 1;
      local[k] = count++;
    }
  }

  const SparseMatrixXcd& A = H.matrix();
  std::vector<Eigen::Triplet<Complex>> trip;
  Field rhs = Field::Zero(count);
  for (Index c = 0; c < A.outerSize(); ++c)
    for (SparseMatrixXcd::InnerIterator it(A, c); it; ++it) {
      const Index r = it.row();
      if (!interior[r]) continue;
      if (interior[c])
        trip.emplace_back(local[r], local[c], it.value());
      else
        rhs[local[r]] -= it.value() * data[c];
    }
  SparseMatrixXcd Aii(count, count);
  Aii.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SparseMatrixXcd> ldlt(Aii);
  if (ldlt.info() != Eigen::Success) throw NumericalError("boundary_probe: factorization failed");
  const VectorXd D = ldlt.vectorD().real().cwiseAbs();
  if (!(D.minCoeff() > 1e-13 * D.maxCoeff())) throw NumericalError("boundary_probe: singular interior system");
  const Field x = ldlt.solve(rhs);

  SolutionProbe p{H, q, ProbeMode::boundary_value, Field::Zero(g.nodes()), Field::Zero(g.nodes()),
                  interior, 0.0, 0.0};
  std::vector<Index> solved_nodes;
  for (Index k = 0; k < g.nodes(); ++k) {
    if (interior[k]) {
      p.u[k] = x[local[k]];
      solved_nodes.push_back(k);
    } else if (in_box[k]) {
      p.u[k] = data[k];
    }
  }
  for (Index k = 0; k < g.nodes(); ++k)
    if (in_box[k] && !interior[k]) p.pinned_error = std::max(p.pinned_error, std::abs(p.u[k] - data[k]));
  p.residual = finite_residual(p, solved_nodes);
  return p;
}

EstimateRow caccioppoli_check(const SolutionProbe& p, const Cube& q) {
  const Grid& g = p.H.grid();
  const auto inner = checked_nodes(p, q, "caccioppoli_check");
  const auto outer = checked_nodes(p, q.dilate(2.0), "caccioppoli_check");
  const double R = physical_side(p, q);
  const double dv = g.cell_volume();
  const WeightField dens = gradient_density(g, p.H.gradient(p.u));
  const VectorXd& V = p.H.potential();
  double lhs = 0.0, rhs_f = 0.0, rhs_u = 0.0;
  for (Index k : inner) lhs += (dens[k] + V[k] * std::norm(p.u[k])) * dv;
  for (Index k : outer) {
    rhs_f += std::abs(p.f[k]) * std::abs(p.u[k]) * dv;
    rhs_u += std::norm(p.u[k]) * dv;
  }
  if (max_abs(p.u, outer) == 0.0) return skipped_row("caccioppoli", R, {}, "u = 0 on 2Q");
  return make_row("caccioppoli", R, {}, lhs, rhs_f + rhs_u / (R * R));
}

VectorXd discrete_laplacian(const Grid& g, const VectorXd& v) {
  require(v.size() == g.nodes(), "discrete_laplacian: field does not match grid");
  const double h2 = g.spacing() * g.spacing();
  VectorXd out(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) {
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a)
      for (int st : {-1, 1}) {
        const Index nb = g.neighbor(k, a, st);
        s += (nb >= 0 ? v[nb] : 0.0) - v[k];
      }
    out[k] = s / h2;
  }
  return out;
}

SubharmonicReport subharmonic_identity_check(const SolutionProbe& p, const Cube& q) {
  return subharmonic_identity_check(p, checked_nodes(p, q, "subharmonic_identity_check"));
}

SubharmonicReport subharmonic_identity_check(const SolutionProbe& p, const std::vector<Index>& nodes) {
  const Grid& g = p.H.grid();
  for (Index k : nodes)
    require(k >= 0 && k < g.nodes() && p.solved[k], "subharmonic_identity_check: node outside the solved region");
  SubharmonicReport rep;
  rep.nodes = static_cast<Index>(nodes.size());
  const double scale = max_abs(p.u, nodes);
  if (scale == 0.0) return rep;
  const Field u = p.u / scale;
  const VectorXd& V = p.H.potential();
  const auto& theta = p.H.theta().theta;
  const double h2 = g.spacing() * g.spacing();
  rep.min_laplacian = kInf;
  rep.peak = -kInf;
  for (Index k : nodes) {
    const double v0 = std::norm(u[k]);
    double lap = 0.0, fwd = 0.0, bwd = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const Index up = g.neighbor(k, a, 1);
      const Index dn = g.neighbor(k, a, -1);
      const Complex uu = up >= 0 ? u[up] : Complex(0.0);
      const Complex ud = dn >= 0 ? u[dn] : Complex(0.0);
      lap += std::norm(uu) + std::norm(ud) - 2.0 * v0;
      fwd += std::norm(std::exp(-I * theta[a][k]) * uu - u[k]);
      const double td = dn >= 0 ? theta[a][dn] : 0.0;
      bwd += std::norm(std::exp(-I * td) * u[k] - ud);
    }
    lap /= h2;
    fwd /= h2;
    bwd /= h2;
    rep.r = std::max(rep.r, std::abs(lap - 2.0 * fwd - 2.0 * V[k] * v0));
    rep.exact_residual = std::max(rep.exact_residual, std::abs(lap - fwd - bwd - 2.0 * V[k] * v0));
    rep.peak = std::max(rep.peak, lap);
    rep.min_laplacian = std::min(rep.min_laplacian, lap);
  }
  return rep;
}

EstimateRow mean_value_check(const SolutionProbe& p, const Cube& q, double r, double mu) {
  require(r > 0.0, "mean_value_check: r must be positive");
  require(mu > 1.0 && mu <= 2.0, "mean_value_check: μ must lie in (1, 2]");
  const auto inner = checked_nodes(p, q, "mean_value_check");
  const auto outer = checked_nodes(p, q.dilate(mu), "mean_value_check");
  const double R = physical_side(p, q);
  const std::map<std::string, double> params{{"r", r}, {"mu", mu}};
  if (max_abs(p.u, outer) == 0.0) return skipped_row("mean_value", R, params, "u = 0 on μQ");
  const VectorXd a = p.u.cwiseAbs();
  return make_row("mean_value", R, params, power_mean(inner, a, kInf), power_mean(outer, a, r));
}

EstimateRow weighted_mean_value_check(const Grid& g, const WeightField& omega, const WeightField& F,
                                      const Cube& q, double s, double r, double mu) {
  require(omega.size() == g.nodes() && F.size() == g.nodes(),
          "weighted_mean_value_check: fields do not match grid");
  require(s > 0.0 && r > 0.0, "weighted_mean_value_check: s and r must be positive");
  require(mu > 1.0 && mu <= 2.0, "weighted_mean_value_check: μ must lie in (1, 2]");
  require(cube_inside(g, q.dilate(2.0)), "weighted_mean_value_check: 2Q must lie inside the grid");
  require(omega.minCoeff() >= 0.0 && F.minCoeff() >= 0.0,
          "weighted_mean_value_check: ω and F must be nonnegative");
  const auto two = cube_nodes(g, q.dilate(2.0));
  const VectorXd lap = discrete_laplacian(g, F);
  double fmax = 0.0, lmin = 0.0;
  for (Index k : two) {
    fmax = std::max(fmax, F[k]);
    for (int a = 0; a < g.dim(); ++a)
      for (int st : {-1, 1}) {
        const Index nb = g.neighbor(k, a, st);
        if (nb >= 0) fmax = std::max(fmax, F[nb]);
      }
    lmin = std::min(lmin, lap[k]);
  }
  const double tol = 1e-9 * fmax / (g.spacing() * g.spacing());
  if (lmin < -tol) throw InputError("weighted_mean_value_check: F is not subharmonic on 2Q");

  const auto inner = cube_nodes(g, q);
  const auto outer = cube_nodes(g, q.dilate(mu));
  VectorXd wf(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) wf[k] = omega[k] * std::pow(F[k], s);
  const double rhs = mean_of(outer, [&](Index k) { return wf[k]; });
  const double R = q.physical_side(g);
  const std::map<std::string, double> params{{"s", s}, {"r", r}, {"mu", mu}};
  double lhs = 0.0;
  if (std::isinf(r)) {
    lhs = sup_of(inner, [&](Index k) { return std::pow(F[k], s); }) *
          mean_of(inner, [&](Index k) { return omega[k]; });
  } else {
    lhs = power_mean(inner, wf, r);
  }
  return make_row("weighted_mean_value", R, params, lhs, rhs);
}

std::vector<EstimateRow> reverse_holder_suite(const SolutionProbe& p, const Cube& q, const SuiteParams& sp) {
  require(sp.q > 1.0, "reverse_holder_suite: q must exceed 1");
  require(sp.mu > 1.0 && sp.mu <= 4.0, "reverse_holder_suite: μ must lie in (1, 4]");
  const int n = p.H.grid().dim();
  const auto inner = checked_nodes(p, q, "reverse_holder_suite");
  const auto three = checked_nodes(p, q.dilate(3.0), "reverse_holder_suite");
  const auto muq = checked_nodes(p, q.dilate(sp.mu), "reverse_holder_suite");
  const double R = physical_side(p, q);
  const Profiles pr = profiles(p);
  const VectorXd vu = pr.V.cwiseSqrt().cwiseProduct(pr.absu);
  const double energy3 =
      std::sqrt(mean_of(three, [&](Index k) { return pr.Lu[k] * pr.Lu[k] + vu[k] * vu[k]; }));
  const double AV = mean_of(inner, [&](Index k) { return pr.V[k]; });
  const double qs = sobolev_conjugate(sp.q, n);

  std::vector<EstimateRow> rows;
  rows.push_back(make_row("rh_potential", R, {{"q", sp.q}}, power_mean(inner, vu, 2.0 * sp.q), power_mean(three, vu, 2.0)));
  const double Lq = power_mean(inner, pr.Lu, qs);
  for (double k : sp.k_list) {
    const double decay = std::pow(1.0 + R * R * AV, -k);
    rows.push_back(make_row("rh_gradient", R, {{"q", sp.q}, {"q*", qs}, {"k", k}}, Lq, decay * energy3));
  }
  for (double d : sp.delta_list) {
    require(d > 0.0 && d <= 2.0, "reverse_holder_suite: δ must lie in (0, 2]");
    const std::map<std::string, double> params{{"q", sp.q}, {"q*", qs}, {"mu", sp.mu}, {"delta", d}};
    const std::string id = sp.q < n ? "gradient_bound" : "gradient_bound_sup";
    if (2.0 * sp.q < n) {
      rows.push_back(skipped_row(id, R, params, "q < n/2"));
      continue;
    }
    rows.push_back(make_row(id, R, params, Lq, power_mean(muq, pr.Lu, d)));
  }
  return rows;
}

std::vector<EstimateRow> decay_probe(const SolutionProbe& p, const Cube& q, const SuiteParams& sp) {
  require(sp.mu_lo >= 1.0 && sp.mu_lo < sp.mu_hi && sp.mu_hi <= 4.0,
          "decay_probe: need 1 ≤ μ < μ' ≤ 4");
  require(sp.mu > 1.0 && sp.mu <= 2.0, "decay_probe: μ must lie in (1, 2]");
  const int n = p.H.grid().dim();
  const auto inner = checked_nodes(p, q, "decay_probe");
  const auto lo = checked_nodes(p, q.dilate(sp.mu_lo), "decay_probe");
  const auto hi = checked_nodes(p, q.dilate(sp.mu_hi), "decay_probe");
  const auto muq = checked_nodes(p, q.dilate(sp.mu), "decay_probe");
  const double R = physical_side(p, q);
  const Profiles pr = profiles(p);
  const double AV = mean_of(inner, [&](Index k) { return pr.V[k]; });
  const double qs = sobolev_conjugate(sp.q, n);
  const double pm = sp.p_morrey > 0.0 ? sp.p_morrey : 2.0 * n;

  auto u2 = [&](Index k) { return pr.absu[k] * pr.absu[k]; };
  auto en = [&](Index k) { return pr.Lu[k] * pr.Lu[k] + pr.V[k] * u2(k); };
  const double pot = (R * AV) * (R * AV) * mean_of(inner, u2);
  const double Lqs = power_mean(inner, pr.Lu, qs);
  const double supu = power_mean(muq, pr.absu, kInf);

  std::vector<EstimateRow> rows;
  for (double k : sp.k_list) {
    const double decay = std::pow(1.0 + R * R * AV, -k);
    const std::map<std::string, double> pair{{"mu", sp.mu_lo}, {"mu'", sp.mu_hi}, {"k", k}};
    rows.push_back(make_row("decay_u", R, pair, mean_of(lo, u2), decay * mean_of(hi, u2)));
    rows.push_back(make_row("decay_energy", R, pair, mean_of(lo, en), decay * mean_of(hi, en)));
    rows.push_back(make_row("decay_potential", R, {{"mu", sp.mu}, {"k", k}}, pot,
                            decay * mean_of(muq, [&](Index j) { return pr.V[j] * u2(j); })));
    const std::map<std::string, double> p10{{"mu", sp.mu}, {"k", k}, {"p", pm}};
    if (pm <= n)
      rows.push_back(skipped_row("decay_morrey", R, p10, "p ≤ n"));
    else
      rows.push_back(make_row("decay_morrey", R, p10, pot, decay * std::pow(power_mean(muq, pr.Lu, pm), 2.0)));
    rows.push_back(make_row("decay_gradient", R, {{"mu", sp.mu}, {"k", k}, {"q", sp.q}, {"q*", qs}}, Lqs,
                            decay * supu / R));
    const std::map<std::string, double> p12{{"mu", sp.mu}, {"k", k}, {"q", sp.q}};
    if (2.0 * sp.q < n)
      rows.push_back(skipped_row("decay_potential_sup", R, p12, "q < n/2"));
    else
      rows.push_back(make_row("decay_potential_sup", R, p12, pot,
                              decay * mean_of(muq, [&](Index j) { return pr.Lu[j] * pr.Lu[j]; })));
  }
  return rows;
}

std::function<Complex(const Point&)> plane_wave_data(std::uint64_t seed, int waves, double frequency) {
  require(waves > 0, "plane_wave_data: need at least one wave");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Complex> c;
  std::vector<Point> w;
  for (int m = 0; m < waves; ++m) {
    c.emplace_back(unit(rng), unit(rng));
    w.emplace_back(frequency * unit(rng), frequency * unit(rng), frequency * unit(rng));
  }
  return [c, w](const Point& x) {
    Complex s = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) s += c[m] * std::exp(I * w[m].dot(x));
    return s;
  };
}

Grid probe_grid(const ProbeProblem& pb) {
  require(pb.points >= 3 && pb.side > 0.0, "probe_grid: need at least 3 points and a positive side");
  const double h = pb.side / (pb.points - 1);
  Point o = Point::Zero();
  for (int a = 0; a < pb.dim; ++a) o[a] = -0.5 * pb.side;
  return make_grid(pb.dim, pb.points, h, Boundary::dirichlet, o);
}

SolutionProbe build_probe(const ProbeProblem& pb) {
  const Grid g = probe_grid(pb);
  const Family fam = make_family(pb.family);
  const EdgePhaseField theta =
      pb.family.c == 0.0 ? EdgePhaseField::zero(g) : landau_phases(g, fam.field(pb.dim));
  const HOperator H = assemble(g, theta, fam.sample(g));
  const auto data_fn = pb.data ? pb.data : plane_wave_data(1);
  Field data(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) data[k] = data_fn(g.coord(k));
  return boundary_probe(H, cube_around(g, pb.center, pb.cube_side), data, pb.box_side);
}

RefinementPair subharmonic_refinement(const ProbeProblem& pb) {
  ProbeProblem coarse = pb;
  const Grid gc = probe_grid(coarse);
  if (coarse.box_side <= 0.0) coarse.box_side = 4.0 * pb.cube_side + 2.0 * gc.spacing();
  ProbeProblem fine = coarse;
  fine.points = 2 * pb.points - 1;
  const SolutionProbe a = build_probe(coarse);
  const SolutionProbe b = build_probe(fine);
  const Grid& gf = b.H.grid();
  const auto nodes = checked_nodes(a, a.q, "subharmonic_refinement");
  std::vector<Index> shared;
  for (Index k : nodes) {
    MultiIndex m = gc.multi_index(k);
    for (int d = 0; d < gc.dim(); ++d) m[d] *= 2;
    shared.push_back(gf.index(m));
  }
  const SubharmonicReport ra = subharmonic_identity_check(a, nodes);
  const SubharmonicReport rb = subharmonic_identity_check(b, shared);
  RefinementPair out;
  out.r_coarse = ra.r;
  out.r_fine = rb.r;
  out.ratio = ra.r > 0.0 ? rb.r / ra.r : 0.0;
  out.min_laplacian = std::min(ra.min_laplacian, rb.min_laplacian);
  out.exact_residual = std::max(ra.exact_residual, rb.exact_residual);
  out.residual = std::max(a.residual, b.residual);
  return out;
}

std::vector<ScaleTrend> scale_trends(const std::vector<EstimateRow>& rows, double limit) {
  std::vector<ScaleTrend> out;
  for (const auto& r : rows) {
    if (r.skipped || r.exact) continue;
    std::string key = r.id;
    for (const auto& [name, v] : r.params) key += " " + name + "=" + number_key(v);
    auto it = std::find_if(out.begin(), out.end(), [&](const ScaleTrend& t) { return t.key == key; });
    if (it == out.end()) {
      out.push_back({key, {}, 1.0, true});
      it = out.end() - 1;
    }
    it->constants.push_back(r.constant);
  }
  for (auto& t : out) {
    double lo = kInf, hi = 0.0;
    for (double c : t.constants)
      if (c > 0.0) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
    t.ratio = hi > 0.0 ? hi / lo : 1.0;
    t.bounded = std::isfinite(t.ratio) && t.ratio <= limit;
  }
  return out;
}

EstimateSuiteReport run_suite(const SuiteConfig& cfg) {
  require(!cfg.cube_sides.empty(), "run_suite: need at least one cube side");
  EstimateSuiteReport rep;
  rep.config = cfg;
  const Family fam = make_family(cfg.family);
  SuiteParams sp = cfg.params;
  if (sp.q <= 0.0) sp.q = fam.rh_q;
  rep.config.params.q = sp.q;

  for (double side : cfg.cube_sides) {
    ProbeProblem pb{cfg.family, cfg.dim, cfg.points, cfg.side, side, Point::Zero(), plane_wave_data(cfg.seed)};
    SolutionProbe p = [&] {
      if (cfg.mode == ProbeMode::boundary_value) return build_probe(pb);
      const Grid g = probe_grid(pb);
      const EdgePhaseField theta =
          cfg.family.c == 0.0 ? EdgePhaseField::zero(g) : landau_phases(g, fam.field(cfg.dim));
      const HOperator H = assemble(g, theta, fam.sample(g));
      MultiIndex y{1, 1, cfg.dim == 3 ? 1 : 0};
      return column_probe(H, cube_around(g, Point::Zero(), side), g.index(y));
    }();
    const Grid& g = p.H.grid();
    const Cube& q = p.q;
    const double R = q.physical_side(g);
    rep.residual = std::max(rep.residual, p.residual);
    rep.pinned_error = std::max(rep.pinned_error, p.pinned_error);

    rep.rows.push_back(caccioppoli_check(p, q));
    const SubharmonicReport sh = subharmonic_identity_check(p, q);
    {
      EstimateRow r = make_row("subharmonic", R, {}, sh.r, std::max(sh.peak, 0.0));
      r.exact = false;
      rep.rows.push_back(r);
      EstimateRow e;
      e.id = "subharmonic_exact";
      e.R = R;
      e.lhs = sh.exact_residual;
      e.rhs = std::max(sh.peak, 1.0);
      e.constant = e.lhs / e.rhs;
      e.exact = true;
      rep.rows.push_back(e);
      if (e.constant > 1e-8) rep.violations.push_back("two-sided subharmonic identity at R=" + number_key(R));
      if (sh.min_laplacian < -1e-10) rep.violations.push_back("negative Δ|u|² at R=" + number_key(R));
    }
    for (double r : sp.r_list) rep.rows.push_back(mean_value_check(p, q, r, std::min(sp.mu, 2.0)));
    {
      const double umax = p.u.cwiseAbs().maxCoeff();
      const WeightField F = (umax > 0.0 ? (p.u / umax).cwiseAbs2().eval() : WeightField::Zero(g.nodes()));
      for (double r : {2.0, kInf}) {
        try {
          rep.rows.push_back(weighted_mean_value_check(g, p.H.potential(), F, q, sp.s, r, std::min(sp.mu, 2.0)));
        } catch (const InputError& e) {
          rep.violations.push_back(std::string("weighted mean value: ") + e.what());
        }
      }
    }
    for (auto& r : reverse_holder_suite(p, q, sp)) rep.rows.push_back(std::move(r));
    for (auto& r : decay_probe(p, q, sp)) rep.rows.push_back(std::move(r));
  }
  if (rep.residual > 1e-8) rep.violations.push_back("solve residual " + number_key(rep.residual));
  if (rep.pinned_error > 1e-10) rep.violations.push_back("pinned boundary values");
  rep.exact_ok = rep.violations.empty();

  ProbeProblem pb{cfg.family, cfg.dim, cfg.points, cfg.side, cfg.cube_sides[cfg.cube_sides.size() / 2],
                  Point::Zero(), plane_wave_data(cfg.seed)};
  rep.refinement = subharmonic_refinement(pb);
  rep.refinement_ok = rep.refinement.ratio <= cfg.refinement_limit;
  if (!rep.refinement_ok)
    rep.violations.push_back("subharmonic refinement ratio " + number_key(rep.refinement.ratio));
  if (rep.refinement.min_laplacian < -1e-10) {
    rep.exact_ok = false;
    rep.violations.push_back("negative Δ|u|² in refinement pair");
  }
  rep.trends = scale_trends(rep.rows, cfg.bounded_limit);
  return rep;
}

nlohmann::json row_to_json(const EstimateRow& r) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : r.params) params[k] = number_json(v);
  nlohmann::json j{{"id", r.id},          {"R", r.R},
                   {"params", params},    {"lhs", number_json(r.lhs)},
                   {"rhs", number_json(r.rhs)}, {"constant", number_json(r.constant)},
                   {"exact", r.exact},    {"skipped", r.skipped}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

nlohmann::json suite_to_json(const EstimateSuiteReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(row_to_json(r));
  nlohmann::json trends = nlohmann::json::array();
  for (const auto& t : rep.trends)
    trends.push_back({{"key", t.key}, {"constants", t.constants}, {"ratio", number_json(t.ratio)},
                      {"bounded", t.bounded}});
  const auto& c = rep.config;
  return {{"config",
           {{"family", family_name(c.family)},
            {"dim", c.dim},
            {"points", c.points},
            {"side", c.side},
            {"cube_sides", c.cube_sides},
            {"mode", c.mode == ProbeMode::boundary_value ? "boundary" : "column"},
            {"seed", c.seed},
            {"q", number_json(c.params.q)}}},
          {"rows", rows},
          {"trends", trends},
          {"refinement",
           {{"r_coarse", rep.refinement.r_coarse},
            {"r_fine", rep.refinement.r_fine},
            {"ratio", rep.refinement.ratio},
            {"min_laplacian", rep.refinement.min_laplacian},
            {"exact_residual", rep.refinement.exact_residual}}},
          {"residual", rep.residual},
          {"pinned_error", rep.pinned_error},
          {"exact_ok", rep.exact_ok},
          {"refinement_ok", rep.refinement_ok},
          {"violations", rep.violations}};
}

void write_rows_csv(std::ostream& os, const std::vector<EstimateRow>& rows) {
  os << "id,R,params,lhs,rhs,constant,exact,skipped,reason\n";
  for (const auto& r : rows) {
    std::string params;
    for (const auto& [k, v] : r.params) params += (params.empty() ? "" : ";") + k + "=" + number_key(v);
    os << r.id << ',' << r.R << ',' << params << ',' << r.lhs << ',' << r.rhs << ',' << r.constant << ','
       << (r.exact ? 1 : 0) << ',' << (r.skipped ? 1 : 0) << ',' << r.reason << '\n';
  }
}

}  // namespace mslab
