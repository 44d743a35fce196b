#include <mslab/czd.hpp>
#include <mslab/field_io.hpp>
#include <mslab/weights.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace mslab {

NodeRange dilated_range(const DyadicCube& q, int dim, int factor) {
  NodeRange r;
  const int s = q.side_nodes();
  for (int a = 0; a < dim; ++a) {
    // |2i - (2c + s - 1)| < factor·s
    const long twice = 2L * q.corner[a] + s - 1;
    const long w = long(factor) * s;
    r.lo[a] = int(std::floor((twice - w) / 2.0)) + 1;
    r.hi[a] = int(std::ceil((twice + w) / 2.0)) - 1;
  }
  return r;
}

NodeRange clip(const Grid& g, NodeRange r) {
  for (int a = 0; a < g.dim(); ++a) {
    r.lo[a] = std::max(r.lo[a], 0);
    r.hi[a] = std::min(r.hi[a], g.points() - 1);
  }
  return r;
}

bool range_inside(const Grid& g, const NodeRange& r) {
  for (int a = 0; a < g.dim(); ++a)
    if (r.lo[a] < 0 || r.hi[a] >= g.points()) return false;
  return true;
}

std::vector<Index> range_nodes(const Grid& g, const NodeRange& r) {
  std::vector<Index> out;
  for (int a = 0; a < g.dim(); ++a)
    if (r.lo[a] > r.hi[a]) return out;
  MultiIndex m{0, 0, 0};
  const int d = g.dim();
  for (m[2] = d > 2 ? r.lo[2] : 0; m[2] <= (d > 2 ? r.hi[2] : 0); ++m[2])
    for (m[1] = r.lo[1]; m[1] <= r.hi[1]; ++m[1])
      for (m[0] = r.lo[0]; m[0] <= r.hi[0]; ++m[0]) out.push_back(g.index(m));
  return out;
}

namespace {

NodeBox box_from(const NodeRange& r, int dim) {
  NodeBox b;
  b.lo = r.lo;
  b.extent = {0, 0, 0};
  for (int a = 0; a < dim; ++a) b.extent[a] = r.hi[a] - r.lo[a];
  return b;
}

bool in_range(const NodeRange& r, const MultiIndex& m, int dim) {
  for (int a = 0; a < dim; ++a)
    if (m[a] < r.lo[a] || m[a] > r.hi[a]) return false;
  return true;
}

bool ranges_meet(const NodeRange& x, const NodeRange& y, int dim) {
  for (int a = 0; a < dim; ++a)
    if (x.hi[a] < y.lo[a] || y.hi[a] < x.lo[a]) return false;
  return true;
}

bool range_within(const NodeRange& inner, const NodeRange& outer, int dim) {
  for (int a = 0; a < dim; ++a)
    if (inner.lo[a] < outer.lo[a] || inner.hi[a] > outer.hi[a]) return false;
  return true;
}

double bump(double t) {
  if (t <= 0.5) return 1.0;
  const double u = 2.0 * t - 1.0;
  if (u <= 0.5) return 1.0 - 2.0 * u * u;
  if (u < 1.0) return 2.0 * (1.0 - u) * (1.0 - u);
  return 0.0;
}

double profile(const DyadicCube& q, const MultiIndex& m, int dim) {
  const double s = q.side_nodes();
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= bump(std::abs(m[a] - (q.corner[a] + 0.5 * (s - 1.0))) / s);
  return v;
}

double physical_side(const Grid& g, const DyadicCube& q) { return q.side_nodes() * g.spacing(); }

VectorXd box_gauge(const CZInput& in, const NodeBox& box) {
  const Grid& g = in.grid;
  if (!in.B || box.count(g.dim()) == 1) return tree_gauge(g, in.theta, box);
  GaugeData gd = poincare_gauge(g, *in.B, box);
  recover_phi(g, in.theta, gd);
  return gd.phi;
}

}  // namespace

std::vector<DyadicCube> whitney(const Grid& g, const NodeMask& omega) {
  require(Index(omega.size()) == g.nodes(), "whitney: mask does not match grid");
  const Index inside = std::count(omega.begin(), omega.end(), char(1));
  if (inside == 0) return {};
  require(inside < g.nodes(), "whitney: F is empty (Ω is the whole grid)");
  const int d = g.dim(), N = g.points();
  int top = 0;
  while ((2 << top) <= N) ++top;

  std::vector<char> covered(g.nodes(), 0);
  std::vector<DyadicCube> out;
  for (int l = top; l >= 0; --l) {
    const int s = 1 << l, per = N / s;
    MultiIndex c{0, 0, 0};
    const int per2 = d > 2 ? per : 1;
    for (c[2] = 0; c[2] < per2; ++c[2])
      for (c[1] = 0; c[1] < per; ++c[1])
        for (c[0] = 0; c[0] < per; ++c[0]) {
          DyadicCube q{l, {c[0] * s, c[1] * s, d > 2 ? c[2] * s : 0}};
          if (covered[g.index(q.corner)]) continue;
          const NodeRange r2 = dilated_range(q, d, 2);
          if (!range_inside(g, r2)) continue;
          const auto nodes2 = range_nodes(g, r2);
          if (!std::all_of(nodes2.begin(), nodes2.end(), [&](Index k) { return omega[k] != 0; }))
            continue;
          for (Index k : range_nodes(g, dilated_range(q, d, 1))) covered[k] = 1;
          out.push_back(q);
        }
  }
  return out;
}

WhitneyCheck check_whitney(const Grid& g, const NodeMask& omega, const std::vector<DyadicCube>& cubes) {
  WhitneyCheck c;
  const int d = g.dim();
  std::vector<int> count(g.nodes(), 0), count2(g.nodes(), 0);
  for (const auto& q : cubes) {
    const NodeRange r1 = dilated_range(q, d, 1);
    for (Index k : range_nodes(g, clip(g, r1))) {
      ++count[k];
      if (!omega[k]) ++c.outside_nodes;
    }
    const NodeRange r2 = dilated_range(q, d, 2);
    const auto n2 = range_nodes(g, clip(g, r2));
    bool ok2 = range_inside(g, r2);
    for (Index k : n2) {
      ++count2[k];
      if (!omega[k]) ok2 = false;
    }
    if (!ok2) ++c.double_violations;
    const NodeRange r4 = dilated_range(q, d, 4);
    bool meets = !range_inside(g, r4);
    if (!meets)
      for (Index k : range_nodes(g, r4))
        if (!omega[k]) {
          meets = true;
          break;
        }
    if (!meets) ++c.far_violations;
  }
  for (Index k = 0; k < g.nodes(); ++k) {
    if (count[k] > 1) ++c.overlapping_nodes;
    if (omega[k] && count[k] == 0) ++c.uncovered_nodes;
    c.overlap = std::max(c.overlap, count2[k]);
  }
  return c;
}

Partition partition_of_unity(const Grid& g, const std::vector<DyadicCube>& cubes) {
  const int d = g.dim();
  Partition P;
  VectorXd total = VectorXd::Zero(g.nodes());
  P.pieces.resize(cubes.size());
  for (size_t k = 0; k < cubes.size(); ++k) {
    auto& piece = P.pieces[k];
    piece.nodes = range_nodes(g, clip(g, dilated_range(cubes[k], d, 2)));
    require(!piece.nodes.empty(), "partition_of_unity: degenerate cube");
    piece.values.resize(piece.nodes.size());
    for (size_t i = 0; i < piece.nodes.size(); ++i) {
      piece.values[i] = profile(cubes[k], g.multi_index(piece.nodes[i]), d);
      total[piece.nodes[i]] += piece.values[i];
    }
  }
  for (auto& piece : P.pieces)
    for (size_t i = 0; i < piece.nodes.size(); ++i) {
      const double t = total[piece.nodes[i]];
      if (t <= 0.0) throw InputError("partition_of_unity: cubes do not cover their own nodes");
      piece.values[i] /= t;
    }
  P.constant = partition_constant(g, cubes, P.pieces);
  return P;
}

double partition_constant(const Grid& g, const std::vector<DyadicCube>& cubes,
                          const std::vector<PartitionPiece>& pieces) {
  require(cubes.size() == pieces.size(), "partition_constant: size mismatch");
  const int d = g.dim();
  double worst = 0.0;
  for (size_t k = 0; k < cubes.size(); ++k) {
    std::map<Index, double> val;
    double sup = 0.0;
    for (size_t i = 0; i < pieces[k].nodes.size(); ++i) {
      val[pieces[k].nodes[i]] = pieces[k].values[i];
      sup = std::max(sup, std::abs(pieces[k].values[i]));
    }
    auto at = [&](const MultiIndex& m) {
      if (!g.contains(m)) return 0.0;
      auto it = val.find(g.index(m));
      return it == val.end() ? 0.0 : it->second;
    };
    NodeRange r = dilated_range(cubes[k], d, 2);
    for (int a = 0; a < d; ++a) --r.lo[a];
    double grad = 0.0;
    MultiIndex m{0, 0, 0};
    for (m[2] = d > 2 ? r.lo[2] : 0; m[2] <= (d > 2 ? r.hi[2] : 0); ++m[2])
      for (m[1] = r.lo[1]; m[1] <= r.hi[1]; ++m[1])
        for (m[0] = r.lo[0]; m[0] <= r.hi[0]; ++m[0]) {
          const double here = at(m);
          double s2 = 0.0;
          for (int a = 0; a < d; ++a) {
            MultiIndex n = m;
            ++n[a];
            const double diff = at(n) - here;
            s2 += diff * diff;
          }
          grad = std::max(grad, std::sqrt(s2));
        }
    worst = std::max(worst, sup + cubes[k].side_nodes() * grad);
  }
  return worst;
}

VectorXd tree_gauge(const Grid& g, const EdgePhaseField& theta, const NodeBox& box) {
  require(theta.matches(g), "tree_gauge: phases do not match grid");
  const int d = g.dim();
  const auto nodes = box_nodes(g, box);
  VectorXd phi = VectorXd::Zero(nodes.size());
  for (size_t i = 1; i < nodes.size(); ++i) {
    MultiIndex m = box.local(Index(i), d);
    int a = d - 1;
    while (m[a] == 0) --a;
    --m[a];
    const Index parent = box.local_index(m, d);
    phi[i] = phi[parent] - theta.theta[a][nodes[parent]];
  }
  return phi;
}

namespace {

struct Densities {
  VectorXd Lf, G;
};

Densities densities(const HOperator& H, const Field& f, const WeightField& w, double p) {
  Densities D;
  D.Lf = gradient_magnitude(H, f);
  D.G.resize(f.size());
  for (Index k = 0; k < f.size(); ++k)
    D.G[k] = std::pow(D.Lf[k], p) + std::pow(std::sqrt(w[k]) * std::abs(f[k]), p);
  return D;
}

void validate(const CZInput& in) {
  const Grid& g = in.grid;
  require(in.p >= 1.0 && in.p < 2.0, "cz_decompose: p must lie in [1, 2)");
  require(in.alpha > 0.0 && std::isfinite(in.alpha), "cz_decompose: alpha must be positive");
  require(in.f.size() == g.nodes(), "cz_decompose: f does not match grid");
  require(in.omega.size() == g.nodes(), "cz_decompose: omega does not match grid");
  require((in.omega.array() >= 0.0).all() && in.omega.allFinite(), "cz_decompose: omega must be finite and nonnegative");
  require(in.theta.matches(g), "cz_decompose: phases do not match grid");
}

double h_norm(const VectorXd& v, double p, double vol) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
  return std::pow(s * vol, 1.0 / p);
}

}  // namespace

CZDecomposition cz_decompose(const CZInput& in) {
  validate(in);
  const Grid& g = in.grid;
  const int d = g.dim();
  CZDecomposition D{in, {}, {}, {}, {}, in.f, {}};
  const HOperator H = assemble(g, in.theta, in.omega);
  const Densities dens = densities(H, in.f, in.omega, in.p);
  D.G = dens.G;
  D.MG = maximal_function(g, D.G, in.maximal_sizes);
  const double level = std::pow(in.alpha, in.p);
  D.omega_mask.assign(g.nodes(), 0);
  for (Index k = 0; k < g.nodes(); ++k) D.omega_mask[k] = D.MG[k] > level;

  const auto cubes = whitney(g, D.omega_mask);
  if (!cubes.empty()) {
    const Partition P = partition_of_unity(g, cubes);
    D.cubes.resize(cubes.size());
    for (size_t k = 0; k < cubes.size(); ++k) {
      CZCube& c = D.cubes[k];
      c.cube = cubes[k];
      c.R = physical_side(g, c.cube);
      c.mean_omega = 0.0;
      const auto q_nodes = range_nodes(g, dilated_range(c.cube, d, 1));
      for (Index n : q_nodes) c.mean_omega += in.omega[n];
      c.mean_omega /= double(q_nodes.size());
      c.type = c.R * c.R * c.mean_omega > 1.0 ? 1 : 2;
      c.box = box_from(dilated_range(c.cube, d, 2), d);
      c.nodes = P.pieces[k].nodes;
      c.chi = P.pieces[k].values;
      const Index n = Index(c.nodes.size());
      c.b.resize(n);
      if (c.type == 1) {
        for (Index i = 0; i < n; ++i) c.b[i] = in.f[c.nodes[i]] * c.chi[i];
      } else {
        c.phi = box_gauge(in, c.box);
        Complex m{0.0, 0.0};
        for (Index i = 0; i < n; ++i) m += std::exp(I * c.phi[i]) * in.f[c.nodes[i]];
        c.mean = m / double(n);
        for (Index i = 0; i < n; ++i)
          c.b[i] = (in.f[c.nodes[i]] - std::exp(-I * c.phi[i]) * c.mean) * c.chi[i];
      }
      for (Index i = 0; i < n; ++i) D.g[c.nodes[i]] -= c.b[i];
    }
  }
  D.certificate = cz_verify(D);
  return D;
}

CZCertificate cz_verify(const CZDecomposition& D) {
  const CZInput& in = D.input;
  validate(in);
  const Grid& g = in.grid;
  const int d = g.dim();
  const double vol = g.cell_volume();
  const double p = in.p, alpha = in.alpha, level = std::pow(alpha, p);
  CZCertificate C;
  auto fail = [&](const std::string& what) {
    C.ok = false;
    C.violations.push_back(what);
  };

  const HOperator H = assemble(g, in.theta, in.omega);
  const Densities dens = densities(H, in.f, in.omega, p);
  const VectorXd MG = maximal_function(g, dens.G, in.maximal_sizes);
  NodeMask mask(g.nodes(), 0);
  for (Index k = 0; k < g.nodes(); ++k) mask[k] = MG[k] > level;
  C.mask_matches = mask == D.omega_mask;
  if (!C.mask_matches) fail("stored Ω differs from the recomputed level set");

  std::vector<DyadicCube> cubes;
  for (const auto& c : D.cubes) cubes.push_back(c.cube);
  C.whitney = check_whitney(g, mask, cubes);
  if (C.whitney.overlapping_nodes) fail("Whitney cubes overlap");
  if (C.whitney.uncovered_nodes) fail("Whitney cubes do not cover Ω");
  if (C.whitney.outside_nodes) fail("Whitney cubes leave Ω");
  if (C.whitney.double_violations) fail("some 2Q_k is not contained in Ω");
  C.overlap = C.whitney.overlap;

  // partition, supports, types
  VectorXd chi_sum = VectorXd::Zero(g.nodes());
  Field rest = in.f - D.g;
  std::vector<PartitionPiece> pieces;
  for (size_t k = 0; k < D.cubes.size(); ++k) {
    const CZCube& c = D.cubes[k];
    const NodeRange r2 = dilated_range(c.cube, d, 2);
    if (c.chi.size() != Index(c.nodes.size()) || c.b.size() != Index(c.nodes.size())) {
      fail("cube " + std::to_string(k) + ": stored sizes disagree");
      continue;
    }
    for (size_t i = 0; i < c.nodes.size(); ++i) {
      const bool inside = in_range(r2, g.multi_index(c.nodes[i]), d);
      if (!inside && (c.chi[i] != 0.0 || c.b[i] != 0.0)) ++C.support_violations;
      chi_sum[c.nodes[i]] += c.chi[i];
      rest[c.nodes[i]] -= c.b[i];
    }
    pieces.push_back({c.nodes, c.chi});
    const double R = physical_side(g, c.cube);
    const int type = R * R * c.mean_omega > 1.0 ? 1 : 2;
    if (type != c.type) fail("cube " + std::to_string(k) + ": type tag disagrees with R²⨍ω");
    (c.type == 1 ? C.type1 : C.type2)++;
  }
  if (C.support_violations) fail("χ_k or b_k nonzero outside 2Q_k");
  for (Index k = 0; k < g.nodes(); ++k) {
    if (mask[k]) C.partition_sum = std::max(C.partition_sum, std::abs(chi_sum[k] - 1.0));
    else if (chi_sum[k] != 0.0) C.partition_sum = std::max(C.partition_sum, std::abs(chi_sum[k]));
  }
  if (!D.cubes.empty() && C.partition_sum > 1e-12) fail("Σχ_k differs from 1_Ω");
  const double fmax = in.f.cwiseAbs().maxCoeff();
  C.reconstruction = rest.cwiseAbs().maxCoeff() / std::max(fmax, 1e-300);
  if (C.reconstruction > 1e-12) fail("f ≠ g + Σb_k");
  if (pieces.size() == D.cubes.size() && !pieces.empty()) C.partition = partition_constant(g, cubes, pieces);

  for (Index k = 0; k < g.nodes(); ++k)
    if (!mask[k]) C.F_excess = std::max(C.F_excess, dens.G[k] / level);

  // good part: L² energy and sup of |Lg|
  const VectorXd Lg = gradient_magnitude(H, D.g);
  VectorXd wg(g.nodes()), wf(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) {
    wg[k] = std::sqrt(in.omega[k]) * std::abs(D.g[k]);
    wf[k] = std::sqrt(in.omega[k]) * std::abs(in.f[k]);
  }
  const double rhs = std::pow(alpha, 1.0 - p / 2.0) *
                     std::pow(h_norm(dens.Lf, p, vol) + h_norm(wf, p, vol), p / 2.0);
  C.good_l2 = (h_norm(Lg, 2.0, vol) + h_norm(wg, 2.0, vol)) / rhs;
  C.good_sup = Lg.maxCoeff() / alpha;

  // bad parts per cube, measure of the level set
  double measure = 0.0;
  for (const auto& c : D.cubes) {
    if (c.b.size() != Index(c.nodes.size())) continue;
    Field full = Field::Zero(g.nodes());
    for (size_t i = 0; i < c.nodes.size(); ++i) full[c.nodes[i]] = c.b[i];
    const VectorXd Lb = gradient_magnitude(H, full);
    const double R = physical_side(g, c.cube);
    double s = 0.0;
    for (Index k = 0; k < g.nodes(); ++k)
      s += std::pow(Lb[k], p) + std::pow(std::abs(full[k]) / R, p);
    const double Q = std::pow(R, d);
    C.bad_per_cube = std::max(C.bad_per_cube, s * vol / (level * Q));
    measure += Q;
  }
  C.level_measure = D.cubes.empty() ? 0.0 : measure * level / (dens.G.sum() * vol);

  // mean offsets between neighbouring cubes
  std::vector<NodeRange> r2(D.cubes.size());
  for (size_t k = 0; k < D.cubes.size(); ++k) r2[k] = dilated_range(D.cubes[k].cube, d, 2);
  std::map<size_t, std::pair<NodeRange, VectorXd>> tilde;
  for (size_t k = 0; k < D.cubes.size(); ++k) {
    if (D.cubes[k].type != 2) continue;
    for (size_t m = 0; m < D.cubes.size(); ++m) {
      if (!ranges_meet(r2[k], r2[m], d)) continue;
      auto it = tilde.find(m);
      if (it == tilde.end()) {
        const NodeRange rt = clip(g, dilated_range(D.cubes[m].cube, d, 18));
        it = tilde.emplace(m, std::make_pair(rt, box_gauge(in, box_from(rt, d)))).first;
      }
      const NodeRange& rt = it->second.first;
      const VectorXd& phi = it->second.second;
      if (!range_within(r2[k], rt, d)) {
        ++C.mean_offset_uncontained;
        continue;
      }
      const NodeBox bt = box_from(rt, d);
      const auto tn = range_nodes(g, rt);
      Complex big{0.0, 0.0}, small{0.0, 0.0};
      for (size_t i = 0; i < tn.size(); ++i) big += std::exp(I * phi[i]) * in.f[tn[i]];
      big /= double(tn.size());
      const auto kn = range_nodes(g, r2[k]);
      for (Index n : kn) {
        MultiIndex loc = g.multi_index(n);
        for (int a = 0; a < d; ++a) loc[a] -= rt.lo[a];
        small += std::exp(I * phi[bt.local_index(loc, d)]) * in.f[n];
      }
      small /= double(kn.size());
      const double Rt = (bt.max_extent(d) + 1) * g.spacing();
      C.mean_offset = std::max(C.mean_offset, std::abs(small - big) / (Rt * alpha));
      ++C.mean_offset_pairs;
    }
  }
  return C;
}

nlohmann::json certificate_to_json(const CZCertificate& c) {
  nlohmann::json j;
  j["good_l2"] = c.good_l2;
  j["bad_per_cube"] = c.bad_per_cube;
  j["level_measure"] = c.level_measure;
  j["overlap"] = c.overlap;
  j["good_sup"] = c.good_sup;
  j["partition"] = c.partition;
  j["mean_offset"] = c.mean_offset;
  j["mean_offset_pairs"] = c.mean_offset_pairs;
  j["mean_offset_uncontained"] = c.mean_offset_uncontained;
  j["reconstruction"] = c.reconstruction;
  j["partition_sum"] = c.partition_sum;
  j["support_violations"] = c.support_violations;
  j["F_excess"] = c.F_excess;
  j["type1"] = c.type1;
  j["type2"] = c.type2;
  j["whitney"] = {{"overlapping_nodes", c.whitney.overlapping_nodes},
                  {"uncovered_nodes", c.whitney.uncovered_nodes},
                  {"outside_nodes", c.whitney.outside_nodes},
                  {"double_violations", c.whitney.double_violations},
                  {"far_violations", c.whitney.far_violations}};
  j["mask_matches"] = c.mask_matches;
  j["ok"] = c.ok;
  j["violations"] = c.violations;
  return j;
}

nlohmann::json cz_manifest(const CZDecomposition& d) {
  nlohmann::json j;
  j["grid"] = grid_to_json(d.input.grid);
  j["p"] = d.input.p;
  j["alpha"] = d.input.alpha;
  j["gauge"] = d.input.B ? "poincare" : "tree";
  j["omega_nodes"] = std::count(d.omega_mask.begin(), d.omega_mask.end(), char(1));
  j["cubes"] = d.cubes.size();
  j["certificate"] = certificate_to_json(d.certificate);
  return j;
}

void write_cube_csv(std::ostream& os, const CZDecomposition& d) {
  const int n = d.input.grid.dim();
  os << "k";
  for (int a = 0; a < n; ++a) os << ",corner" << a;
  os << ",side_nodes,R,type,mean_omega\n";
  for (size_t k = 0; k < d.cubes.size(); ++k) {
    const auto& c = d.cubes[k];
    os << k;
    for (int a = 0; a < n; ++a) os << ',' << c.cube.corner[a];
    os << ',' << c.cube.side_nodes() << ',' << c.R << ',' << c.type << ',' << c.mean_omega << '\n';
  }
}

void write_bad_parts_csv(std::ostream& os, const CZDecomposition& d) {
  const Grid& g = d.input.grid;
  os << "k";
  for (int a = 0; a < g.dim(); ++a) os << ",i" << a + 1;
  os << ",re,im\n";
  os.precision(17);
  for (size_t k = 0; k < d.cubes.size(); ++k) {
    const auto& c = d.cubes[k];
    for (size_t i = 0; i < c.nodes.size(); ++i) {
      const MultiIndex m = g.multi_index(c.nodes[i]);
      os << k;
      for (int a = 0; a < g.dim(); ++a) os << ',' << m[a];
      os << ',' << c.b[i].real() << ',' << c.b[i].imag() << '\n';
    }
  }
}

}  // namespace mslab
