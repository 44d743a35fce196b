#include <mslab/weights.hpp>

#include <algorithm>
#include <cmath>

namespace mslab {

namespace {

struct Sums {
  double s1 = 0.0;   // Σ ω
  double sq = 0.0;   // Σ ω^q
  double max = 0.0;  // max ω
  Index n = 0;
};

Sums cube_sums(const Grid& g, const WeightField& w, const Cube& c, double q) {
  Sums s;
  for (Index k : cube_nodes(g, c)) {
    const double v = w[k];
    s.s1 += v;
    if (std::isfinite(q)) s.sq += std::pow(v, q);
    s.max = std::max(s.max, v);
    ++s.n;
  }
  return s;
}

void check_weight(const Grid& g, const WeightField& w) {
  require(w.size() == g.nodes(), "weights: weight does not match grid");
  require(w.allFinite() && w.minCoeff() >= 0.0, "weights: weight must be finite and nonnegative");
  require(w.maxCoeff() > 0.0, "weights: weight vanishes identically");
}

void check_levels(const Grid& g, LevelRange r) {
  require(r.lo >= 0 && r.lo <= r.hi, "weights: empty level range");
  require((1 << r.hi) <= g.points(), "weights: level exceeds the grid");
}

// Cube of physical side r centred at y, provided it lies inside the grid.
bool inside(const Grid& g, const Cube& c) {
  for (int a = 0; a < g.dim(); ++a)
    if (c.center[a] - 0.5 * c.side < -0.5 - 1e-9 || c.center[a] + 0.5 * c.side > g.points() - 0.5 + 1e-9)
      return false;
  return true;
}

}  // namespace

LevelRange full_levels(const Grid& g) {
  int hi = 0;
  while ((2 << hi) <= g.points()) ++hi;
  return {0, hi};
}

WeightReport rh_constant(const Grid& g, const WeightField& w, double q, LevelRange levels) {
  check_weight(g, w);
  check_levels(g, levels);
  require(q > 1.0, "rh_constant: q must exceed 1");
  WeightReport rep;
  rep.q = q;
  rep.levels = levels;
  rep.rh_constant = 1.0;
  for (int l = levels.lo; l <= levels.hi; ++l) {
    LevelMax lm;
    lm.level = l;
    for (const auto& dq : dyadic_cubes(g, l).cubes) {
      const Sums s = cube_sums(g, w, dq.cube(g.dim()), q);
      if (s.s1 <= 0.0) continue;
      const double mean = s.s1 / s.n;
      const double top = std::isfinite(q) ? std::pow(s.sq / s.n, 1.0 / q) : s.max;
      const double c = top / mean;
      ++lm.cubes;
      if (c > lm.value) {
        lm.value = c;
        lm.argmax = dq;
      }
    }
    rep.per_level.push_back(lm);
    rep.rh_constant = std::max(rep.rh_constant, lm.value);
  }
  rep.doubling = doubling_constant(g, w, levels);
  return rep;
}

double doubling_constant(const Grid& g, const WeightField& w, LevelRange levels) {
  check_weight(g, w);
  check_levels(g, levels);
  double best = 1.0;
  for (int l = levels.lo; l <= levels.hi; ++l)
    for (const auto& dq : dyadic_cubes(g, l).cubes) {
      const Cube c = dq.cube(g.dim());
      const Cube c2 = c.dilate(2.0);
      if (!inside(g, c2)) continue;
      const double inner = cube_sums(g, w, c, 1.0).s1;
      const double outer = cube_sums(g, w, c2, 1.0).s1;
      if (inner > 0.0) best = std::max(best, outer / inner);
      else if (outer > 0.0) return kInf;
    }
  return best;
}

WeightReport ainfty_profile(const Grid& g, const WeightField& w, const std::vector<double>& s_list,
                            LevelRange levels) {
  check_weight(g, w);
  require(!s_list.empty(), "ainfty_profile: empty exponent list");
  WeightReport rep;
  rep.levels = levels;
  rep.doubling = doubling_constant(g, w, levels);
  for (double s : s_list) {
    require(s > 0.0 && s < 1.0, "ainfty_profile: s must lie in (0, 1)");
    const WeightField ws = w.array().pow(s).matrix();
    const WeightReport r = rh_constant(g, ws, 1.0 / s, levels);
    rep.ainfty_profile.emplace_back(s, r.rh_constant);
    if (levels.hi > levels.lo) {
      const WeightReport shallow = rh_constant(g, ws, 1.0 / s, {levels.lo, levels.hi - 1});
      const double growth = r.rh_constant / shallow.rh_constant;
      rep.ainfty_growth = std::max(rep.ainfty_growth, growth);
    }
  }
  rep.ainfty_consistent = rep.ainfty_growth <= 1.25;
  return rep;
}

double rh_largest_exponent(const Grid& g, const WeightField& w, const std::vector<double>& q_candidates,
                           double threshold, LevelRange levels) {
  double best = 1.0;
  for (double q : q_candidates)
    if (rh_constant(g, w, q, levels).rh_constant <= threshold) best = std::max(best, q);
  return best;
}

ControlReport control_condition_check(const Grid& g, const MagneticField& B, const WeightField& V,
                                      LevelRange levels, bool with_gradient) {
  require(V.size() == g.nodes() && V.allFinite() && V.minCoeff() >= 0.0,
          "control_condition_check: V must be a finite nonnegative field on the grid");
  require(B.dim == g.dim(), "control_condition_check: field dimension does not match grid");
  check_levels(g, levels);
  ControlReport rep;
  rep.has_C2 = with_gradient;
  rep.gradient_numeric = with_gradient && !B.gradient_norm;

  VectorXd mag(g.nodes()), grad = VectorXd::Zero(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) {
    const Point x = g.coord(k);
    const Eigen::Matrix3d F = B.strength(x);
    if ((F + F.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, F.cwiseAbs().maxCoeff()))
      throw InputError("control_condition_check: B is not antisymmetric");
    mag[k] = B.magnitude(x);
    if (!with_gradient) continue;
    if (B.gradient_norm) {
      grad[k] = B.gradient_norm(x);
    } else {
      double s2 = 0.0;
      for (int i = 0; i < g.dim(); ++i) {
        Point xp = x, xm = x;
        xp[i] += g.spacing();
        xm[i] -= g.spacing();
        const Eigen::Matrix3d d = (B.strength(xp) - B.strength(xm)) / (2.0 * g.spacing());
        for (int a = 0; a < g.dim(); ++a)
          for (int b = a + 1; b < g.dim(); ++b) s2 += d(a, b) * d(a, b);
      }
      grad[k] = std::sqrt(s2);
    }
  }
  for (Index k = 0; k < g.nodes(); ++k) {
    if (V[k] > 0.0) rep.pointwise = std::max(rep.pointwise, mag[k] / V[k]);
    else if (mag[k] > 0.0) rep.pointwise = kInf;
  }

  for (int l = levels.lo; l <= levels.hi; ++l) {
    LevelMax lm;
    lm.level = l;
    for (const auto& dq : dyadic_cubes(g, l).cubes) {
      const auto nodes = cube_nodes(g, dq.cube(g.dim()));
      double sumV = 0.0, supB = 0.0, supG = 0.0;
      for (Index k : nodes) {
        sumV += V[k];
        supB = std::max(supB, mag[k]);
        supG = std::max(supG, grad[k]);
      }
      const double avg = sumV / static_cast<double>(nodes.size());
      if (avg <= 0.0) throw InputError("control_condition_check: V vanishes on a scanned cube");
      ++lm.cubes;
      const double c1 = supB / avg;
      if (c1 > lm.value) {
        lm.value = c1;
        lm.argmax = dq;
      }
      if (c1 > rep.C1) {
        rep.C1 = c1;
        rep.worst_C1 = dq;
      }
      if (with_gradient) {
        const double c2 = supG / std::pow(avg, 1.5);
        if (c2 > rep.C2) {
          rep.C2 = c2;
          rep.worst_C2 = dq;
        }
      }
    }
    rep.per_level_C1.push_back(lm);
  }
  return rep;
}

double m_beta(double x, double beta) {
  require(beta > 0.0 && beta < 1.0, "m_beta: β must lie in (0, 1)");
  require(x >= 0.0, "m_beta: argument must be nonnegative");
  return x <= 1.0 ? x : std::pow(x, beta);
}

double fefferman_phong_ratio(const Grid& g, const Field& u, const EdgePhaseField& theta,
                             const WeightField& w, const Cube& q, double p, double beta) {
  require(p >= 1.0 && std::isfinite(p), "fefferman_phong_ratio: p must lie in [1, inf)");
  require(u.size() == g.nodes() && w.size() == g.nodes(), "fefferman_phong_ratio: field does not match grid");
  const auto nodes = cube_nodes(g, q);
  require(!nodes.empty(), "fefferman_phong_ratio: cube does not meet the grid");
  std::vector<EdgeField> Lu;
  for (int j = 0; j < g.dim(); ++j) Lu.push_back(covariant_derivative(g, u, theta, j));
  double lhs = 0.0, upow = 0.0, wsum = 0.0;
  for (Index k : nodes) {
    double grad2 = 0.0;
    for (int j = 0; j < g.dim(); ++j) {
      const Index up = g.neighbor(k, j, 1);
      if (up < 0 || !cube_contains(g, q, g.multi_index(up))) continue;
      grad2 += std::norm(Lu[j][g.forward_edge(k, j)]);
    }
    const double a = std::pow(std::abs(u[k]), p);
    lhs += std::pow(grad2, 0.5 * p) + w[k] * a;
    upow += a;
    wsum += w[k];
  }
  const double R = q.physical_side(g);
  const double Rp = std::pow(R, p);
  const double den = m_beta(Rp * wsum / nodes.size(), beta) / Rp * upow;
  if (!(den > 0.0)) throw InputError("fefferman_phong_ratio: zero denominator");
  return lhs / den;
}

ShenAlpha shen_alpha_estimate(const Grid& g, const WeightField& V, const Point& y,
                              const std::vector<std::pair<double, double>>& pairs) {
  check_weight(g, V);
  require(!pairs.empty(), "shen_alpha_estimate: no scale pairs");
  ShenAlpha out;
  out.alpha = kInf;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [r, R] : pairs) {
    require(r > 0.0 && r < R, "shen_alpha_estimate: need 0 < r < R");
    const double ar = cube_average(g, V, cube_around(g, y, r));
    const double aR = cube_average(g, V, cube_around(g, y, R));
    if (!(aR > 0.0)) throw InputError("shen_alpha_estimate: V vanishes on the outer cube");
    const double rho = (r * r * ar) / (R * R * aR);
    out.ratios.push_back(rho);
    const double x = std::log(r / R);
    const double ly = rho > 0.0 ? std::log(rho) : -kInf;
    out.alpha = std::min(out.alpha, rho > 0.0 ? ly / x : kInf);
    if (rho > 0.0) {
      sxy += x * ly;
      sxx += x * x;
    }
  }
  out.regression = sxx > 0.0 ? sxy / sxx : 0.0;
  out.flagged = !(out.alpha > 0.25);
  return out;
}

DyadicSum dyadic_sum(const Grid& g, const WeightField& V, const Point& y, int L) {
  require(L >= 0, "dyadic_sum: L must be nonnegative");
  require(V.size() == g.nodes(), "dyadic_sum: weight does not match grid");
  DyadicSum out;
  out.level_lo = L + 1;
  out.level_hi = -L - 1;
  for (int l = -L; l <= L; ++l) {
    const double side = std::ldexp(1.0, l);
    const Cube q = cube_around(g, y, side);
    if (!inside(g, q)) {
      out.clipped = true;
      continue;
    }
    const auto nodes = cube_nodes(g, q);
    Cube use = q;
    if (nodes.empty()) use.side = 1.0;  // below the lattice scale: the node at y
    const double avg = cube_average(g, V, use);
    if (!(avg > 0.0)) throw InputError("dyadic_sum: V vanishes on a level cube");
    const double x = std::ldexp(1.0, 2 * l) * avg;
    const double t = std::sqrt(x) / (1.0 + x);
    out.terms.push_back(t);
    out.value += t;
    out.level_lo = std::min(out.level_lo, l);
    out.level_hi = std::max(out.level_hi, l);
  }
  require(!out.terms.empty(), "dyadic_sum: no level cube fits inside the grid");
  return out;
}

}  // namespace mslab

namespace mslab {

std::vector<int> maximal_sizes(const Grid& g) {
  std::vector<int> s;
  for (int k = 1; k <= g.points(); k *= 2) {
    s.push_back(k);
    if (3 * k / 2 > k && 3 * k / 2 <= g.points() && k > 1) s.push_back(3 * k / 2);
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

VectorXd maximal_function(const Grid& g, const VectorXd& values, std::vector<int> sizes) {
  require(values.size() == g.nodes(), "maximal_function: field does not match grid");
  if (sizes.empty()) sizes = maximal_sizes(g);
  const int N = g.points(), d = g.dim();
  const Index total = g.nodes();
  // summed-area table with one padding layer per axis
  const int P = N + 1;
  std::vector<Index> pstride(3, 0);
  pstride[0] = 1;
  for (int a = 1; a < 3; ++a) pstride[a] = a < d ? pstride[a - 1] * P : 0;
  const Index ptotal = d == 1 ? P : (d == 2 ? Index(P) * P : Index(P) * P * P);
  std::vector<double> S(ptotal, 0.0);
  for (Index k = 0; k < total; ++k) {
    const MultiIndex m = g.multi_index(k);
    Index pk = 0;
    for (int a = 0; a < d; ++a) pk += (m[a] + 1) * pstride[a];
    S[pk] = std::abs(values[k]);
  }
  for (int a = 0; a < d; ++a)
    for (Index pk = 0; pk < ptotal; ++pk) {
      const int c = int((pk / pstride[a]) % P);
      if (c > 0) S[pk] += S[pk - pstride[a]];
    }
  auto box_sum = [&](const MultiIndex& lo, int s) {
    double acc = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
      Index pk = 0;
      int sign = 1;
      for (int a = 0; a < d; ++a) {
        const bool hi = corner >> a & 1;
        pk += (hi ? lo[a] + s : lo[a]) * pstride[a];
        if (!hi) sign = -sign;
      }
      acc += sign * S[pk];
    }
    return acc;
  };

  VectorXd M = VectorXd::Zero(total);
  for (int s : sizes) {
    require(s >= 1, "maximal_function: cube size must be positive");
    if (s > N) continue;
    const int C = N - s + 1;  // corner positions per axis
    const Index ctotal = d == 1 ? C : (d == 2 ? Index(C) * C : Index(C) * C * C);
    std::vector<double> A(ctotal);
    const double vol = std::pow(double(s), d);
    for (Index ck = 0; ck < ctotal; ++ck) {
      MultiIndex lo{0, 0, 0};
      Index r = ck;
      for (int a = 0; a < d; ++a) {
        lo[a] = int(r % C);
        r /= C;
      }
      A[ck] = box_sum(lo, s) / vol;
    }
    // separable window max: a cube with corner c contains x iff x-s+1 ≤ c ≤ x
    std::vector<int> ext(3, 1);
    for (int a = 0; a < d; ++a) ext[a] = C;
    std::vector<double> cur = A;
    for (int a = 0; a < d; ++a) {
      std::vector<int> next_ext = ext;
      next_ext[a] = N;
      std::vector<Index> st(3, 0), nst(3, 0);
      st[0] = nst[0] = 1;
      for (int b = 1; b < 3; ++b) {
        st[b] = st[b - 1] * ext[b - 1];
        nst[b] = nst[b - 1] * next_ext[b - 1];
      }
      std::vector<double> nxt(Index(next_ext[0]) * next_ext[1] * next_ext[2], 0.0);
      for (int i2 = 0; i2 < next_ext[2]; ++i2)
        for (int i1 = 0; i1 < next_ext[1]; ++i1)
          for (int i0 = 0; i0 < next_ext[0]; ++i0) {
            int idx[3] = {i0, i1, i2};
            const int x = idx[a];
            double best = 0.0;
            for (int c = std::max(0, x - s + 1); c <= std::min(x, C - 1); ++c) {
              idx[a] = c;
              best = std::max(best, cur[idx[0] * st[0] + idx[1] * st[1] + idx[2] * st[2]]);
            }
            nxt[i0 * nst[0] + i1 * nst[1] + i2 * nst[2]] = best;
          }
      cur.swap(nxt);
      ext = next_ext;
    }
    for (Index k = 0; k < total; ++k) M[k] = std::max(M[k], cur[k]);
  }
  // single nodes exactly, free of prefix-sum roundoff
  if (std::find(sizes.begin(), sizes.end(), 1) != sizes.end())
    M = M.cwiseMax(values.cwiseAbs());
  return M;
}

}  // namespace mslab
