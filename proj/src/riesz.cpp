#include <mslab/riesz.hpp>
#include <mslab/weights.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace mslab {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct KindName {
  TransformKind kind;
  const char* name;
  bool uses_j, uses_k, uses_y;
};

constexpr KindName kKinds[] = {
    {TransformKind::L_inv_sqrt, "LH-1/2", true, false, false},
    {TransformKind::V_half_inv_sqrt, "V1/2H-1/2", false, false, false},
    {TransformKind::H0_half_inv_sqrt, "H01/2H-1/2", false, false, false},
    {TransformKind::LL_inv, "LLH-1", true, true, false},
    {TransformKind::V_half_L_inv, "V1/2LH-1", true, false, false},
    {TransformKind::V_inv, "VH-1", false, false, false},
    {TransformKind::H0_inv, "H0H-1", false, false, false},
    {TransformKind::L_inv_Lstar, "LH-1L*", true, true, false},
    {TransformKind::L_inv_V_half, "LH-1V1/2", true, false, false},
    {TransformKind::V_half_inv_V_half, "V1/2H-1V1/2", false, false, false},
    {TransformKind::V_half_inv_Lstar, "V1/2H-1L*", false, true, false},
    {TransformKind::imaginary_power, "Hiy", false, false, true},
};

const KindName& kind_name(TransformKind k) {
  for (const auto& e : kKinds)
    if (e.kind == k) return e;
  throw InputError("unknown transform kind");
}

// Rows of the stacked forward differences D_0; D_1; ... (node-located).
MatrixXcd stacked_D(const HOperator& H, const MatrixXcd& right) {
  const int d = H.grid().dim();
  const Index n = H.size();
  MatrixXcd out(d * n, right.cols());
  for (int a = 0; a < d; ++a) out.middleRows(a * n, n) = H.D(a) * right;
  return out;
}

// Left factor L_j (edges) or the stacked D (j = -1).
MatrixXcd left_L(const HOperator& H, int j, const MatrixXcd& right, int& groups) {
  if (j >= 0) {
    groups = 1;
    return H.L(j) * right;
  }
  groups = H.grid().dim();
  return stacked_D(H, right);
}

// Left factor D_j (node-located) or stacked D.
MatrixXcd left_D(const HOperator& H, int j, const MatrixXcd& right, int& groups) {
  if (j >= 0) {
    groups = 1;
    return H.D(j) * right;
  }
  groups = H.grid().dim();
  return stacked_D(H, right);
}

// M · L_k* (edges of direction k) or M · [D_0* D_1* ...].
MatrixXcd right_Lstar(const HOperator& H, int k, const MatrixXcd& left, int& groups) {
  if (k >= 0) {
    groups = 1;
    const SparseMatrixXcd Lk_adj = H.L(k).adjoint();
    return left * Lk_adj;
  }
  const int d = H.grid().dim();
  const Index n = H.size();
  groups = d;
  MatrixXcd out(left.rows(), d * n);
  for (int a = 0; a < d; ++a) {
    const SparseMatrixXcd Da_adj = H.D(a).adjoint();
    out.middleCols(a * n, n) = left * Da_adj;
  }
  return out;
}

VectorXd group_magnitude(const VectorXcd& v, int groups) {
  const Index m = v.size() / groups;
  VectorXd mag = VectorXd::Zero(m);
  for (int c = 0; c < groups; ++c) mag += v.segment(c * m, m).cwiseAbs2();
  return mag.cwiseSqrt();
}

// Dual vector: ⟨dual, v⟩ = ‖v‖_p and ‖dual‖_{p'} = 1.
VectorXcd dual_vector(const VectorXcd& v, double p, int groups) {
  const Index m = v.size() / groups;
  const VectorXd mag = group_magnitude(v, groups);
  VectorXcd out = VectorXcd::Zero(v.size());
  if (std::isinf(p)) {
    Index arg = 0;
    mag.maxCoeff(&arg);
    if (mag[arg] == 0.0) return out;
    for (int c = 0; c < groups; ++c) out[c * m + arg] = v[c * m + arg] / mag[arg];
    return out;
  }
  const double norm = grouped_norm(v, p, groups);
  if (norm == 0.0) return out;
  for (int c = 0; c < groups; ++c)
    for (Index x = 0; x < m; ++x) {
      if (mag[x] == 0.0) continue;
      const double scale = p == 1.0 ? 1.0 / mag[x] : std::pow(mag[x] / norm, p - 1.0) / mag[x];
      out[c * m + x] = v[c * m + x] * scale;
    }
  return out;
}

double conjugate_exponent(double p) {
  if (p == 1.0) return kInfinity;
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

PNormEstimate exact_norm(const MatrixXcd& T, double p) {
  PNormEstimate e;
  e.exact = true;
  e.method = "exact";
  if (T.size() == 0) return e;
  if (p == 1.0) e.value = T.cwiseAbs().colwise().sum().maxCoeff();
  else e.value = T.cwiseAbs().rowwise().sum().maxCoeff();
  return e;
}

PNormEstimate dual_power_one_sided(const MatrixXcd& T, double p, const PNormOptions& opt) {
  PNormEstimate best;
  best.method = "dual_power";
  best.converged = false;
  const Index n = T.cols();
  if (n == 0 || T.rows() == 0) {
    best.converged = true;
    return best;
  }
  const double pd = conjugate_exponent(p);

  std::vector<VectorXcd> starts;
  starts.push_back(VectorXcd::Ones(n));
  {
    // unit vector on the column of largest output norm
    Index arg = 0;
    double m = -1.0;
    for (Index c = 0; c < n; ++c) {
      const double v = grouped_norm(T.col(c), p, opt.out_groups);
      if (v > m) {
        m = v;
        arg = c;
      }
    }
    VectorXcd e = VectorXcd::Zero(n);
    e[arg] = 1.0;
    starts.push_back(e);
  }
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  for (int s = 2; s < opt.starts; ++s) {
    VectorXcd v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    starts.push_back(v);
  }

  for (const VectorXcd& x0 : starts) {
    VectorXcd x = x0 / grouped_norm(x0, p, opt.in_groups);
    double prev = 0.0, prev_change = 0.0;
    bool converged = false;
    int it = 0;
    std::vector<double> transcript;
    double est = 0.0;
    VectorXcd arg = x;
    for (; it < opt.max_iterations; ++it) {
      const VectorXcd y = T * x;
      est = grouped_norm(y, p, opt.out_groups);
      transcript.push_back(est);
      arg = x;
      if (est == 0.0) {
        converged = true;
        break;
      }
      // stop once the change, and the geometric tail it predicts, is below tolerance
      const double change = std::abs(est - prev);
      if (it > 1 && change <= opt.tolerance * est) {
        const double rho = prev_change > 0.0 ? change / prev_change : 0.0;
        if (rho < 1.0 && change * rho / (1.0 - rho) <= opt.tolerance * est) {
          converged = true;
          break;
        }
      }
      if (it > 0) prev_change = change;
      const VectorXcd z = T.adjoint() * dual_vector(y, p, opt.out_groups);
      const double zn = grouped_norm(z, pd, opt.in_groups);
      if (it > 0 && zn <= x.dot(z).real() * (1.0 + 1e-14)) {
        converged = true;
        break;
      }
      x = dual_vector(z, pd, opt.in_groups);
      prev = est;
    }
    if (est > best.value || best.transcript.empty()) {
      best.value = std::max(best.value, est);
      best.iterations = it + 1;
      best.converged = converged;
      best.transcript = transcript;
      best.maximizer = arg;
    } else if (est == best.value) {
      best.converged = best.converged || converged;
    }
  }
  return best;
}

// ‖T‖_p = ‖T*‖_{p'}: both iterations give valid lower bounds.
PNormEstimate dual_power(const MatrixXcd& T, double p, const PNormOptions& opt) {
  PNormEstimate a = dual_power_one_sided(T, p, opt);
  if (!opt.two_sided) return a;
  PNormOptions adj = opt;
  std::swap(adj.in_groups, adj.out_groups);
  const MatrixXcd Ta = T.adjoint();
  PNormEstimate b = dual_power_one_sided(Ta, conjugate_exponent(p), adj);
  if (b.value > a.value) {
    a.value = b.value;
    a.converged = b.converged;
    a.transcript = b.transcript;
    a.maximizer = dual_vector(Ta * b.maximizer, conjugate_exponent(p), opt.in_groups);
  }
  a.iterations += b.iterations;
  return a;
}

// p = 2: Golub-Kahan bidiagonalization with full reorthogonalization. The
// Ritz value is attained by V_k y, so it is a lower bound like the p ≠ 2 path.
PNormEstimate lanczos_two_norm(const MatrixXcd& T, const PNormOptions& opt) {
  PNormEstimate e;
  e.method = "lanczos";
  e.converged = false;
  const Index n = T.cols(), m = T.rows();
  if (n == 0 || m == 0) {
    e.converged = true;
    return e;
  }
  const Index kmax = std::min<Index>({n, m, Index(opt.max_iterations)});
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  MatrixXcd Vb(n, kmax), Ub(m, kmax);
  std::vector<double> alpha, beta;
  VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();
  Vb.col(0) = v;
  VectorXcd u = T * v;
  alpha.push_back(u.norm());
  if (alpha[0] == 0.0) {
    e.converged = true;
    return e;
  }
  Ub.col(0) = u / alpha[0];
  double prev = 0.0;
  Eigen::VectorXd y;
  Index k = 1;
  for (;; ++k) {
    MatrixXd B = MatrixXd::Zero(k, k);
    for (Index i = 0; i < k; ++i) {
      B(i, i) = alpha[i];
      if (i + 1 < k) B(i, i + 1) = beta[i];
    }
    Eigen::JacobiSVD<MatrixXd> svd(B, Eigen::ComputeFullV);
    const double sigma = svd.singularValues()(0);
    y = svd.matrixV().col(0);
    e.transcript.push_back(sigma);
    if (k > 2 && std::abs(sigma - prev) <= 1e-13 * sigma) {
      e.converged = true;
      break;
    }
    prev = sigma;
    if (k == kmax) {
      e.converged = k == std::min(n, m);
      break;
    }
    VectorXcd w = T.adjoint() * Ub.col(k - 1) - alpha[k - 1] * Vb.col(k - 1);
    for (int pass = 0; pass < 2; ++pass) w -= Vb.leftCols(k) * (Vb.leftCols(k).adjoint() * w);
    const double b = w.norm();
    if (b <= 1e-14 * sigma) {
      e.converged = true;
      break;
    }
    beta.push_back(b);
    Vb.col(k) = w / b;
    VectorXcd z = T * Vb.col(k) - b * Ub.col(k - 1);
    for (int pass = 0; pass < 2; ++pass) z -= Ub.leftCols(k) * (Ub.leftCols(k).adjoint() * z);
    const double a = z.norm();
    alpha.push_back(a);
    Ub.col(k) = a > 0.0 ? VectorXcd(z / a) : VectorXcd(VectorXcd::Zero(m));
    if (a <= 1e-14 * sigma) {
      ++k;
      MatrixXd B2 = MatrixXd::Zero(k, k);
      for (Index i = 0; i < k; ++i) {
        B2(i, i) = alpha[i];
        if (i + 1 < k) B2(i, i + 1) = beta[i];
      }
      Eigen::JacobiSVD<MatrixXd> svd2(B2, Eigen::ComputeFullV);
      y = svd2.matrixV().col(0);
      e.converged = true;
      break;
    }
  }
  e.iterations = int(k);
  const VectorXcd x = Vb.leftCols(y.size()) * y.cast<Complex>();
  e.maximizer = x;
  e.value = (T * x).norm() / x.norm();
  return e;
}

PNormEstimate random_probe(const MatrixXcd& T, double p, const PNormOptions& opt) {
  PNormEstimate e;
  e.method = "random_probe";
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  const Index n = T.cols();
  for (int s = 0; s < opt.probes; ++s) {
    VectorXcd v(n);
    for (Index i = 0; i < n; ++i) v[i] = Complex(normal(rng), normal(rng));
    const double r = grouped_norm(T * v, p, opt.out_groups) / grouped_norm(v, p, opt.in_groups);
    if (r > e.value) {
      e.value = r;
      e.maximizer = v;
    }
  }
  e.iterations = opt.probes;
  return e;
}

double lp_of(const VectorXd& v, double p) {
  if (std::isinf(p)) return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

}  // namespace

std::string TransformSpec::id() const {
  const KindName& e = kind_name(kind);
  std::ostringstream out;
  out << e.name;
  std::vector<std::string> params;
  if (e.uses_j) params.push_back("j=" + std::to_string(j));
  if (e.uses_k) params.push_back("k=" + std::to_string(k));
  if (e.uses_y) {
    std::ostringstream ys;
    ys << "y=" << y;
    params.push_back(ys.str());
  }
  for (size_t i = 0; i < params.size(); ++i) out << (i ? "," : ":") << params[i];
  return out.str();
}

TransformSpec parse_transform(const std::string& text) {
  const auto colon = text.find(':');
  const std::string base = text.substr(0, colon);
  TransformSpec s;
  bool found = false;
  for (const auto& e : kKinds)
    if (base == e.name) {
      s.kind = e.kind;
      found = true;
    }
  require(found, "unknown transform '" + base + "'");
  if (colon != std::string::npos) {
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      const auto eq = item.find('=');
      require(eq != std::string::npos, "transform parameter '" + item + "' is not key=value");
      const std::string key = item.substr(0, eq);
      const std::string val = item.substr(eq + 1);
      try {
        if (key == "j") s.j = std::stoi(val);
        else if (key == "k") s.k = std::stoi(val);
        else if (key == "y") s.y = std::stod(val);
        else throw InputError("unknown transform parameter '" + key + "'");
      } catch (const std::logic_error& ex) {
        if (dynamic_cast<const InputError*>(&ex)) throw;
        throw InputError("transform parameter '" + item + "' is not numeric");
      }
    }
  }
  return s;
}

Transform transform_matrix(const TransformContext& ctx, const TransformSpec& spec) {
  require(ctx.H && ctx.cache, "transform_matrix: operator and spectral cache required");
  const HOperator& H = *ctx.H;
  const SpectralCache& S = *ctx.cache;
  require(S.vectors.rows() == H.size(), "transform_matrix: cache does not match operator");
  const int d = H.grid().dim();
  const KindName& e = kind_name(spec.kind);
  if (e.uses_j) require(spec.j >= -1 && spec.j < d, "transform_matrix: index j outside the dimension");
  if (e.uses_k) require(spec.k >= -1 && spec.k < d, "transform_matrix: index k outside the dimension");
  if (spec.kind == TransformKind::LL_inv)
    require(spec.j >= 0 && spec.k >= 0, "transform_matrix: L_sL_kH^{-1} needs explicit indices");

  Transform T;
  T.spec = spec;
  T.shift = ctx.lambda0 < 0.0 ? S.default_shift() : ctx.lambda0;
  const double l0 = T.shift;
  const VectorXd vh = H.potential().cwiseSqrt();

  switch (spec.kind) {
    case TransformKind::L_inv_sqrt:
      T.matrix = left_L(H, spec.j, function_matrix(S, Symbol::inv_sqrt(l0)), T.out_groups);
      break;
    case TransformKind::V_half_inv_sqrt:
      T.matrix = vh.asDiagonal() * function_matrix(S, Symbol::inv_sqrt(l0));
      break;
    case TransformKind::H0_half_inv_sqrt:
      require(ctx.cache0 != nullptr, "transform_matrix: H0^{1/2} needs the spectral cache of H0");
      T.matrix = function_matrix(*ctx.cache0, Symbol::sqrt()) * function_matrix(S, Symbol::inv_sqrt(l0));
      break;
    case TransformKind::LL_inv: {
      const MatrixXcd R = function_matrix(S, Symbol::resolvent(l0));
      T.matrix = H.D(spec.j) * (H.D(spec.k) * R);
      break;
    }
    case TransformKind::V_half_L_inv: {
      const MatrixXcd R = function_matrix(S, Symbol::resolvent(l0));
      T.matrix = left_D(H, spec.j, R, T.out_groups);
      const Index n = H.size();
      for (int c = 0; c < T.out_groups; ++c) T.matrix.middleRows(c * n, n) = vh.asDiagonal() * T.matrix.middleRows(c * n, n);
      break;
    }
    case TransformKind::V_inv:
      T.matrix = H.potential().asDiagonal() * function_matrix(S, Symbol::resolvent(l0));
      break;
    case TransformKind::H0_inv: {
      const SparseMatrixXcd H0 = magnetic_part(H).matrix();
      T.matrix = H0 * function_matrix(S, Symbol::resolvent(l0));
      break;
    }
    case TransformKind::L_inv_Lstar: {
      const MatrixXcd R = function_matrix(S, Symbol::resolvent(l0));
      const MatrixXcd left = spec.j >= 0 ? MatrixXcd(H.L(spec.j) * R) : stacked_D(H, R);
      T.out_groups = spec.j >= 0 ? 1 : d;
      T.matrix = right_Lstar(H, spec.k, left, T.in_groups);
      break;
    }
    case TransformKind::L_inv_V_half:
      T.matrix = left_L(H, spec.j, function_matrix(S, Symbol::resolvent(l0)) * vh.asDiagonal(), T.out_groups);
      break;
    case TransformKind::V_half_inv_V_half:
      T.matrix = vh.asDiagonal() * function_matrix(S, Symbol::resolvent(l0)) * vh.asDiagonal();
      break;
    case TransformKind::V_half_inv_Lstar:
      T.matrix = right_Lstar(H, spec.k, vh.asDiagonal() * function_matrix(S, Symbol::resolvent(l0)), T.in_groups);
      break;
    case TransformKind::imaginary_power:
      T.matrix = function_matrix(S, Symbol::imaginary_power(spec.y));
      break;
  }
  return T;
}

double grouped_norm(const VectorXcd& v, double p, int groups) {
  require(groups >= 1 && v.size() % groups == 0, "grouped_norm: size is not a multiple of the group count");
  return lp_of(group_magnitude(v, groups), p);
}

PNormEstimate pnorm_estimate(const MatrixXcd& T, double p, const PNormOptions& opt) {
  require(p >= 1.0, "pnorm_estimate: p must be at least 1");
  require(opt.out_groups >= 1 && T.rows() % opt.out_groups == 0 && opt.in_groups >= 1 &&
              T.cols() % opt.in_groups == 0,
          "pnorm_estimate: group counts do not divide the matrix shape");
  const bool exact_ok =
      opt.in_groups == 1 && (p == 1.0 ? true : (std::isinf(p) && opt.out_groups == 1));
  PNormMethod m = opt.method;
  if (m == PNormMethod::automatic) m = exact_ok ? PNormMethod::exact : PNormMethod::dual_power;
  switch (m) {
    case PNormMethod::exact:
      require(exact_ok, "pnorm_estimate: exact method only for p in {1, inf} on ungrouped input");
      if (opt.out_groups == 1) return exact_norm(T, p);
      {
        // p = 1 with grouped output: extreme points of the ℓ¹ ball are unit vectors
        PNormEstimate e;
        e.exact = true;
        e.method = "exact";
        for (Index c = 0; c < T.cols(); ++c) e.value = std::max(e.value, grouped_norm(T.col(c), 1.0, opt.out_groups));
        return e;
      }
    case PNormMethod::random_probe:
      return random_probe(T, p, opt);
    default:
      if (p == 2.0) return lanczos_two_norm(T, opt);
      return dual_power(T, p, opt);
  }
}

double battery_lower_bound(const MatrixXcd& T, double p, const std::vector<VectorXcd>& battery,
                           int out_groups, int in_groups) {
  double best = 0.0;
  for (const auto& f : battery) {
    require(f.size() == T.cols(), "battery_lower_bound: member does not match the matrix");
    const double d = grouped_norm(f, p, in_groups);
    if (d > 0.0) best = std::max(best, grouped_norm(T * f, p, out_groups) / d);
  }
  return best;
}

double spectral_norm(const MatrixXcd& T) {
  if (T.size() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXcd> svd(T);
  return svd.singularValues()(0);
}

Battery make_battery(const Grid& g, std::uint64_t seed) {
  Battery b;
  b.version = "battery-v1";
  const Index n = g.nodes();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int r = 0; r < 3; ++r) {
    Field f(n);
    for (Index k = 0; k < n; ++k) f[k] = Complex(normal(rng), normal(rng));
    b.names.push_back("random:" + std::to_string(r));
    b.members.push_back(f);
  }
  Eigen::Vector3d mid = Eigen::Vector3d::Zero();
  for (int a = 0; a < g.dim(); ++a) mid[a] = 0.5 * (g.points() - 1);
  const Point c = g.coord(mid);
  const double side = g.side_length();
  for (double frac : {1.0 / 16, 1.0 / 8, 1.0 / 4}) {
    const double w = frac * side;
    Field f(n);
    for (Index k = 0; k < n; ++k) f[k] = std::exp(-(g.coord(k) - c).squaredNorm() / (2 * w * w));
    std::ostringstream name;
    name << "bump:" << frac;
    b.names.push_back(name.str());
    b.members.push_back(f);
  }
  for (int m : {1, 4, 16}) {
    const int mm = std::max(1, std::min(m, g.points() / 4));
    const double kk = 2.0 * std::numbers::pi * mm / side;
    Field f(n);
    for (Index k = 0; k < n; ++k) {
      const Point x = g.coord(k);
      double phase = 0.0;
      for (int a = 0; a < g.dim(); ++a) phase += kk * x[a];
      f[k] = std::polar(1.0, phase);
    }
    b.names.push_back("wave:" + std::to_string(mm));
    b.members.push_back(f);
  }
  const int N = g.points();
  const std::vector<MultiIndex> spots = {{N / 2, N / 2, N / 2}, {N / 4, N / 3, N / 2}, {1, 1, 1}};
  for (size_t s = 0; s < spots.size(); ++s) {
    MultiIndex m = spots[s];
    for (int a = g.dim(); a < 3; ++a) m[a] = 0;
    Field f = Field::Zero(n);
    f[g.index(m)] = 1.0;
    b.names.push_back("delta:" + std::to_string(s));
    b.members.push_back(f);
  }
  return b;
}

Battery restrict_outside(const Grid& g, const Battery& b, const Cube& q) {
  Battery out = b;
  out.version = b.version + "+outside";
  const auto inside = cube_nodes(g, q);
  for (auto& f : out.members)
    for (Index k : inside) f[k] = 0.0;
  return out;
}


std::vector<TheoremRange> predicted_ranges(double q, int n) {
  require(q > 1.0, "predicted_ranges: q must exceed 1");
  const double qs = sobolev_conjugate(q, n);
  const double t18 = q < n ? 2.0 * q * n / (3.0 * n - 2.0 * q) : 2.0 * q;
  return {
      {"riesz", "LH-1/2", 1.0, qs, true},
      {"reverse_riesz", "reverse", 1.0, kInfinity, true},
      {"second_order_riesz", "LLH-1", 1.0, q, false},
      {"potential_gradient", "V1/2LH-1", 1.0, t18, true},
      {"potential_resolvent", "VH-1", 1.0, q, true},
      {"magnetic_resolvent", "H0H-1", 1.0, q, true},
      {"potential_square_root", "V1/2H-1/2", 1.0, 2.0 * q, false},
      {"magnetic_square_root", "H01/2H-1/2", 1.0, 2.0 * q, false},
  };
}

double reverse_ratio(const HOperator& H, const SpectralCache& S, const Battery& b, double p) {
  double best = 0.0;
  const VectorXd vh = H.potential().cwiseSqrt();
  for (const Field& f : b.members) {
    const double num = lp_of(apply_function(S, Symbol::sqrt(), f).cwiseAbs(), p);
    const double den = lp_of(gradient_magnitude(H, f), p) + lp_of(vh.cwiseProduct(f.cwiseAbs()), p);
    if (den > 0.0) best = std::max(best, num / den);
  }
  return best;
}

double weak_type_check(const HOperator& H, const SpectralCache& S, const Battery& b,
                       const std::vector<double>& alphas, WeakTypeMode mode) {
  require(!b.members.empty(), "weak_type_check: empty battery");
  for (double a : alphas) require(a > 0.0, "weak_type_check: alpha must be positive");
  const VectorXd vh = H.potential().cwiseSqrt();
  double worst = 0.0;
  for (const Field& f : b.members) {
    const VectorXd root = apply_function(S, Symbol::sqrt(), f).cwiseAbs();
    const VectorXd grad = gradient_magnitude(H, f);
    VectorXd Tf;
    double rhs = 0.0;
    if (mode == WeakTypeMode::gradient) {
      Tf = grad;
      rhs = root.sum();
    } else {
      Tf = root;
      rhs = grad.sum() + vh.cwiseProduct(f.cwiseAbs()).sum();
    }
    // values below roundoff of the operator scale count as zero
    const double floor = 1e-10 * std::sqrt(S.max_value()) * f.cwiseAbs().maxCoeff();
    const double top = Tf.size() ? Tf.maxCoeff() : 0.0;
    if (top <= floor) continue;
    if (rhs <= floor) return kInfinity;
    std::vector<double> levels = alphas;
    if (levels.empty())
      for (int i = 0; i < 24; ++i) levels.push_back(top * std::pow(1e-3, 1.0 - i / 23.0));
    for (double a : levels) {
      const double count = double((Tf.array() > a).count());
      worst = std::max(worst, a * count / rhs);
    }
  }
  return worst;
}

L1Ratios l1_maximal_check(const HOperator& H, const Field& f, double lambda0) {
  require(f.size() == H.size(), "l1_maximal_check: source does not match operator");
  const double mass = f.cwiseAbs().sum();
  require(mass > 0.0, "l1_maximal_check: source vanishes");
  const Field u = solve_shifted(H, lambda0, f);
  L1Ratios r;
  r.shift = lambda0;
  r.potential = (H.potential().array() + lambda0).matrix().cwiseProduct(u.cwiseAbs()).sum() / mass;
  const SparseMatrixXcd H0 = magnetic_part(H).matrix();
  r.free = Field(H0 * u).cwiseAbs().sum() / mass;
  return r;
}

ShenProbe shen_hypothesis_probe(const Grid& g, const Transform& T,
                                const std::function<VectorXd(const VectorXcd&)>& S, const Cube& q,
                                const std::vector<VectorXcd>& battery, double p0, double q0,
                                double alpha1, double alpha2, const std::vector<std::string>& names) {
  require(!battery.empty(), "shen_hypothesis_probe: empty battery");
  require(p0 >= 1.0 && q0 >= 1.0, "shen_hypothesis_probe: exponents must be at least 1");
  require(alpha2 >= alpha1 && alpha1 >= 1.0, "shen_hypothesis_probe: need 1 <= alpha1 <= alpha2");
  const Index n = g.nodes();
  require(T.matrix.rows() == Index(T.out_groups) * n,
          "shen_hypothesis_probe: transform output must be node-valued");
  require(T.matrix.cols() == Index(T.in_groups) * n, "shen_hypothesis_probe: transform input must be node-valued");
  const auto qn = cube_nodes(g, q);
  const auto q1 = cube_nodes(g, q.dilate(alpha1));
  const auto q2 = cube_nodes(g, q.dilate(alpha2));
  require(!qn.empty(), "shen_hypothesis_probe: cube does not meet the grid");

  ShenProbe out;
  for (size_t b = 0; b < battery.size(); ++b) {
    const VectorXcd& f = battery[b];
    require(f.size() == T.matrix.cols(), "shen_hypothesis_probe: member does not match the transform");
    for (Index k : q2)
      for (int c = 0; c < T.in_groups; ++c)
        if (f[c * n + k] != Complex(0.0))
          throw InputError("shen_hypothesis_probe: battery member does not vanish on the enlarged cube");
    const VectorXd Tf = group_magnitude(T.matrix * f, T.out_groups);
    auto mean_pow = [&](const std::vector<Index>& nodes, double s) {
      double acc = 0.0;
      for (Index k : nodes) acc += std::pow(Tf[k], s);
      return std::pow(acc / double(nodes.size()), 1.0 / s);
    };
    const double lhs = mean_pow(qn, q0);
    const double avg = mean_pow(q1, p0);
    double smin = 0.0;
    if (S) {
      const VectorXd s = S(f);
      smin = kInfinity;
      for (Index k : qn) smin = std::min(smin, s[k]);
    }
    const double rhs = avg + smin;
    double c = 0.0;
    if (lhs > 0.0) c = rhs > 0.0 ? lhs / rhs : kInfinity;
    if (c > out.C) {
      out.C = c;
      out.worst_lhs = lhs;
      out.worst_member = b < names.size() ? names[b] : std::to_string(b);
    }
  }
  return out;
}

std::function<VectorXd(const VectorXcd&)> maximal_square(const Grid& g, const Transform& inner) {
  require(inner.matrix.rows() == Index(inner.out_groups) * g.nodes(),
          "maximal_square: inner transform must be node-valued");
  return [g, inner](const VectorXcd& f) {
    const VectorXd m = group_magnitude(inner.matrix * f, inner.out_groups);
    return maximal_function(g, m.cwiseAbs2()).cwiseSqrt().eval();
  };
}

std::vector<ImaginaryPowerRow> imaginary_power_profile(const TransformContext& ctx,
                                                       const std::vector<double>& ys,
                                                       const std::vector<double>& ps,
                                                       const PNormOptions& opt) {
  std::vector<ImaginaryPowerRow> rows;
  for (double y : ys) {
    const Transform T = transform_matrix(ctx, {TransformKind::imaginary_power, 0, 0, y});
    for (double p : ps) rows.push_back({y, p, pnorm_estimate(T.matrix, p, opt).value});
  }
  return rows;
}

SweepReport theorem_sweep(const SweepConfig& cfg) {
  require(!cfg.p_list.empty(), "theorem_sweep: empty p list");
  require(!cfg.resolutions.empty() && !cfg.domains.empty(), "theorem_sweep: empty resolution or domain axis");
  for (double p : cfg.p_list) require(p >= 1.0, "theorem_sweep: p must be at least 1");
  const Family fam = make_family(cfg.family);
  require(cfg.dim == 2 || cfg.family.c == 0.0, "theorem_sweep: B = cV families are planar (2D only)");

  SweepReport rep;
  rep.family = fam.name;
  rep.rh_q = fam.rh_q;
  if (fam.rh_q > 1.0) rep.ranges = predicted_ranges(fam.rh_q, cfg.dim);

  std::vector<int> res = cfg.resolutions;
  std::vector<double> dom = cfg.domains;
  std::sort(res.begin(), res.end());
  std::sort(dom.begin(), dom.end());
  res.erase(std::unique(res.begin(), res.end()), res.end());
  dom.erase(std::unique(dom.begin(), dom.end()), dom.end());

  bool needs_h0 = false;
  for (const auto& t : cfg.transforms) needs_h0 = needs_h0 || t.kind == TransformKind::H0_half_inv_sqrt;

  std::map<std::tuple<std::string, double, int, double>, double> table;
  for (double D : dom)
    for (int N : res) {
      const Grid g = centered_grid(cfg.dim, N, D, Boundary::dirichlet);
      const WeightField V = fam.sample(g);
      const MagneticField B = fam.field(cfg.dim);
      try {
        const ControlReport c = control_condition_check(g, B, V, full_levels(g));
        if (!std::isfinite(c.C1) || !std::isfinite(c.C2))
          throw InputError("non-finite control constants");
        rep.control_C1 = std::max(rep.control_C1, c.C1);
        rep.control_C2 = std::max(rep.control_C2, c.C2);
      } catch (const InputError& e) {
        if (!cfg.force)
          throw InputError(std::string("theorem_sweep: family violates the control condition (") + e.what() + ")");
      }
      const EdgePhaseField theta = cfg.family.c == 0.0 ? EdgePhaseField::zero(g) : landau_phases(g, B);
      const HOperator H = assemble(g, theta, V);
      const SpectralCache S = spectral_decompose(H);
      std::optional<SpectralCache> S0;
      if (needs_h0) S0 = spectral_decompose(magnetic_part(H));
      TransformContext ctx{&H, &S, S0 ? &*S0 : nullptr, -1.0};

      for (const auto& spec : cfg.transforms) {
        const Transform T = transform_matrix(ctx, spec);
        for (double p : cfg.p_list) {
          PNormOptions opt = cfg.pnorm;
          opt.out_groups = T.out_groups;
          opt.in_groups = T.in_groups;
          const PNormEstimate est = pnorm_estimate(T.matrix, p, opt);
          rep.rows.push_back({spec.id(), p, N, D, est.value, est.method, est.iterations, est.converged});
          table[{spec.id(), p, N, D}] = est.value;
          const bool contract = spec.kind == TransformKind::V_half_inv_sqrt ||
                                (spec.kind == TransformKind::L_inv_sqrt && spec.j >= 0);
          if (contract && p == 2.0 && est.value > 1.0 + 1e-8) rep.p2_contract_ok = false;
        }
      }
      if (cfg.reverse) {
        const Battery b = make_battery(g, cfg.seed);
        rep.battery_version = b.version;
        for (double p : cfg.p_list) {
          const double r = reverse_ratio(H, S, b, p);
          rep.rows.push_back({kReverseId, p, N, D, r, "battery", int(b.members.size()), true});
          table[{kReverseId, p, N, D}] = r;
        }
      }
    }

  std::vector<std::string> ids;
  for (const auto& t : cfg.transforms) ids.push_back(t.id());
  if (cfg.reverse) ids.push_back(kReverseId);
  const int Nf = res.back();
  const double Df = dom.back();
  for (const auto& id : ids)
    for (double p : cfg.p_list) {
      SweepFlag f;
      f.transform = id;
      f.p = p;
      const double top = table[{id, p, Nf, Df}];
      auto ratio = [](double a, double b) { return b > 0.0 ? a / b : (a > 0.0 ? kInfinity : 1.0); };
      if (res.size() > 1) f.resolution_ratio = ratio(top, table[{id, p, res[res.size() - 2], Df}]);
      if (dom.size() > 1) f.domain_ratio = ratio(top, table[{id, p, Nf, dom[dom.size() - 2]}]);
      auto sym = [](double r) { return r >= 1.0 ? r : 1.0 / r; };
      f.consistent = sym(f.resolution_ratio) <= 1.2 && sym(f.domain_ratio) <= 1.2;
      f.growth = f.resolution_ratio >= 2.0 || f.domain_ratio >= 2.0;
      rep.flags.push_back(f);
    }
  return rep;
}

}  // namespace mslab
