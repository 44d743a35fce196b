#include <mslab/experiment.hpp>

#include <mslab/czd.hpp>
#include <mslab/field_io.hpp>
#include <mslab/gauge.hpp>
#include <mslab/operators.hpp>
#include <mslab/riesz.hpp>
#include <mslab/solutions.hpp>
#include <mslab/weights.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mslab {

namespace {

using nlohmann::json;

json num(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(field + ": '" + v + "' is not a number");
  }
}

long to_long(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(field + ": '" + v + "' is not an integer");
  }
}

template <typename T>
std::vector<T> numbers_of(const std::string& field, const json& j) {
  std::vector<T> out;
  if (j.is_string()) {
    for (const auto& s : split(j.get<std::string>(), ','))
      out.push_back(static_cast<T>(std::is_integral_v<T> ? to_long(field, s) : to_double(field, s)));
    return out;
  }
  if (j.is_number()) return {j.get<T>()};
  if (!j.is_array()) throw ConfigError(field + ": expected a list");
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(field + ": list entries must be numbers");
    out.push_back(v.get<T>());
  }
  return out;
}

double number_of(const std::string& field, const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return to_double(field, j.get<std::string>());
  throw ConfigError(field + ": expected a number");
}

std::string string_of(const std::string& field, const json& j) {
  if (!j.is_string()) throw ConfigError(field + ": expected a string");
  return j.get<std::string>();
}

FamilySpec family_of(const json& j) {
  try {
    if (j.is_string()) return parse_family(j.get<std::string>());
    if (!j.is_object()) throw ConfigError("family: expected a string or an object");
    FamilySpec s;
    for (const auto& [k, v] : j.items()) {
      if (k == "potential") s.potential = string_of("family.potential", v);
      else if (k == "gamma") s.gamma = number_of("family.gamma", v);
      else if (k == "eps") s.eps = number_of("family.eps", v);
      else if (k == "c0") s.c0 = number_of("family.c0", v);
      else if (k == "c") s.c = number_of("family.c", v);
      else throw ConfigError("family." + k + ": unknown field");
    }
    make_family(s);
    return s;
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(std::string("family: ") + e.what());
  }
}

Grid task_grid(const ExperimentConfig& c) {
  return centered_grid(c.dim, c.resolutions.front(), c.domains.front(), Boundary::dirichlet);
}

EdgePhaseField family_phases(const Grid& g, const Family& fam) {
  return fam.spec.c == 0.0 ? EdgePhaseField::zero(g) : landau_phases(g, fam.field(g.dim()));
}

Invariant check(const std::string& name, double value, double limit) {
  return {name, value, limit, std::isfinite(value) && value <= limit};
}

std::string ends(const std::string& s, std::size_t n) { return s.size() >= n ? s.substr(s.size() - n) : ""; }

// Field from a named profile or a file; JSON files carry their own grid.
std::pair<Grid, Field> load_field(const std::string& what, const std::string& spec, const Grid& g) {
  if (ends(spec, 5) == ".json") {
    std::ifstream in(spec);
    if (!in) throw ConfigError(what + ": cannot open '" + spec + "'");
    return field_from_json(json::parse(in));
  }
  if (ends(spec, 4) == ".csv") {
    std::ifstream in(spec);
    if (!in) throw ConfigError(what + ": cannot open '" + spec + "'");
    return {g, read_field_csv(in, g)};
  }
  Field f(g.nodes());
  const double h = g.spacing(), side = g.side_length();
  if (spec == "radial") {
    for (Index k = 0; k < g.nodes(); ++k) f[k] = std::pow(g.coord(k).squaredNorm() + h * h, -0.75);
  } else if (spec == "gaussian") {
    Point c = Point::Zero();
    c[0] = side / 8.0;
    c[1] = -side / 16.0;
    const double s2 = std::pow(side / 16.0, 2);
    for (Index k = 0; k < g.nodes(); ++k) f[k] = std::exp(-(g.coord(k) - c).squaredNorm() / (2.0 * s2));
  } else {
    throw ConfigError(what + ": unknown profile '" + spec + "'");
  }
  return {g, f};
}

// ---------------------------------------------------------------- tasks

Report run_sweep(const ExperimentConfig& c) {
  SweepConfig sc;
  sc.family = c.family;
  for (const auto& t : c.transforms) {
    try {
      sc.transforms.push_back(parse_transform(t));
    } catch (const InputError& e) {
      throw ConfigError(std::string("transforms: ") + e.what());
    }
  }
  sc.p_list = c.p_list;
  sc.resolutions = c.resolutions;
  sc.domains = c.domains;
  sc.dim = c.dim;
  sc.seed = c.seed;
  const SweepReport rep = theorem_sweep(sc);

  Report r;
  json rows = json::array(), flags = json::array(), ranges = json::array();
  std::ostringstream csv, plot;
  csv << "transform,p,resolution,domain,norm,method,iterations,converged\n";
  plot << "transform,resolution,domain,p,norm\n";
  for (const auto& row : rep.rows) {
    rows.push_back({{"transform", row.transform}, {"p", row.p}, {"resolution", row.resolution},
                    {"domain", row.domain}, {"norm", num(row.norm)}, {"method", row.method},
                    {"iterations", row.iterations}, {"converged", row.converged}});
    csv << row.transform << ',' << row.p << ',' << row.resolution << ',' << row.domain << ',' << row.norm << ','
        << row.method << ',' << row.iterations << ',' << (row.converged ? 1 : 0) << '\n';
  }
  auto sorted = rep.rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.transform, a.resolution, a.domain, a.p) < std::tie(b.transform, b.resolution, b.domain, b.p);
  });
  for (const auto& row : sorted)
    plot << row.transform << ',' << row.resolution << ',' << row.domain << ',' << row.p << ',' << row.norm << '\n';
  for (const auto& f : rep.flags)
    flags.push_back({{"transform", f.transform}, {"p", f.p}, {"resolution_ratio", num(f.resolution_ratio)},
                     {"domain_ratio", num(f.domain_ratio)}, {"consistent", f.consistent}, {"growth", f.growth}});
  for (const auto& t : rep.ranges)
    ranges.push_back({{"estimate", t.estimate}, {"transform", t.transform}, {"lo", num(t.lo)}, {"hi", num(t.hi)},
                      {"lo_inclusive", t.lo_inclusive}});

  // L¹ contracts on delta columns at the finest lattice of the largest domain
  const int N = *std::max_element(c.resolutions.begin(), c.resolutions.end());
  const double D = *std::max_element(c.domains.begin(), c.domains.end());
  const Grid g = centered_grid(c.dim, N, D, Boundary::dirichlet);
  const Family fam = make_family(c.family);
  const HOperator H = assemble(g, family_phases(g, fam), fam.sample(g));
  double l1v = 0.0, l1f = 0.0;
  json l1 = json::array();
  for (const MultiIndex& m : {MultiIndex{N / 2, N / 2, c.dim == 3 ? N / 2 : 0}, MultiIndex{N / 4, N / 2, 0},
                              MultiIndex{1, 2, c.dim == 3 ? 1 : 0}}) {
    Field f = Field::Zero(g.nodes());
    f[g.index(m)] = 1.0 / g.cell_volume();
    const L1Ratios lr = l1_maximal_check(H, f);
    l1v = std::max(l1v, lr.potential);
    l1f = std::max(l1f, lr.free);
    l1.push_back({{"source", {m[0], m[1], m[2]}}, {"potential", lr.potential}, {"free", lr.free}});
  }
  r.invariants.push_back({"p2_contract", rep.p2_contract_ok ? 0.0 : 1.0, 0.0, rep.p2_contract_ok});
  r.invariants.push_back(check("l1_potential", l1v, 1.0 + c.tolerance("l1")));
  r.invariants.push_back(check("l1_free", l1f, 2.0 + c.tolerance("l1")));

  r.payload["results"] = {{"family", rep.family},      {"battery", rep.battery_version},
                          {"rh_q", num(rep.rh_q)},     {"control_C1", num(rep.control_C1)},
                          {"control_C2", num(rep.control_C2)}, {"rows", rows},
                          {"flags", flags},            {"ranges", ranges},
                          {"l1", l1}};
  r.csv = csv.str();
  r.plot = plot.str();
  return r;
}

Report run_czd(const ExperimentConfig& c) {
  const Family fam = make_family(c.family);
  auto [g, f] = load_field("f", c.f, task_grid(c));
  WeightField omega;
  if (c.omega == "V") omega = fam.sample(g);
  else if (c.omega == "one") omega = WeightField::Ones(g.nodes());
  else {
    auto [go, w] = load_field("omega", c.omega, g);
    if (!(go == g)) throw ConfigError("omega: grid differs from the grid of f");
    omega = w.cwiseAbs();
  }
  CZInput in{g, f, family_phases(g, fam), omega, c.p, c.alpha, std::nullopt, {}};
  if (fam.spec.c != 0.0) in.B = fam.field(g.dim());
  if (in.alpha <= 0.0) {
    const HOperator H = assemble(g, in.theta, WeightField::Zero(g.nodes()));
    const VectorXd Lf = gradient_magnitude(H, f);
    VectorXd G(g.nodes());
    for (Index k = 0; k < g.nodes(); ++k)
      G[k] = std::pow(Lf[k], c.p) + std::pow(std::sqrt(omega[k]) * std::abs(f[k]), c.p);
    VectorXd MG = maximal_function(g, G);
    std::sort(MG.begin(), MG.end());
    in.alpha = std::pow(MG[static_cast<Index>(0.99 * (MG.size() - 1))], 1.0 / c.p);
  }
  const CZDecomposition d = cz_decompose(in);
  const CZCertificate& cert = d.certificate;

  Report r;
  r.payload["results"] = cz_manifest(d);
  std::ostringstream csv, plot;
  write_cube_csv(csv, d);
  write_field_csv(plot, g, d.g);
  r.csv = csv.str();
  r.plot = plot.str();
  r.invariants.push_back(check("reconstruction", cert.reconstruction, c.tolerance("reconstruction")));
  r.invariants.push_back(check("partition_sum", cert.partition_sum, c.tolerance("reconstruction")));
  r.invariants.push_back(check("support_violations", double(cert.support_violations), 0.0));
  r.invariants.push_back(check("whitney_exact", cert.whitney.exact() ? 0.0 : 1.0, 0.0));
  r.invariants.push_back(check("mask_matches", cert.mask_matches ? 0.0 : 1.0, 0.0));
  return r;
}

Report run_gauge(const ExperimentConfig& c) {
  const Family fam = make_family(c.family);
  const Grid g = task_grid(c);
  const MagneticField B = fam.field(c.dim);
  const int N = g.points();
  MultiIndex lo{N / 4, N / 4, c.dim == 3 ? N / 4 : 0};
  const NodeBox box = NodeBox::square(lo, N / 2, c.dim);
  GaugeData gd = poincare_gauge(g, B, box);
  bool recovered = true;
  std::string failure;
  if (c.dim == 2) {
    try {
      recover_phi(g, landau_phases(g, B), gd);
    } catch (const FluxMismatch& e) {
      recovered = false;
      failure = e.what();
    }
  }
  Report r;
  r.payload["results"] = {{"box", {{"lo", {box.lo[0], box.lo[1], box.lo[2]}},
                                    {"extent", {box.extent[0], box.extent[1], box.extent[2]}}}},
                          {"R", gd.R},
                          {"sup_h", gd.sup_h},
                          {"sup_B", gd.sup_B},
                          {"sup_grad_h", gd.sup_grad_h},
                          {"sup_grad_B", gd.sup_grad_B},
                          {"grad_B_numeric", gd.grad_B_numeric},
                          {"bound_ratio", num(gd.bound_ratio())},
                          {"gradient_ratio", num(gd.gradient_ratio())},
                          {"curl_residual", gd.curl_residual},
                          {"mismatch", gd.mismatch},
                          {"tolerance", gd.tolerance},
                          {"recovered", recovered}};
  if (!failure.empty()) r.payload["results"]["failure"] = failure;
  std::ostringstream csv;
  csv << "i1,i2" << (c.dim == 3 ? ",i3" : "") << ",h1,h2" << (c.dim == 3 ? ",h3" : "") << ",phi\n";
  const Index count = box.count(c.dim);
  for (Index i = 0; i < count; ++i) {
    const MultiIndex m = box.local(i, c.dim);
    for (int a = 0; a < c.dim; ++a) csv << box.lo[a] + m[a] << ',';
    for (int a = 0; a < c.dim; ++a) csv << gd.h[a][i] << ',';
    csv << (gd.phi.size() ? gd.phi[i] : 0.0) << '\n';
  }
  r.csv = csv.str();
  r.invariants.push_back({"phase_recovery", recovered ? 0.0 : 1.0, 0.0, recovered});
  r.invariants.push_back(check("finite_bounds", std::isfinite(gd.sup_h) ? 0.0 : 1.0, 0.0));
  return r;
}

Report run_weights(const ExperimentConfig& c) {
  const Family fam = make_family(c.family);
  const Grid g = task_grid(c);
  const WeightField V = fam.sample(g);
  const LevelRange lv = full_levels(g);
  const WeightReport rh = rh_constant(g, V, c.q, lv);
  const double dbl = doubling_constant(g, V, lv);
  const WeightReport ai = ainfty_profile(g, V, {0.25, 0.5, 0.75}, lv);
  const ControlReport ctl = control_condition_check(g, fam.field(c.dim), V, lv);

  Report r;
  json levels = json::array(), profile = json::array();
  std::ostringstream csv;
  csv << "level,constant,cubes\n";
  for (const auto& l : rh.per_level) {
    levels.push_back({{"level", l.level}, {"constant", num(l.value)}, {"cubes", l.cubes}});
    csv << l.level << ',' << l.value << ',' << l.cubes << '\n';
  }
  for (const auto& [s, k] : ai.ainfty_profile) profile.push_back({{"s", s}, {"constant", num(k)}});
  r.payload["results"] = {{"q", num(c.q)},
                          {"rh_constant", num(rh.rh_constant)},
                          {"levels", {{"lo", lv.lo}, {"hi", lv.hi}}},
                          {"per_level", levels},
                          {"doubling", num(dbl)},
                          {"ainfty_profile", profile},
                          {"ainfty_consistent", ai.ainfty_consistent},
                          {"ainfty_growth", num(ai.ainfty_growth)},
                          {"control", {{"C1", num(ctl.C1)}, {"C2", num(ctl.C2)}, {"has_C2", ctl.has_C2},
                                       {"gradient_numeric", ctl.gradient_numeric},
                                       {"pointwise", num(ctl.pointwise)}}}};
  r.csv = csv.str();
  r.invariants.push_back(check("finite_rh_constant", std::isfinite(rh.rh_constant) ? 0.0 : 1.0, 0.0));
  return r;
}

Report run_check(const ExperimentConfig& c) {
  SuiteConfig sc;
  sc.family = c.family;
  sc.dim = c.dim;
  sc.points = c.resolutions.front();
  sc.side = c.domains.front();
  sc.cube_sides = c.cube_sides;
  sc.mode = c.mode == "column" ? ProbeMode::inverse_column : ProbeMode::boundary_value;
  sc.seed = c.seed;
  sc.refinement_limit = c.tolerance("refinement");
  sc.bounded_limit = c.tolerance("bounded");
  const EstimateSuiteReport rep = run_suite(sc);

  Report r;
  r.payload["results"] = suite_to_json(rep);
  std::ostringstream csv, plot;
  write_rows_csv(csv, rep.rows);
  plot << "key,scale,constant\n";
  for (const auto& t : rep.trends)
    for (std::size_t i = 0; i < t.constants.size(); ++i) plot << t.key << ',' << i << ',' << t.constants[i] << '\n';
  r.csv = csv.str();
  r.plot = plot.str();
  double exact = 0.0;
  for (const auto& row : rep.rows)
    if (row.exact) exact = std::max(exact, row.constant);
  r.invariants.push_back(check("solve_residual", rep.residual, c.tolerance("residual")));
  r.invariants.push_back(check("pinned_values", rep.pinned_error, 1e-10));
  r.invariants.push_back(check("subharmonic_identity", exact, c.tolerance("residual")));
  r.invariants.push_back(check("subharmonic_positivity", -rep.refinement.min_laplacian, 1e-10));
  r.invariants.push_back(check("refinement_ratio", rep.refinement.ratio, c.tolerance("refinement")));
  bool weighted_ok = true;
  for (const auto& v : rep.violations) weighted_ok = weighted_ok && v.rfind("weighted", 0) != 0;
  r.invariants.push_back({"weighted_precondition", weighted_ok ? 0.0 : 1.0, 0.0, weighted_ok});
  return r;
}

Report run_kernel(const ExperimentConfig& c) {
  const Family fam = make_family(c.family);
  const Grid g = task_grid(c);
  const HOperator H = assemble(g, family_phases(g, fam), fam.sample(g));
  const int N = g.points();
  const Index y = g.index({N / 2, N / 2, c.dim == 3 ? N / 2 : 0});
  const KernelSlice ks = green_kernel(H, y, c.lambda0);
  Field delta = Field::Zero(g.nodes());
  delta[y] = 1.0 / g.cell_volume();
  const Field free = solve_shifted(free_laplacian(g), c.lambda0, delta);
  const double top = free.cwiseAbs().maxCoeff();
  double violation = 0.0;
  for (Index k = 0; k < g.nodes(); ++k) violation = std::max(violation, std::abs(ks.column[k]) - free[k].real());

  Report r;
  r.payload["results"] = {{"source", y},
                          {"lambda0", ks.lambda0},
                          {"exponent", ks.exponent},
                          {"fit", {ks.fit_lo, ks.fit_hi}},
                          {"fit_points", ks.fit_points},
                          {"offsource_residual", ks.offsource_residual},
                          {"bound_constant", ks.bound_constant},
                          {"domination_violation", violation / top}};
  std::ostringstream csv;
  csv << "distance,abs_gamma,abs_gamma_free\n";
  std::vector<Index> order(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ks.distance[a] < ks.distance[b]; });
  for (Index k : order) csv << ks.distance[k] << ',' << std::abs(ks.column[k]) << ',' << free[k].real() << '\n';
  r.csv = csv.str();
  r.plot = r.csv;
  r.invariants.push_back(check("offsource_residual", ks.offsource_residual, c.tolerance("kernel")));
  r.invariants.push_back(check("kato_simon_domination", violation / top, c.tolerance("domination")));
  return r;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

void diff_leaves(const json& a, const json& b, const std::string& path, json& cells, double& max_rel) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (x == y) return;
    const double rel = std::abs(x - y) / std::max(std::abs(x), std::abs(y));
    max_rel = std::max(max_rel, rel);
    cells.push_back({{"path", path}, {"a", x}, {"b", y}, {"rel", rel}});
    return;
  }
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (const auto& [k, v] : a.items()) keys.insert(k);
    for (const auto& [k, v] : b.items()) keys.insert(k);
    for (const auto& k : keys) {
      if (!a.contains(k) || !b.contains(k)) {
        cells.push_back({{"path", path + "/" + k}, {"missing", a.contains(k) ? "b" : "a"}});
        continue;
      }
      diff_leaves(a[k], b[k], path + "/" + k, cells, max_rel);
    }
    return;
  }
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) {
      cells.push_back({{"path", path}, {"size_a", a.size()}, {"size_b", b.size()}});
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i) diff_leaves(a[i], b[i], path + "/" + std::to_string(i), cells, max_rel);
    return;
  }
  if (a != b) cells.push_back({{"path", path}, {"a", a}, {"b", b}});
}

}  // namespace

std::map<std::string, double> default_tolerances() {
  return {{"p2", 1e-8},        {"l1", 1e-6},     {"refinement", 0.67},  {"bounded", 3.0},
          {"residual", 1e-8},  {"domination", 1e-10}, {"kernel", 1e-8}, {"reconstruction", 1e-12}};
}

double ExperimentConfig::tolerance(const std::string& name) const {
  if (auto it = tolerances.find(name); it != tolerances.end()) return it->second;
  return default_tolerances().at(name);
}

void validate(const ExperimentConfig& c) {
  static const std::set<std::string> tasks{"sweep", "czd", "gauge", "weights", "check", "kernel"};
  if (!tasks.count(c.task)) throw ConfigError("task: unknown task '" + c.task + "'");
  try {
    make_family(c.family);
  } catch (const InputError& e) {
    throw ConfigError(std::string("family: ") + e.what());
  }
  if (c.dim != 2 && c.dim != 3) throw ConfigError("dim: must be 2 or 3");
  if (c.resolutions.empty()) throw ConfigError("resolutions: empty list");
  for (int n : c.resolutions)
    if (n < 4) throw ConfigError("resolutions: each entry must be at least 4");
  if (c.domains.empty()) throw ConfigError("domains: empty list");
  for (double d : c.domains)
    if (!(d > 0.0)) throw ConfigError("domains: entries must be positive");
  if (c.task == "sweep" && c.transforms.empty()) throw ConfigError("transforms: empty list");
  if (c.p_list.empty()) throw ConfigError("p_list: empty list");
  for (double p : c.p_list)
    if (!(p >= 1.0)) throw ConfigError("p_list: entries must be at least 1");
  if (!(c.alpha >= 0.0)) throw ConfigError("alpha: must be nonnegative");
  if (!(c.p >= 1.0 && c.p < 2.0)) throw ConfigError("p: must lie in [1, 2)");
  if (!(c.q > 1.0)) throw ConfigError("q: must exceed 1");
  if (!(c.lambda0 >= 0.0)) throw ConfigError("lambda0: must be nonnegative");
  if (c.cube_sides.empty()) throw ConfigError("cube_sides: empty list");
  for (double s : c.cube_sides)
    if (!(s > 0.0)) throw ConfigError("cube_sides: entries must be positive");
  if (c.mode != "boundary" && c.mode != "column") throw ConfigError("mode: must be boundary or column");
  const auto known = default_tolerances();
  for (const auto& [k, v] : c.tolerances) {
    if (!known.count(k)) throw ConfigError("tolerance." + k + ": unknown tolerance");
    if (!(v > 0.0)) throw ConfigError("tolerance." + k + ": must be positive");
  }
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  ExperimentConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "task") c.task = string_of(k, v);
    else if (k == "family") c.family = family_of(v);
    else if (k == "dim") c.dim = static_cast<int>(number_of(k, v));
    else if (k == "resolutions") c.resolutions = numbers_of<int>(k, v);
    else if (k == "domains") c.domains = numbers_of<double>(k, v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(number_of(k, v));
    else if (k == "transforms") {
      c.transforms.clear();
      if (v.is_string()) c.transforms = split(v.get<std::string>(), ',');
      else if (v.is_array())
        for (const auto& t : v) c.transforms.push_back(string_of(k, t));
      else throw ConfigError("transforms: expected a list");
    } else if (k == "p_list") c.p_list = numbers_of<double>(k, v);
    else if (k == "f") c.f = string_of(k, v);
    else if (k == "omega") c.omega = string_of(k, v);
    else if (k == "alpha") c.alpha = number_of(k, v);
    else if (k == "p") c.p = number_of(k, v);
    else if (k == "q") c.q = number_of(k, v);
    else if (k == "lambda0") c.lambda0 = number_of(k, v);
    else if (k == "cube_sides") c.cube_sides = numbers_of<double>(k, v);
    else if (k == "mode") c.mode = string_of(k, v);
    else if (k == "out") c.out = string_of(k, v);
    else if (k == "csv") c.csv = string_of(k, v);
    else if (k == "plot") c.plot = string_of(k, v);
    else if (k == "tolerances") {
      if (!v.is_object()) throw ConfigError("tolerances: expected an object");
      for (const auto& [t, x] : v.items()) c.tolerances[t] = number_of("tolerance." + t, x);
    } else if (k.rfind("tolerance.", 0) == 0) {
      c.tolerances[k.substr(10)] = number_of(k, v);
    } else {
      throw ConfigError(k + ": unknown field");
    }
  }
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '{') {
    json j;
    try {
      j = json::parse(t);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: invalid JSON (") + e.what() + ")");
    }
    return config_from_json(j);
  }
  json j = json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    j[key] = trim(line.substr(eq + 1));
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
  json tol = json::object();
  for (const auto& [k, v] : default_tolerances()) tol[k] = c.tolerance(k);
  return {{"task", c.task},
          {"family", family_name(c.family)},
          {"dim", c.dim},
          {"resolutions", c.resolutions},
          {"domains", c.domains},
          {"seed", c.seed},
          {"transforms", c.transforms},
          {"p_list", c.p_list},
          {"f", c.f},
          {"omega", c.omega},
          {"alpha", c.alpha},
          {"p", c.p},
          {"q", c.q},
          {"lambda0", c.lambda0},
          {"cube_sides", c.cube_sides},
          {"mode", c.mode},
          {"out", c.out},
          {"csv", c.csv},
          {"plot", c.plot},
          {"tolerances", tol}};
}

bool Report::pass() const {
  return std::all_of(invariants.begin(), invariants.end(), [](const Invariant& i) { return i.pass; });
}

Report run(const ExperimentConfig& c) {
  validate(c);
  Report r;
  if (c.task == "sweep") r = run_sweep(c);
  else if (c.task == "czd") r = run_czd(c);
  else if (c.task == "gauge") r = run_gauge(c);
  else if (c.task == "weights") r = run_weights(c);
  else if (c.task == "check") r = run_check(c);
  else r = run_kernel(c);
  json inv = json::array();
  for (const auto& i : r.invariants)
    inv.push_back({{"name", i.name}, {"value", num(i.value)}, {"limit", num(i.limit)}, {"pass", i.pass}});
  json results = std::move(r.payload["results"]);
  r.payload = {{"schema", kReportSchema}, {"task", c.task},     {"config", config_to_json(c)},
               {"results", results},      {"invariants", inv}, {"pass", r.pass()}};
  return r;
}

void write_outputs(const ExperimentConfig& c, const Report& r) {
  if (!c.out.empty()) write_file(c.out, r.payload.dump(2) + "\n");
  if (!c.csv.empty()) write_file(c.csv, r.csv);
  if (!c.plot.empty() && !r.plot.empty()) write_file(c.plot, r.plot);
}

json compare(const json& a, const json& b) {
  for (const json* r : {&a, &b})
    if (!r->is_object() || !r->contains("task") || !r->contains("results"))
      throw ConfigError("compare: input is not a report");
  if (a["task"] != b["task"])
    throw ConfigError("compare: task mismatch (" + a["task"].get<std::string>() + " vs " +
                      b["task"].get<std::string>() + ")");
  json cells = json::array();
  double max_rel = 0.0;
  diff_leaves(a["results"], b["results"], "", cells, max_rel);
  json out = {{"task", a["task"]}, {"cells", cells}, {"max_rel", max_rel}};

  if (a["task"] == "sweep") {
    // finest resolution per (transform, p, domain) in each report
    using Key = std::tuple<std::string, double, double>;
    auto finest = [](const json& rows) {
      std::map<Key, std::pair<int, double>> m;
      for (const auto& r : rows) {
        if (!r["norm"].is_number()) continue;
        const Key k{r["transform"].get<std::string>(), r["p"].get<double>(), r["domain"].get<double>()};
        const int n = r["resolution"].get<int>();
        auto it = m.find(k);
        if (it == m.end() || n > it->second.first) m[k] = {n, r["norm"].get<double>()};
      }
      return m;
    };
    const auto ma = finest(a["results"]["rows"]), mb = finest(b["results"]["rows"]);
    json ratios = json::array();
    for (const auto& [k, va] : ma) {
      auto it = mb.find(k);
      if (it == mb.end()) continue;
      const auto& vb = it->second;
      ratios.push_back({{"transform", std::get<0>(k)},
                        {"p", std::get<1>(k)},
                        {"domain", std::get<2>(k)},
                        {"resolution_a", va.first},
                        {"resolution_b", vb.first},
                        {"norm_a", va.second},
                        {"norm_b", vb.second},
                        {"ratio", num(va.second > 0.0 ? vb.second / va.second : kInf)}});
    }
    out["ratios"] = ratios;
  }
  return out;
}

int configured_threads() {
  const char* v = std::getenv("MSLAB_THREADS");
  if (!v || !*v) return 0;
  const long n = to_long("MSLAB_THREADS", trim(v));
  if (n < 1) throw ConfigError("MSLAB_THREADS: must be a positive integer");
  return static_cast<int>(n);
}

}  // namespace mslab
