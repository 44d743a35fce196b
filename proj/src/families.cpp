#include <mslab/families.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace mslab {

WeightField Family::sample(const Grid& g) const {
  WeightField w(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) w[k] = V(g.coord(k));
  return w;
}

MagneticField Family::field(int dim) const {
  if (spec.c == 0.0) return zero_field(dim);
  const double c = spec.c;
  auto v = V;
  auto gv = gradV;
  return planar_field(dim, [c, v](const Point& x) { return c * v(x); },
                      [c, gv](const Point& x) { return (c * gv(x)).eval(); });
}

Family make_family(const FamilySpec& spec) {
  Family f;
  f.spec = spec;
  f.name = family_name(spec);
  const double g = spec.gamma;
  const double inf = std::numeric_limits<double>::infinity();
  if (spec.potential == "poly") {
    f.V = [g](const Point& x) { return std::pow(1.0 + x.squaredNorm(), 0.5 * g); };
    f.gradV = [g](const Point& x) { return (g * std::pow(1.0 + x.squaredNorm(), 0.5 * g - 1.0) * x).eval(); };
    f.rh_q = inf;
  } else if (spec.potential == "power") {
    require(spec.eps > 0.0, "power family needs eps > 0");
    const double e2 = spec.eps * spec.eps;
    f.V = [g, e2](const Point& x) { return std::pow(x.squaredNorm() + e2, 0.5 * g); };
    f.gradV = [g, e2](const Point& x) { return (g * std::pow(x.squaredNorm() + e2, 0.5 * g - 1.0) * x).eval(); };
    // |x|^γ ∈ RH_q iff qγ > -n; reported for n = 2 (q = n/|γ|, exclusive)
    f.rh_q = g >= 0.0 ? inf : 2.0 / -g;
  } else if (spec.potential == "constant") {
    require(spec.c0 >= 0.0, "constant family needs c0 >= 0");
    const double c0 = spec.c0;
    f.V = [c0](const Point&) { return c0; };
    f.gradV = [](const Point&) { return Eigen::Vector3d::Zero().eval(); };
    f.rh_q = inf;
  } else {
    throw InputError("unknown potential family '" + spec.potential + "'");
  }
  return f;
}

FamilySpec parse_family(const std::string& text) {
  FamilySpec s;
  const auto colon = text.find(':');
  s.potential = text.substr(0, colon);
  if (colon == std::string::npos) return s;
  std::stringstream rest(text.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    const auto eq = item.find('=');
    require(eq != std::string::npos, "family parameter '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw InputError("family parameter '" + item + "' is not numeric");
    }
    if (key == "gamma") s.gamma = value;
    else if (key == "eps") s.eps = value;
    else if (key == "c0") s.c0 = value;
    else if (key == "c") s.c = value;
    else throw InputError("unknown family parameter '" + key + "'");
  }
  make_family(s);
  return s;
}

std::string family_name(const FamilySpec& s) {
  std::ostringstream out;
  out << s.potential << ":";
  if (s.potential == "constant") out << "c0=" << s.c0;
  else out << "gamma=" << s.gamma;
  if (s.potential == "power") out << ",eps=" << s.eps;
  out << ",c=" << s.c;
  return out.str();
}

std::vector<FamilySpec> default_families() {
  std::vector<FamilySpec> out;
  for (double g : {0.0, 1.0, 2.0, 4.0}) out.push_back({"poly", g, 0.25, 1.0, 0.5});
  for (double g : {-1.0, 1.0, 2.0}) out.push_back({"power", g, 0.25, 1.0, 0.5});
  return out;
}

}  // namespace mslab
