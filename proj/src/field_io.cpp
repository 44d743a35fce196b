#include <mslab/field_io.hpp>

#include <istream>
#include <ostream>
#include <sstream>

namespace mslab {

nlohmann::json grid_to_json(const Grid& g) {
  nlohmann::json j;
  j["dim"] = g.dim();
  j["points"] = g.points();
  j["spacing"] = g.spacing();
  j["boundary"] = g.boundary() == Boundary::dirichlet ? "dirichlet" : "periodic";
  j["origin"] = std::vector<double>(g.origin().data(), g.origin().data() + g.dim());
  return j;
}

Grid grid_from_json(const nlohmann::json& j) {
  try {
    const std::string b = j.at("boundary").get<std::string>();
    require(b == "dirichlet" || b == "periodic", "grid: unknown boundary '" + b + "'");
    Point o = Point::Zero();
    const auto orig = j.value("origin", std::vector<double>{});
    for (size_t a = 0; a < orig.size() && a < 3; ++a) o[a] = orig[a];
    return make_grid(j.at("dim").get<int>(), j.at("points").get<int>(),
                     j.at("spacing").get<double>(),
                     b == "dirichlet" ? Boundary::dirichlet : Boundary::periodic, o);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("grid: ") + e.what());
  }
}

void write_field_csv(std::ostream& os, const Grid& g, const Field& u) {
  require(u.size() == g.nodes(), "write_field_csv: field does not match grid");
  os.precision(17);
  for (Index k = 0; k < g.nodes(); ++k) {
    const MultiIndex m = g.multi_index(k);
    for (int a = 0; a < g.dim(); ++a) os << m[a] << ',';
    os << u[k].real() << ',' << u[k].imag() << '\n';
  }
}

Field read_field_csv(std::istream& is, const Grid& g) {
  Field u = Field::Zero(g.nodes());
  std::vector<bool> seen(g.nodes(), false);
  std::string line;
  Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    require(static_cast<int>(vals.size()) == g.dim() + 2, "read_field_csv: bad row '" + line + "'");
    MultiIndex m{0, 0, 0};
    for (int a = 0; a < g.dim(); ++a) m[a] = static_cast<int>(vals[a]);
    require(g.contains(m), "read_field_csv: index outside grid");
    const Index k = g.index(m);
    require(!seen[k], "read_field_csv: duplicate node");
    seen[k] = true;
    u[k] = Complex(vals[g.dim()], vals[g.dim() + 1]);
    ++rows;
  }
  require(rows == g.nodes(), "read_field_csv: missing nodes");
  require(u.allFinite(), "read_field_csv: non-finite value");
  return u;
}

nlohmann::json field_to_json(const Grid& g, const Field& u) {
  require(u.size() == g.nodes(), "field_to_json: field does not match grid");
  nlohmann::json j;
  j["grid"] = grid_to_json(g);
  std::vector<double> re(u.size()), im(u.size());
  for (Index k = 0; k < u.size(); ++k) {
    re[k] = u[k].real();
    im[k] = u[k].imag();
  }
  j["re"] = re;
  j["im"] = im;
  return j;
}

std::pair<Grid, Field> field_from_json(const nlohmann::json& j) {
  Grid g = grid_from_json(j.at("grid"));
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.value("im", std::vector<double>(re.size(), 0.0));
  require(static_cast<Index>(re.size()) == g.nodes() && im.size() == re.size(),
          "field_from_json: value count does not match grid");
  Field u(g.nodes());
  for (Index k = 0; k < g.nodes(); ++k) u[k] = Complex(re[k], im[k]);
  require(u.allFinite(), "field_from_json: non-finite value");
  return {g, u};
}

}  // namespace mslab
