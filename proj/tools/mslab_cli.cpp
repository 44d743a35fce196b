#include <mslab/experiment.hpp>

#include <CLI11.hpp>
#include <Eigen/Core>

#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string family, transforms, p_list, resolutions, domains, cube_sides;
  std::string f, omega, mode;
  std::string out, csv, plot;
  std::vector<std::string> tolerances;
  int dim = 0;
  std::uint64_t seed = 0;
  double alpha = -1, p = 0, q = 0, lambda0 = -1;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mslab::ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void common(CLI::App* sc, Flags& fl) {
  sc->add_option("--config", fl.config, "Config file (JSON or key = value); flags override it");
  sc->add_option("--family", fl.family, "Potential family, e.g. poly:gamma=2,c=0.5 or constant:c0=1,c=0");
  sc->add_option("--dim", fl.dim, "Dimension, 2 or 3");
  sc->add_option("--resolutions", fl.resolutions, "Comma-separated points per axis");
  sc->add_option("--domains", fl.domains, "Comma-separated domain sides");
  sc->add_option("--seed", fl.seed, "Random seed");
  sc->add_option("--out", fl.out, "JSON report path");
  sc->add_option("--csv", fl.csv, "Main table CSV path");
  sc->add_option("--plot", fl.plot, "Plot-data CSV path");
  sc->add_option("--tolerance", fl.tolerances, "Tolerance override name=value (repeatable)");
}

json overrides(const std::string& task, const Flags& fl) {
  json j = json::object();
  if (!task.empty()) j["task"] = task;
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) j[key] = v;
  };
  put("family", fl.family);
  put("transforms", fl.transforms);
  put("p_list", fl.p_list);
  put("resolutions", fl.resolutions);
  put("domains", fl.domains);
  put("cube_sides", fl.cube_sides);
  put("f", fl.f);
  put("omega", fl.omega);
  put("mode", fl.mode);
  put("out", fl.out);
  put("csv", fl.csv);
  put("plot", fl.plot);
  if (fl.dim) j["dim"] = fl.dim;
  if (fl.seed) j["seed"] = fl.seed;
  if (fl.alpha >= 0) j["alpha"] = fl.alpha;
  if (fl.p > 0) j["p"] = fl.p;
  if (fl.q > 0) j["q"] = fl.q;
  if (fl.lambda0 >= 0) j["lambda0"] = fl.lambda0;
  for (const auto& t : fl.tolerances) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw mslab::ConfigError("tolerance: expected name=value, got '" + t + "'");
    j["tolerance." + t.substr(0, eq)] = t.substr(eq + 1);
  }
  return j;
}

mslab::ExperimentConfig resolve(const std::string& task, const Flags& fl) {
  json j = json::object();
  if (!fl.config.empty()) {
    const mslab::ExperimentConfig base = mslab::parse_config(slurp(fl.config));
    j = mslab::config_to_json(base);
    json tol = j["tolerances"];
    j.erase("tolerances");
    for (const auto& [k, v] : tol.items()) j["tolerance." + k] = v;
  }
  const json over = overrides(task, fl);
  for (const auto& [k, v] : over.items()) j[k] = v;
  if (fl.config.empty() && task.empty()) throw mslab::ConfigError("config: run needs --config");
  return mslab::config_from_json(j);
}

int execute(const mslab::ExperimentConfig& c) {
  const mslab::Report r = mslab::run(c);
  mslab::write_outputs(c, r);
  if (c.task == "weights") std::cout << r.csv;
  if (c.task == "gauge" || c.task == "czd") std::cout << r.payload["results"].dump(2) << "\n";
  for (const auto& i : r.invariants)
    std::cout << (i.pass ? "PASS " : "FAIL ") << i.name << " value=" << i.value << " limit=" << i.limit << "\n";
  std::cout << (r.pass() ? "PASS" : "FAIL") << " " << c.task << "\n";
  return r.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for magnetic Schrödinger operators on lattices"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 pass, 1 invariant failure, 2 config error. MSLAB_THREADS sets the worker count.");

  Flags fl;
  std::string task;
  std::string report_a, report_b, diff_out;

  auto* sweep = app.add_subcommand("sweep", "Operator norm sweep over transforms, p, resolutions and domains");
  common(sweep, fl);
  sweep->add_option("--transforms", fl.transforms, "Comma-separated transforms, e.g. LH-1/2:j=0,VH-1");
  sweep->add_option("--p-list", fl.p_list, "Comma-separated exponents");

  auto* czd = app.add_subcommand("czd", "Calderón-Zygmund decomposition with certificate");
  common(czd, fl);
  czd->add_option("--f", fl.f, "radial, gaussian, or a field JSON/CSV path");
  czd->add_option("--omega", fl.omega, "V, one, or a field JSON/CSV path");
  czd->add_option("--alpha", fl.alpha, "Level; 0 picks the 99th percentile of the maximal function");
  czd->add_option("--p", fl.p, "Exponent in [1, 2)");

  auto* gauge = app.add_subcommand("gauge", "Poincaré gauge on the central box and its bound certificate");
  common(gauge, fl);

  auto* weights = app.add_subcommand("weights", "Reverse Hölder, doubling and control constants of V");
  common(weights, fl);
  weights->add_option("--q", fl.q, "Reverse Hölder exponent");

  auto* check = app.add_subcommand("check", "Estimate suite on solutions of Hu = 0");
  common(check, fl);
  check->add_option("--cube-sides", fl.cube_sides, "Comma-separated physical cube sides");
  check->add_option("--mode", fl.mode, "boundary or column");

  auto* kernel = app.add_subcommand("kernel", "Green kernel column and Kato-Simon domination");
  common(kernel, fl);
  kernel->add_option("--lambda0", fl.lambda0, "Spectral shift");

  auto* runc = app.add_subcommand("run", "Run the task named in a config file");
  common(runc, fl);

  auto* cmp = app.add_subcommand("compare", "Relative differences between two reports of the same task");
  cmp->add_option("a", report_a, "Report A")->required();
  cmp->add_option("b", report_b, "Report B")->required();
  cmp->add_option("--out", diff_out, "Diff JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (const int n = mslab::configured_threads(); n > 0) Eigen::setNbThreads(n);
    if (cmp->parsed()) {
      const json a = json::parse(slurp(report_a)), b = json::parse(slurp(report_b));
      const json d = mslab::compare(a, b);
      if (!diff_out.empty()) std::ofstream(diff_out) << d.dump(2) << "\n";
      std::cout << d.dump(2) << "\n";
      return 0;
    }
    for (auto* sc : {sweep, czd, gauge, weights, check, kernel})
      if (sc->parsed()) task = sc->get_name();
    return execute(resolve(task, fl));
  } catch (const mslab::InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
