#pragma once

#include <mslab/families.hpp>

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mslab {

inline constexpr const char* kReportSchema = "mslab-report/1";

/// Invalid configuration; the message names the offending field.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

struct ExperimentConfig {
  std::string task = "check";  // sweep | czd | gauge | weights | check | kernel
  FamilySpec family;
  int dim = 2;
  std::vector<int> resolutions{32};
  std::vector<double> domains{8.0};
  std::uint64_t seed = 1;

  // sweep
  std::vector<std::string> transforms{"LH-1/2:j=0", "V1/2LH-1:j=-1", "VH-1"};
  std::vector<double> p_list{2.0, 4.0, 8.0};
  // czd
  std::string f = "radial";  // radial | gaussian | path to a field JSON/CSV
  std::string omega = "V";   // V | one | path to a field JSON/CSV
  double alpha = 0.0;        // 0: 99th percentile of MG to the power 1/p
  double p = 1.5;
  // weights
  double q = 2.0;
  // kernel
  double lambda0 = 0.0;
  // check
  std::vector<double> cube_sides{0.5, 1.0, 1.5};
  std::string mode = "boundary";  // boundary | column

  std::string out;   // JSON report
  std::string csv;   // main table
  std::string plot;  // plot-data CSV

  /// p2 1e-8, l1 1e-6, refinement 0.67, bounded 3, residual 1e-8,
  /// domination 1e-10, kernel 1e-8, reconstruction 1e-12.
  std::map<std::string, double> tolerances;

  double tolerance(const std::string& name) const;
};

std::map<std::string, double> default_tolerances();

/// Validates every field; throws ConfigError naming the field.
void validate(const ExperimentConfig& c);

/// JSON object, or INI-style `key = value` lines (lists comma separated,
/// tolerances as `tolerance.<name> = value`, `#` comments).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

struct Invariant {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = true;
};

struct Report {
  nlohmann::json payload;  // schema, task, config, results, invariants, pass
  std::string csv;         // main table
  std::string plot;        // plot data
  std::vector<Invariant> invariants;
  bool pass() const;
};

/// Runs one experiment; writes the output files named in the config.
Report run(const ExperimentConfig& c);
void write_outputs(const ExperimentConfig& c, const Report& r);

/// Per-cell relative differences of the numeric leaves under "results" and,
/// for sweeps, the norm ratio B/A per (transform, p, domain) and resolution
/// pair. Throws ConfigError when the tasks differ.
nlohmann::json compare(const nlohmann::json& a, const nlohmann::json& b);

/// Worker count from MSLAB_THREADS (0 when unset).
int configured_threads();

}  // namespace mslab
