#pragma once

#include <mslab/gauge.hpp>
#include <mslab/grid.hpp>

#include <string>
#include <vector>

namespace mslab {

/// poly:  V = (1+|x|²)^{γ/2}
/// power: V = (|x|² + ε²)^{γ/2}
/// constant: V ≡ c0
/// B = c·V (planar), or B ≡ 0 when c = 0.
struct FamilySpec {
  std::string potential = "poly";
  double gamma = 2.0;
  double eps = 0.25;
  double c0 = 1.0;
  double c = 0.5;
};

struct Family {
  FamilySpec spec;
  std::string name;
  std::function<double(const Point&)> V;
  std::function<Eigen::Vector3d(const Point&)> gradV;
  /// Nominal reverse Hölder exponent of the unregularized profile (inf for RH_∞).
  double rh_q = 0.0;

  WeightField sample(const Grid& g) const;
  MagneticField field(int dim) const;
};

Family make_family(const FamilySpec& spec);
/// "poly:gamma=2,c=0.5", "power:gamma=-1,eps=0.25", "constant:c0=1,c=0".
FamilySpec parse_family(const std::string& text);
std::string family_name(const FamilySpec& spec);
/// poly γ ∈ {0,1,2,4} and power γ ∈ {-1,1,2}, all with B = V/2.
std::vector<FamilySpec> default_families();

}  // namespace mslab
