#pragma once

#include <mslab/gauge.hpp>
#include <mslab/grid.hpp>
#include <mslab/operators.hpp>

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mslab {

/// Node range [lo, hi] per axis of λQ (strict containment, not clipped).
struct NodeRange {
  MultiIndex lo{0, 0, 0};
  MultiIndex hi{0, 0, 0};
};
NodeRange dilated_range(const DyadicCube& q, int dim, int factor);
/// Clipped to the grid; an empty range has lo > hi on some axis.
NodeRange clip(const Grid& g, NodeRange r);
bool range_inside(const Grid& g, const NodeRange& r);
std::vector<Index> range_nodes(const Grid& g, const NodeRange& r);

using NodeMask = std::vector<char>;

/// Maximal dyadic cubes Q with 2Q ⊆ Ω; nodes outside the grid count as F.
/// Throws InputError when Ω is the whole grid.
std::vector<DyadicCube> whitney(const Grid& g, const NodeMask& omega);

struct WhitneyCheck {
  Index overlapping_nodes = 0;  // nodes in more than one Q_k
  Index uncovered_nodes = 0;    // Ω nodes in no Q_k
  Index outside_nodes = 0;      // Q_k nodes not in Ω
  Index double_violations = 0;  // cubes with 2Q_k ⊄ Ω
  Index far_violations = 0;     // cubes with 4Q_k ∩ F = ∅
  int overlap = 0;              // max_x #{k : x ∈ 2Q_k}

  bool exact() const {
    return overlapping_nodes == 0 && uncovered_nodes == 0 && outside_nodes == 0 &&
           double_violations == 0;
  }
  bool ok() const { return exact() && far_violations == 0; }
};

WhitneyCheck check_whitney(const Grid& g, const NodeMask& omega, const std::vector<DyadicCube>& cubes);

/// χ_k on the nodes of 2Q_k (clipped), local to `nodes`.
struct PartitionPiece {
  std::vector<Index> nodes;
  VectorXd values;
};

struct Partition {
  std::vector<PartitionPiece> pieces;
  double constant = 0.0;  // max_k ‖χ_k‖_∞ + R_k‖∇χ_k‖_∞
};

/// Quadratic C¹ bump per cube (1 on Q_k, 0 outside 2Q_k), normalized on Ω.
Partition partition_of_unity(const Grid& g, const std::vector<DyadicCube>& cubes);
/// max_k ‖χ_k‖_∞ + R_k‖∇χ_k‖_∞ with forward differences.
double partition_constant(const Grid& g, const std::vector<DyadicCube>& cubes,
                          const std::vector<PartitionPiece>& pieces);

/// Discrete tree gauge on a node box: θ + dφ vanishes on the edges of the
/// highest axis, then on the lower-axis edges of the base face, and so on.
VectorXd tree_gauge(const Grid& g, const EdgePhaseField& theta, const NodeBox& box);

struct CZInput {
  Grid grid;
  Field f;
  EdgePhaseField theta;
  WeightField omega;
  double p = 1.0;
  double alpha = 1.0;
  /// When set, type-2 gauges are Poincaré gauges of B (flux mismatches throw);
  /// otherwise tree gauges of θ.
  std::optional<MagneticField> B;
  std::vector<int> maximal_sizes;  // empty: default family
};

struct CZCube {
  DyadicCube cube;
  int type = 1;
  double R = 0.0;           // physical side
  double mean_omega = 0.0;  // ⨍_{Q_k} ω
  NodeBox box;              // 2Q_k
  std::vector<Index> nodes; // box nodes, local order
  VectorXd chi;
  VectorXd phi;             // type 2 only
  Complex mean{0.0, 0.0};   // m_{2Q_k}(e^{iφ_k} f), type 2 only
  VectorXcd b;
};

struct CZCertificate {
  double good_l2 = 0.0;        // (‖Lg‖₂+‖ω^{1/2}g‖₂) / (α^{1-p/2}(‖Lf‖_p+‖ω^{1/2}f‖_p)^{p/2})
  double bad_per_cube = 0.0;   // max_k ∫|Lb_k|^p + R_k^{-p}|b_k|^p / (α^p|Q_k|)
  double level_measure = 0.0;  // Σ|Q_k| / (α^{-p}∫G)
  int overlap = 0;             // max_x #{k : x ∈ 2Q_k}
  double good_sup = 0.0;       // ‖Lg‖_∞ / α
  double partition = 0.0;
  double mean_offset = 0.0;  // max |m_{2Q_k} - m_{Q̃_m}| / (R̃_m α)
  Index mean_offset_pairs = 0;
  Index mean_offset_uncontained = 0;  // pairs with 2Q_k ⊄ Q̃_m
  double reconstruction = 0.0;        // max|f - g - Σb_k| / max|f|
  double partition_sum = 0.0;         // max_Ω |Σχ_k - 1|
  Index support_violations = 0;
  double F_excess = 0.0;              // max_F G / α^p
  Index type1 = 0, type2 = 0;
  WhitneyCheck whitney;
  bool mask_matches = true;
  bool ok = true;
  std::vector<std::string> violations;
};

struct CZDecomposition {
  CZInput input;
  WeightField G;   // |Lf|^p + |ω^{1/2}f|^p
  WeightField MG;
  NodeMask omega_mask;
  std::vector<CZCube> cubes;
  Field g;
  CZCertificate certificate;
};

/// Throws InputError for p ∉ [1, 2), α ≤ 0 or Ω equal to the whole grid.
CZDecomposition cz_decompose(const CZInput& in);

/// Recomputes Ω, the cube properties and every constant from the stored data.
/// Violated identities (reconstruction, supports, partition sum, mask) set
/// ok = false and are listed.
CZCertificate cz_verify(const CZDecomposition& d);

nlohmann::json certificate_to_json(const CZCertificate& c);
nlohmann::json cz_manifest(const CZDecomposition& d);
/// k,corner...,side_nodes,R,type,mean_omega
void write_cube_csv(std::ostream& os, const CZDecomposition& d);
/// k,i1,i2[,i3],re,im for every stored b_k value.
void write_bad_parts_csv(std::ostream& os, const CZDecomposition& d);

}  // namespace mslab
