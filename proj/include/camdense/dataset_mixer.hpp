#ifndef CAMDENSE_DATASET_MIXER_HPP
#define CAMDENSE_DATASET_MIXER_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "camdense/simplex.hpp"

namespace camdense {

/// Per-dataset, per-scenario image capacities. Rows are datasets, columns
/// are scenarios.
struct DatasetManifest {
  std::vector<std::string> dataset_names;
  std::vector<std::string> scenario_names;
  Eigen::MatrixXi capacities;  // u x v, nonnegative
};

/// Throws ShapeMismatch when capacities disagree with the name lists,
/// InputError for empty axes, negative capacities, or duplicate names.
void validate_manifest(const DatasetManifest& manifest);

/// LP instance plus one human-readable label per inequality row.
struct MixerLp {
  LpProblem problem;
  std::vector<std::string> row_labels;
};

/// Maximize total selected images subject to per-scenario dataset share
/// bands (width beta, normalized by the number of datasets with nonzero
/// capacity in that scenario), per-scenario total bands (width gamma around
/// an equal split), and 0 <= q <= Q. Zero-capacity cells are pinned to 0
/// and excluded from the share bands.
MixerLp build_lp(const DatasetManifest& manifest, double beta, double gamma);

struct Allocation {
  Eigen::MatrixXd continuous;  // optimal LP solution, u x v
  Eigen::MatrixXi counts;      // rounded counts, each within 1 of continuous
  double objective = 0.0;      // continuous optimum
  double beta = 0.0;
  double gamma = 0.0;
};

/// Solves the mixing LP, then rounds by flooring and handing the lost units
/// to the largest fractional remainders, never exceeding a capacity.
Allocation solve_allocation(const DatasetManifest& manifest, double beta, double gamma);

struct ConstraintSlack {
  std::string label;
  double slack = 0.0;  // nonnegative when satisfied
  bool violated = false;
};

struct AllocationReport {
  std::vector<ConstraintSlack> constraints;
  int violations = 0;
  double worst_slack = 0.0;  // most negative slack, 0 when all satisfied
};

/// Audits an allocation against every constraint of the mixing LP,
/// including capacity and nonnegativity bounds. Throws ShapeMismatch when
/// q is not u x v.
AllocationReport verify_allocation(const Eigen::MatrixXd& q, const DatasetManifest& manifest,
                                   double beta, double gamma, double tolerance = 1e-9);

}  // namespace camdense

#endif  // CAMDENSE_DATASET_MIXER_HPP
