#include "camdense/dataset_mixer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "camdense/errors.hpp"

namespace camdense {
namespace {

int var_index(int dataset, int scenario, int v) { return dataset * v + scenario; }

void check_tolerances(double beta, double gamma) {
  if (beta < 0.0 || beta >= 1.0 || gamma < 0.0 || gamma >= 1.0) {
    throw InputError("share tolerances must lie in [0, 1)");
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
  const int u = static_cast<int>(manifest.dataset_names.size());
  const int v = static_cast<int>(manifest.scenario_names.size());
  if (u < 1) throw InputError("manifest needs at least one dataset");
  if (v < 1) throw InputError("manifest needs at least one scenario");
  if (manifest.capacities.rows() != u || manifest.capacities.cols() != v) {
    throw ShapeMismatch("capacity matrix does not match the name lists");
  }
  if ((manifest.capacities.array() < 0).any()) {
    throw InputError("capacities must be nonnegative");
  }
  const std::set<std::string> datasets(manifest.dataset_names.begin(),
                                       manifest.dataset_names.end());
  const std::set<std::string> scenarios(manifest.scenario_names.begin(),
                                        manifest.scenario_names.end());
  if (static_cast<int>(datasets.size()) != u || static_cast<int>(scenarios.size()) != v) {
    throw InputError("dataset and scenario names must be unique");
  }
}

MixerLp build_lp(const DatasetManifest& manifest, double beta, double gamma) {
  validate_manifest(manifest);
  check_tolerances(beta, gamma);
  const int u = static_cast<int>(manifest.dataset_names.size());
  const int v = static_cast<int>(manifest.scenario_names.size());
  const int n = u * v;

  std::vector<int> nonzero_per_scenario(v, 0);
  int nonzero_cells = 0;
  for (int s = 0; s < v; ++s) {
    for (int d = 0; d < u; ++d) {
      if (manifest.capacities(d, s) != 0) {
        ++nonzero_per_scenario[s];
        ++nonzero_cells;
      }
    }
  }

  MixerLp lp;
  lp.problem.c = Eigen::VectorXd::Ones(n);
  lp.problem.lower = Eigen::VectorXd::Zero(n);
  lp.problem.upper = Eigen::VectorXd::Zero(n);
  for (int d = 0; d < u; ++d) {
    for (int s = 0; s < v; ++s) {
      lp.problem.upper(var_index(d, s, v)) = manifest.capacities(d, s);
    }
  }

  const int rows = 2 * nonzero_cells + 2 * v;
  lp.problem.a_ub = Eigen::MatrixXd::Zero(rows, n);
  lp.problem.b_ub = Eigen::VectorXd::Zero(rows);
  int row = 0;

  // Share bands: each nonzero cell stays within (1 +- beta) of the equal
  // split of its scenario's selected total over that scenario's nonzero
  // datasets.
  for (int s = 0; s < v; ++s) {
    if (nonzero_per_scenario[s] == 0) continue;
    const double equal_share = 1.0 / nonzero_per_scenario[s];
    for (int d = 0; d < u; ++d) {
      if (manifest.capacities(d, s) == 0) continue;
      const std::string cell =
          "[" + manifest.dataset_names[d] + "," + manifest.scenario_names[s] + "]";
      for (int d2 = 0; d2 < u; ++d2) {
        lp.problem.a_ub(row, var_index(d2, s, v)) = -(1.0 + beta) * equal_share;
        lp.problem.a_ub(row + 1, var_index(d2, s, v)) = (1.0 - beta) * equal_share;
      }
      lp.problem.a_ub(row, var_index(d, s, v)) += 1.0;
      lp.problem.a_ub(row + 1, var_index(d, s, v)) -= 1.0;
      lp.row_labels.push_back("share_upper" + cell);
      lp.row_labels.push_back("share_lower" + cell);
      row += 2;
    }
  }

  // Scenario bands: each scenario's total within (1 +- gamma) of an equal
  // split of the grand total.
  for (int s = 0; s < v; ++s) {
    for (int d = 0; d < u; ++d) {
      for (int s2 = 0; s2 < v; ++s2) {
        lp.problem.a_ub(row, var_index(d, s2, v)) = -(1.0 + gamma) / v;
        lp.problem.a_ub(row + 1, var_index(d, s2, v)) = (1.0 - gamma) / v;
      }
      lp.problem.a_ub(row, var_index(d, s, v)) += 1.0;
      lp.problem.a_ub(row + 1, var_index(d, s, v)) -= 1.0;
    }
    lp.row_labels.push_back("scenario_upper[" + manifest.scenario_names[s] + "]");
    lp.row_labels.push_back("scenario_lower[" + manifest.scenario_names[s] + "]");
    row += 2;
  }
  return lp;
}

Allocation solve_allocation(const DatasetManifest& manifest, double beta, double gamma) {
  const MixerLp lp = build_lp(manifest, beta, gamma);
  const LpSolution sol = lp_solve(lp.problem);
  const int u = static_cast<int>(manifest.dataset_names.size());
  const int v = static_cast<int>(manifest.scenario_names.size());

  Allocation alloc;
  alloc.beta = beta;
  alloc.gamma = gamma;
  alloc.objective = sol.objective;
  alloc.continuous = Eigen::MatrixXd::Zero(u, v);
  alloc.counts = Eigen::MatrixXi::Zero(u, v);

  struct Cell {
    double remainder;
    int dataset, scenario;
  };
  std::vector<Cell> cells;
  double total = 0.0;
  long long floored = 0;
  for (int d = 0; d < u; ++d) {
    for (int s = 0; s < v; ++s) {
      double q = sol.x(var_index(d, s, v));
      q = std::clamp(q, 0.0, static_cast<double>(manifest.capacities(d, s)));
      alloc.continuous(d, s) = q;
      const double fl = std::floor(q);
      alloc.counts(d, s) = static_cast<int>(fl);
      floored += static_cast<long long>(fl);
      total += q;
      cells.push_back({q - fl, d, s});
    }
  }

  // Hand the units lost to flooring back to the largest remainders; each
  // such cell has a fractional part, so the increment stays under capacity.
  long long extra = static_cast<long long>(std::floor(total + 1e-9)) - floored;
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    if (a.dataset != b.dataset) return a.dataset < b.dataset;
    return a.scenario < b.scenario;
  });
  for (const Cell& cell : cells) {
    if (extra <= 0) break;
    if (cell.remainder <= 1e-12) break;
    if (alloc.counts(cell.dataset, cell.scenario) + 1 >
        manifest.capacities(cell.dataset, cell.scenario)) {
      continue;
    }
    alloc.counts(cell.dataset, cell.scenario) += 1;
    --extra;
  }
  return alloc;
}

AllocationReport verify_allocation(const Eigen::MatrixXd& q, const DatasetManifest& manifest,
                                   double beta, double gamma, double tolerance) {
  const MixerLp lp = build_lp(manifest, beta, gamma);
  const int u = static_cast<int>(manifest.dataset_names.size());
  const int v = static_cast<int>(manifest.scenario_names.size());
  if (q.rows() != u || q.cols() != v) {
    throw ShapeMismatch("allocation does not match the manifest shape");
  }

  Eigen::VectorXd x(u * v);
  for (int d = 0; d < u; ++d) {
    for (int s = 0; s < v; ++s) x(var_index(d, s, v)) = q(d, s);
  }

  AllocationReport report;
  auto record = [&](const std::string& label, double slack) {
    ConstraintSlack c;
    c.label = label;
    c.slack = slack;
    c.violated = slack < -tolerance;
    if (c.violated) {
      ++report.violations;
      report.worst_slack = std::min(report.worst_slack, slack);
    }
    report.constraints.push_back(c);
  };

  for (int row = 0; row < lp.problem.a_ub.rows(); ++row) {
    record(lp.row_labels[static_cast<std::size_t>(row)],
           lp.problem.b_ub(row) - lp.problem.a_ub.row(row).dot(x));
  }
  for (int d = 0; d < u; ++d) {
    for (int s = 0; s < v; ++s) {
      const std::string cell =
          "[" + manifest.dataset_names[d] + "," + manifest.scenario_names[s] + "]";
      record("capacity" + cell, manifest.capacities(d, s) - q(d, s));
      record("nonnegative" + cell, q(d, s));
    }
  }
  return report;
}

}  // namespace camdense
