#include "camdense/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace camdense {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-7;

// Tableau layout: rows 0..m-1 are constraints, columns 0..total-1 are
// variables (structural, slack, artificial), the last column is the rhs.
struct Tableau {
  Eigen::MatrixXd t;
  std::vector<int> basis;

  void pivot(int row, int col) {
    t.row(row) /= t(row, col);
    for (int r = 0; r < t.rows(); ++r) {
      if (r != row && std::abs(t(r, col)) > 0.0) t.row(r) -= t(r, col) * t.row(row);
    }
    basis[static_cast<std::size_t>(row)] = col;
  }
};

// Bland's rule: entering = lowest-index column with negative reduced cost,
// leaving = lowest-index basic variable among minimum-ratio rows. Guarantees
// termination on degenerate instances.
// Returns false when the current basis is optimal; throws Unbounded.
bool simplex_step(Tableau& tab, const Eigen::VectorXd& reduced, int num_cols) {
  int entering = -1;
  for (int j = 0; j < num_cols; ++j) {
    if (reduced(j) < -kPivotTol) {
      entering = j;
      break;
    }
  }
  if (entering < 0) return false;

  const int m = static_cast<int>(tab.t.rows());
  const int rhs_col = static_cast<int>(tab.t.cols()) - 1;
  int leaving = -1;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (int r = 0; r < m; ++r) {
    const double a = tab.t(r, entering);
    if (a > kPivotTol) {
      const double ratio = tab.t(r, rhs_col) / a;
      if (ratio < best_ratio - kPivotTol ||
          (ratio < best_ratio + kPivotTol &&
           (leaving < 0 || tab.basis[static_cast<std::size_t>(r)] <
                               tab.basis[static_cast<std::size_t>(leaving)]))) {
        best_ratio = ratio;
        leaving = r;
      }
    }
  }
  if (leaving < 0) throw Unbounded();
  tab.pivot(leaving, entering);
  return true;
}

Eigen::VectorXd reduced_costs(const Tableau& tab, const Eigen::VectorXd& costs) {
  // reduced_j = c_j - c_B . B^{-1} A_j, computed directly from the updated
  // tableau: rows already hold B^{-1} A.
  const int m = static_cast<int>(tab.t.rows());
  const int n = static_cast<int>(costs.size());
  Eigen::VectorXd reduced = costs;
  for (int r = 0; r < m; ++r) {
    const double cb = costs(tab.basis[static_cast<std::size_t>(r)]);
    if (cb != 0.0) reduced -= cb * tab.t.row(r).head(n).transpose();
  }
  return reduced;
}

}  // namespace

LpSolution lp_solve(const LpProblem& problem) {
  const int n = static_cast<int>(problem.c.size());
  if (problem.lower.size() != n || problem.upper.size() != n)
    throw InputError("lp_solve: bounds size mismatch");
  if (!problem.lower.allFinite()) throw InputError("lp_solve: lower bounds must be finite");
  if (problem.a_ub.size() > 0 && problem.a_ub.cols() != n)
    throw InputError("lp_solve: constraint matrix width mismatch");
  for (int j = 0; j < n; ++j) {
    if (problem.upper(j) < problem.lower(j)) throw Infeasible();
  }

  // Shift to y = x - lower >= 0; finite upper bounds become rows y <= u - l.
  const int m_ub = static_cast<int>(problem.b_ub.size());
  std::vector<int> bounded;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(problem.upper(j))) bounded.push_back(j);
  }
  const int m = m_ub + static_cast<int>(bounded.size());

  Eigen::MatrixXd a(m, n);
  Eigen::VectorXd b(m);
  if (m_ub > 0) {
    a.topRows(m_ub) = problem.a_ub;
    b.head(m_ub) = problem.b_ub - problem.a_ub * problem.lower;
  }
  for (std::size_t i = 0; i < bounded.size(); ++i) {
    const int r = m_ub + static_cast<int>(i);
    a.row(r).setZero();
    a(r, bounded[i]) = 1.0;
    b(r) = problem.upper(bounded[i]) - problem.lower(bounded[i]);
  }

  // Slacks for every row; artificials for rows whose rhs is negative after
  // slack insertion (those get the row negated).
  std::vector<int> artificial_rows;
  for (int r = 0; r < m; ++r) {
    if (b(r) < 0.0) artificial_rows.push_back(r);
  }
  const int num_art = static_cast<int>(artificial_rows.size());
  const int total = n + m + num_art;

  Tableau tab;
  tab.t = Eigen::MatrixXd::Zero(m, total + 1);
  tab.basis.assign(static_cast<std::size_t>(m), -1);
  tab.t.block(0, 0, m, n) = a;
  for (int r = 0; r < m; ++r) {
    tab.t(r, n + r) = 1.0;
    tab.t(r, total) = b(r);
    tab.basis[static_cast<std::size_t>(r)] = n + r;
  }
  for (int k = 0; k < num_art; ++k) {
    const int r = artificial_rows[static_cast<std::size_t>(k)];
    tab.t.row(r) = -tab.t.row(r);
    tab.t(r, n + m + k) = 1.0;
    tab.basis[static_cast<std::size_t>(r)] = n + m + k;
  }

  if (num_art > 0) {
    // Phase 1: minimize the artificial sum.
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total);
    phase1.tail(num_art).setConstant(1.0);
    while (simplex_step(tab, reduced_costs(tab, phase1), total)) {
    }
    double art_value = 0.0;
    for (int r = 0; r < m; ++r) {
      if (tab.basis[static_cast<std::size_t>(r)] >= n + m)
        art_value += tab.t(r, total);
    }
    if (art_value > kFeasTol) throw Infeasible();
    // Pivot leftover degenerate artificials out of the basis when possible.
    for (int r = 0; r < m; ++r) {
      if (tab.basis[static_cast<std::size_t>(r)] >= n + m) {
        for (int j = 0; j < n + m; ++j) {
          if (std::abs(tab.t(r, j)) > kPivotTol) {
            tab.pivot(r, j);
            break;
          }
        }
      }
    }
  }

  // Phase 2: maximize c.y == minimize (-c).y, artificial columns frozen.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(total);
  phase2.head(n) = -problem.c;
  const int active_cols = n + m;
  while (simplex_step(tab, reduced_costs(tab, phase2), active_cols)) {
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r) {
    const int bv = tab.basis[static_cast<std::size_t>(r)];
    if (bv < n) y(bv) = tab.t(r, total);
  }
  LpSolution sol;
  sol.x = y + problem.lower;
  sol.objective = problem.c.dot(sol.x);
  return sol;
}

}  // namespace camdense
