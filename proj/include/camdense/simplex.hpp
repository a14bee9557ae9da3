#ifndef CAMDENSE_SIMPLEX_HPP
#define CAMDENSE_SIMPLEX_HPP

#include <Eigen/Core>

#include "camdense/errors.hpp"

namespace camdense {

/// Maximize c.x subject to A_ub x <= b_ub and lower <= x <= upper.
/// Lower bounds must be finite; +infinity upper bounds are allowed.
struct LpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// Dense two-phase primal simplex with Bland's rule. Intended for the small
/// instances this project produces (tens of variables); throws Infeasible or
/// Unbounded as appropriate.
LpSolution lp_solve(const LpProblem& problem);

}  // namespace camdense

#endif  // CAMDENSE_SIMPLEX_HPP
