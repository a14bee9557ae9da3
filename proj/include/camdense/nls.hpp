#ifndef CAMDENSE_NLS_HPP
#define CAMDENSE_NLS_HPP

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "camdense/cmaes.hpp"

namespace camdense {

/// Nonlinear least squares on scalar (x, y) data, backed by CMA-ES on the
/// squared-residual sum. Good enough for the low-dimensional curve fits in
/// this project; not a general trust-region solver.

struct NlsConfig {
  int max_evaluations = 20000;
  std::uint64_t seed = 0;
  double tol_fun = 1e-14;
};

struct NlsResult {
  Eigen::VectorXd params;
  double residual_sum_squares = 0.0;
};

/// Fits model(params, x) -> y to the data. Throws TooFewPoints when there
/// are fewer data points than parameters. The residual at the fit never
/// exceeds the residual at p0.
NlsResult nls_fit(const std::function<double(const Eigen::VectorXd&, double)>& model,
                  const std::vector<double>& xs, const std::vector<double>& ys,
                  const Eigen::VectorXd& p0, const std::optional<CmaBounds>& bounds = std::nullopt,
                  const NlsConfig& config = {});

}  // namespace camdense

#endif  // CAMDENSE_NLS_HPP
