#ifndef CAMDENSE_CMAES_HPP
#define CAMDENSE_CMAES_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "camdense/errors.hpp"

namespace camdense {

/// Covariance Matrix Adaptation Evolution Strategy, (mu/mu_w, lambda) with
/// rank-1 and rank-mu covariance updates and cumulative step-size control.
/// Deterministic for a fixed seed.

struct CmaConfig {
  /// Samples per generation; 0 selects 4 + floor(3 ln d).
  int population_size = 0;
  /// Per-coordinate initial step scale. Sampling starts from covariance
  /// diag(sigma0^2), so coordinates with very different magnitudes (pixel
  /// focal lengths vs radians) can share one run. Empty selects all-ones.
  Eigen::VectorXd sigma0;
  int max_evaluations = 20000;
  std::uint64_t seed = 0;
  /// Stop when the objective spread within a generation and across recent
  /// generations falls below this.
  double tol_fun = 1e-12;
};

/// Box constraints, enforced by projection plus a quadratic distance
/// penalty in sigma0-normalized coordinates. Candidate solutions returned
/// to the caller are always feasible.
struct CmaBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct CmaResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evaluations = 0;
  int generations = 0;
  std::string stop_reason;
};

/// Minimizes the objective starting at x0. The reported minimum never
/// exceeds f(x0) (the start point seeds the best-so-far) and the
/// evaluation count never exceeds config.max_evaluations.
/// Throws ObjectiveNonFinite when f(x0) is NaN or infinite; non-finite
/// values at later samples are tolerated and rank last.
CmaResult cmaes_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                         const Eigen::VectorXd& x0, const CmaConfig& config,
                         const std::optional<CmaBounds>& bounds = std::nullopt);

}  // namespace camdense

#endif  // CAMDENSE_CMAES_HPP
