#include "camdense/nls.hpp"

#include <cmath>

#include "camdense/errors.hpp"

namespace camdense {

NlsResult nls_fit(const std::function<double(const Eigen::VectorXd&, double)>& model,
                  const std::vector<double>& xs, const std::vector<double>& ys,
                  const Eigen::VectorXd& p0, const std::optional<CmaBounds>& bounds,
                  const NlsConfig& config) {
  if (xs.size() != ys.size()) {
    throw LengthMismatch("nls_fit: xs and ys differ in length");
  }
  if (static_cast<Eigen::Index>(xs.size()) < p0.size()) {
    throw TooFewPoints("nls_fit: fewer data points than parameters");
  }

  auto objective = [&](const Eigen::VectorXd& p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double r = model(p, xs[i]) - ys[i];
      sum += r * r;
    }
    return sum;
  };

  CmaConfig cma;
  cma.max_evaluations = config.max_evaluations;
  cma.seed = config.seed;
  cma.tol_fun = config.tol_fun;
  // Scale each coordinate's initial spread to the parameter magnitude so
  // widely different units (speeds vs densities) search comparably.
  cma.sigma0 = Eigen::VectorXd(p0.size());
  for (Eigen::Index i = 0; i < p0.size(); ++i) {
    cma.sigma0(i) = std::max(0.3 * std::abs(p0(i)), 1e-3);
  }

  const CmaResult r = cmaes_minimize(objective, p0, cma, bounds);
  return NlsResult{r.x, r.f};
}

}  // namespace camdense
