#include "camdense/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "camdense/rng.hpp"

namespace camdense {

namespace {

constexpr double kBoundPenalty = 1e6;
constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double f) { return std::isnan(f) ? kInf : f; }

Eigen::VectorXd clamp_to_bounds(const Eigen::VectorXd& x, const std::optional<CmaBounds>& bounds) {
  if (!bounds) return x;
  return x.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
}

}  // namespace

CmaResult cmaes_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                         const Eigen::VectorXd& x0, const CmaConfig& config,
                         const std::optional<CmaBounds>& bounds) {
  const int d = static_cast<int>(x0.size());
  if (d < 1) throw InputError("cmaes: empty start point");
  if (config.max_evaluations < 1) throw InputError("cmaes: max_evaluations must be positive");

  Eigen::VectorXd scale = config.sigma0.size() == 0 ? Eigen::VectorXd::Ones(d) : config.sigma0;
  if (scale.size() != d) throw InputError("cmaes: sigma0 size does not match dimension");
  if ((scale.array() <= 0.0).any()) throw InputError("cmaes: sigma0 must be positive");

  int lambda = config.population_size;
  if (lambda == 0) lambda = 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(d))));
  if (lambda < 4) throw InputError("cmaes: population_size must be at least 4");

  // Evaluate a candidate: project into the box, penalize the violation in
  // sigma0-normalized units. Keeps the penalized objective totally ordered
  // even when raw samples leave the feasible region.
  int evaluations = 0;
  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd* feasible_out) {
    Eigen::VectorXd xf = clamp_to_bounds(x, bounds);
    double penalty = 0.0;
    if (bounds) {
      const Eigen::ArrayXd viol = (x - xf).array() / scale.array();
      penalty = kBoundPenalty * viol.square().sum();
    }
    ++evaluations;
    if (feasible_out) *feasible_out = xf;
    return sanitize(objective(xf)) + penalty;
  };

  CmaResult best;
  {
    Eigen::VectorXd x0f;
    const double f0 = evaluate(x0, &x0f);
    if (!std::isfinite(f0)) throw ObjectiveNonFinite();
    best.x = x0f;
    best.f = f0;
  }

  // Strategy parameters, standard settings.
  const int mu = lambda / 2;
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights(i) = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (d + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
  const double c_1 = 2.0 / ((d + 1.3) * (d + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                              ((d + 2.0) * (d + 2.0) + mu_eff));
  const double chi_n = std::sqrt(static_cast<double>(d)) *
                       (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));

  Eigen::VectorXd mean = x0;
  double sigma = 1.0;
  Eigen::MatrixXd cov = scale.array().square().matrix().asDiagonal();
  Eigen::VectorXd path_sigma = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd path_c = Eigen::VectorXd::Zero(d);

  Rng rng(config.seed);
  std::vector<Eigen::VectorXd> samples(lambda), feasibles(lambda);
  std::vector<double> fitness(lambda);
  std::vector<int> order(lambda);
  std::deque<double> best_history;
  const std::size_t history_len = 10 + static_cast<std::size_t>(std::ceil(30.0 * d / lambda));

  int generation = 0;
  std::string stop_reason;
  while (stop_reason.empty()) {
    if (evaluations >= config.max_evaluations) {
      stop_reason = "max_evaluations";
      break;
    }
    ++generation;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    Eigen::VectorXd eigvals = eig.eigenvalues().cwiseMax(1e-30);
    const Eigen::MatrixXd& basis = eig.eigenvectors();
    const Eigen::VectorXd sqrt_vals = eigvals.cwiseSqrt();
    if (sqrt_vals.maxCoeff() > 1e7 * sqrt_vals.minCoeff()) {
      stop_reason = "condition_number";
      break;
    }

    const int batch = std::min(lambda, config.max_evaluations - evaluations);
    for (int k = 0; k < batch; ++k) {
      Eigen::VectorXd z(d);
      for (int i = 0; i < d; ++i) z(i) = rng.normal();
      samples[k] = mean + sigma * (basis * (sqrt_vals.asDiagonal() * z));
      fitness[k] = evaluate(samples[k], &feasibles[k]);
    }
    if (batch < lambda) {
      // Budget exhausted mid-generation; fold the partial batch into the
      // best-so-far and stop without updating the distribution.
      for (int k = 0; k < batch; ++k) {
        if (fitness[k] < best.f) {
          best.f = fitness[k];
          best.x = feasibles[k];
        }
      }
      stop_reason = "max_evaluations";
      break;
    }

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitness[a] < fitness[b]; });
    if (fitness[order[0]] < best.f) {
      best.f = fitness[order[0]];
      best.x = feasibles[order[0]];
    }

    const Eigen::VectorXd old_mean = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += weights(i) * samples[order[i]];
    const Eigen::VectorXd y_w = (mean - old_mean) / sigma;

    // C^(-1/2) y_w via the eigenbasis.
    const Eigen::VectorXd whitened =
        basis * (sqrt_vals.cwiseInverse().asDiagonal() * (basis.transpose() * y_w));
    path_sigma = (1.0 - c_sigma) * path_sigma +
                 std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * whitened;

    const double ps_norm = path_sigma.norm();
    const bool h_sigma =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * generation)) / chi_n <
        1.4 + 2.0 / (d + 1.0);
    path_c = (1.0 - c_c) * path_c;
    if (h_sigma) path_c += std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < mu; ++i) {
      const Eigen::VectorXd y = (samples[order[i]] - old_mean) / sigma;
      rank_mu.noalias() += weights(i) * y * y.transpose();
    }
    const double delta_h = (1.0 - (h_sigma ? 1.0 : 0.0)) * c_c * (2.0 - c_c);
    cov = (1.0 - c_1 - c_mu) * cov +
          c_1 * (path_c * path_c.transpose() + delta_h * cov) + c_mu * rank_mu;
    cov = 0.5 * (cov + cov.transpose().eval());

    sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

    // Flat-fitness safeguard: widen the search instead of shrinking onto a
    // plateau.
    if (fitness[order[0]] == fitness[order[std::min(mu, lambda - 1)]]) sigma *= std::exp(0.2);

    best_history.push_back(best.f);
    if (best_history.size() > history_len) best_history.pop_front();
    const double gen_spread = fitness[order[lambda - 1]] - fitness[order[0]];
    const double hist_spread =
        *std::max_element(best_history.begin(), best_history.end()) -
        *std::min_element(best_history.begin(), best_history.end());
    if (best_history.size() == history_len && std::isfinite(gen_spread) &&
        gen_spread < config.tol_fun && hist_spread < config.tol_fun) {
      stop_reason = "tol_fun";
    }
    if (sigma * sqrt_vals.maxCoeff() < 1e-14 * scale.minCoeff()) stop_reason = "tol_x";
  }

  best.evaluations = evaluations;
  best.generations = generation;
  best.stop_reason = stop_reason;
  return best;
}

}  // namespace camdense
