#include "camdense/fd_fit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "camdense/errors.hpp"
#include "camdense/nls.hpp"

namespace camdense {
namespace {

constexpr double kGolden = 0.6180339887498949;

void check_positive(const FdParams& p) {
  if (!(p.v_f_km_h > 0.0) || !(p.k_j_veh_km > 0.0)) {
    throw InputError("fundamental diagram parameters must be positive");
  }
  if (p.model == FdModel::newell && !(p.lambda_slope > 0.0)) {
    throw InputError("newell model needs a positive slope parameter");
  }
}

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-10 * (std::abs(b) + 1.0); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = f(x1);
    }
  }
  return (a + b) / 2.0;
}

}  // namespace

FdModel fd_model_from_name(const std::string& name) {
  if (name == "newell") return FdModel::newell;
  if (name == "greenshields") return FdModel::greenshields;
  throw InputError("unknown fundamental diagram model '" + name + "'");
}

std::string fd_model_name(FdModel model) {
  return model == FdModel::newell ? "newell" : "greenshields";
}

double newell_speed(double k_veh_km, const FdParams& params) {
  check_positive(params);
  if (!(k_veh_km > 0.0) || k_veh_km > params.k_j_veh_km) {
    throw DensityOutOfRange("newell model needs 0 < k <= k_j");
  }
  if (k_veh_km < 1e-6) return params.v_f_km_h;  // limit, avoids 1/k overflow
  const double spacing_gap = 1.0 / k_veh_km - 1.0 / params.k_j_veh_km;
  return params.v_f_km_h *
         (1.0 - std::exp(-params.lambda_slope / params.v_f_km_h * spacing_gap));
}

double greenshields_speed(double k_veh_km, const FdParams& params) {
  check_positive(params);
  if (k_veh_km < 0.0 || k_veh_km > params.k_j_veh_km) {
    throw DensityOutOfRange("greenshields model needs 0 <= k <= k_j");
  }
  return params.v_f_km_h * (1.0 - k_veh_km / params.k_j_veh_km);
}

double fd_speed(double k_veh_km, const FdParams& params) {
  return params.model == FdModel::newell ? newell_speed(k_veh_km, params)
                                         : greenshields_speed(k_veh_km, params);
}

double flow(double k_veh_km, double v_km_h) {
  if (k_veh_km < 0.0 || v_km_h < 0.0) {
    throw InputError("flow needs nonnegative density and speed");
  }
  return k_veh_km * v_km_h;
}

FdParams fit_fd(const std::vector<double>& k_veh_km, const std::vector<double>& v_km_h,
                FdModel model, std::uint64_t seed) {
  if (k_veh_km.size() != v_km_h.size()) {
    throw LengthMismatch("density and speed series differ in length");
  }
  const std::size_t min_points = model == FdModel::newell ? 3 : 2;
  if (k_veh_km.size() < min_points) {
    throw TooFewPoints("too few (density, speed) pairs for the chosen model");
  }
  double k_max = 0.0, v_max = 0.0;
  for (std::size_t i = 0; i < k_veh_km.size(); ++i) {
    if (!(k_veh_km[i] > 0.0)) {
      throw DensityOutOfRange("fit needs positive densities");
    }
    k_max = std::max(k_max, k_veh_km[i]);
    v_max = std::max(v_max, v_km_h[i]);
  }

  if (model == FdModel::greenshields) {
    // v = v_f - (v_f/k_j) k: plain linear regression gives the warm start;
    // on clean data it is already the least-squares optimum.
    const double n = static_cast<double>(k_veh_km.size());
    double sk = 0.0, sv = 0.0, skk = 0.0, skv = 0.0;
    for (std::size_t i = 0; i < k_veh_km.size(); ++i) {
      sk += k_veh_km[i];
      sv += v_km_h[i];
      skk += k_veh_km[i] * k_veh_km[i];
      skv += k_veh_km[i] * v_km_h[i];
    }
    const double denom = n * skk - sk * sk;
    double v_f0 = v_max > 0.0 ? v_max : 50.0;
    double k_j0 = std::min(2.0 * k_max, 1000.0);
    if (denom > 0.0) {
      const double slope = (n * skv - sk * sv) / denom;
      const double intercept = (sv - slope * sk) / n;
      if (slope < 0.0 && intercept > 0.0) {
        v_f0 = intercept;
        k_j0 = -intercept / slope;
      }
    }
    v_f0 = std::clamp(v_f0, 1e-6, 200.0);
    k_j0 = std::clamp(k_j0, k_max + 1e-6, 1000.0);

    auto model_fn = [](const Eigen::VectorXd& p, double k) {
      return p(0) * (1.0 - k / p(1));
    };
    Eigen::VectorXd p0(2);
    p0 << v_f0, k_j0;
    CmaBounds bounds;
    bounds.lower = Eigen::VectorXd(2);
    bounds.upper = Eigen::VectorXd(2);
    bounds.lower << 1e-6, k_max + 1e-6;
    bounds.upper << 200.0, 1000.0;
    NlsConfig cfg;
    cfg.seed = seed;
    const NlsResult r = nls_fit(model_fn, k_veh_km, v_km_h, p0, bounds, cfg);
    FdParams out;
    out.model = FdModel::greenshields;
    out.v_f_km_h = r.params(0);
    out.k_j_veh_km = r.params(1);
    return out;
  }

  auto model_fn = [](const Eigen::VectorXd& p, double k) {
    const double spacing_gap = 1.0 / k - 1.0 / p(1);
    return p(0) * (1.0 - std::exp(-p(2) / p(0) * spacing_gap));
  };
  Eigen::VectorXd p0(3);
  const double k_j0 = std::clamp(2.0 * k_max, k_max + 1e-6, 1000.0);
  p0 << std::clamp(v_max, 1e-3, 200.0), k_j0, std::clamp(10.0 * k_j0, 1.0, 1e5);
  CmaBounds bounds;
  bounds.lower = Eigen::VectorXd(3);
  bounds.upper = Eigen::VectorXd(3);
  bounds.lower << 1e-6, k_max + 1e-6, 1e-6;
  bounds.upper << 200.0, 1000.0, 1e5;
  NlsConfig cfg;
  cfg.seed = seed;
  const NlsResult r = nls_fit(model_fn, k_veh_km, v_km_h, p0, bounds, cfg);
  FdParams out;
  out.model = FdModel::newell;
  out.v_f_km_h = r.params(0);
  out.k_j_veh_km = r.params(1);
  out.lambda_slope = r.params(2);
  return out;
}

double max_flow(const FdParams& params) {
  const double k = max_flow_density(params);
  return flow(k, fd_speed(k, params));
}

double max_flow_density(const FdParams& params) {
  check_positive(params);
  if (params.model == FdModel::greenshields) {
    // vertex of the parabola q(k) = v_f k (1 - k/k_j); closed form keeps the
    // identity q_max = v_f k_j / 4 exact
    return params.k_j_veh_km / 2.0;
  }
  auto q = [&](double k) { return k * fd_speed(k, params); };
  // coarse scan brackets the peak, golden section refines it
  const int n = 2000;
  double best_k = params.k_j_veh_km / 2.0;
  double best_q = -1.0;
  for (int i = 1; i < n; ++i) {
    const double k = params.k_j_veh_km * i / n;
    const double v = q(k);
    if (v > best_q) {
      best_q = v;
      best_k = k;
    }
  }
  const double step = params.k_j_veh_km / n;
  const double lo = std::max(step / 2.0, best_k - step);
  const double hi = std::min(params.k_j_veh_km, best_k + step);
  return golden_max(q, lo, hi);
}

}  // namespace camdense
