#ifndef CAMDENSE_FD_FIT_HPP
#define CAMDENSE_FD_FIT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace camdense {

enum class FdModel { newell, greenshields };

FdModel fd_model_from_name(const std::string& name);  // throws InputError
std::string fd_model_name(FdModel model);

/// Fundamental-diagram parameters. lambda_slope applies to the Newell model
/// only (slope of its speed-spacing curve).
struct FdParams {
  FdModel model = FdModel::newell;
  double v_f_km_h = 0.0;    // free-flow speed
  double k_j_veh_km = 0.0;  // jam density
  double lambda_slope = 0.0;
};

/// v = v_f (1 - exp(-lambda/v_f (1/k - 1/k_j))) for 0 < k <= k_j; densities
/// below 1e-6 return the k -> 0 limit v_f. Throws DensityOutOfRange.
double newell_speed(double k_veh_km, const FdParams& params);

/// v = v_f (1 - k/k_j) for 0 <= k <= k_j. Throws DensityOutOfRange.
double greenshields_speed(double k_veh_km, const FdParams& params);

double fd_speed(double k_veh_km, const FdParams& params);

/// q = k * v, vehicles per hour per lane.
double flow(double k_veh_km, double v_km_h);

/// Least-squares fit of the chosen model to (density, speed) pairs. Bounds:
/// v_f in (0, 200], k_j in (max k, 1000], lambda in (0, 1e5]. Needs >= 3
/// points for Newell, >= 2 for Greenshields, all densities positive.
FdParams fit_fd(const std::vector<double>& k_veh_km, const std::vector<double>& v_km_h,
                FdModel model, std::uint64_t seed = 0);

/// Maximum of q(k) = k * speed(k) over (0, k_j]. Greenshields uses the
/// closed-form vertex at k_j/2, so q_max = v_f * k_j / 4 holds exactly;
/// Newell is located by a deterministic scan plus golden-section refinement.
double max_flow(const FdParams& params);

/// Density achieving max_flow.
double max_flow_density(const FdParams& params);

}  // namespace camdense

#endif  // CAMDENSE_FD_FIT_HPP
