#ifndef CAMDENSE_DENSITY_HPP
#define CAMDENSE_DENSITY_HPP

#include <map>
#include <string>
#include <vector>

#include "camdense/lanes.hpp"

namespace camdense {

/// Mean density of one lane over one time interval.
struct DensityRecord {
  std::string camera_id;
  int lane_id = 0;
  double interval_start_utc_s = 0.0;
  double interval_length_s = 0.0;
  double k_veh_per_km = 0.0;
  int n_frames = 0;
};

/// Per-frame vehicle counts by lane for one camera snapshot.
struct FrameCounts {
  double ts_utc_s = 0.0;
  std::string camera_id;
  std::map<int, int> counts_by_lane;
};

/// An interval with no frames at all; emitted instead of a zero-density
/// record so outages stay distinguishable from empty roads.
struct DensityGap {
  std::string camera_id;
  double interval_start_utc_s = 0.0;
};

struct DensitySeries {
  std::vector<DensityRecord> records;
  std::vector<DensityGap> gaps;
};

/// k = N / (length_m / 1000), vehicles per kilometer per lane. Throws
/// ZeroLaneLength when a counted lane has no positive length.
std::map<int, double> density_from_counts(const std::map<int, int>& counts,
                                          const std::vector<LaneGeometry>& lanes);

/// Per-frame densities averaged within fixed intervals, per camera and
/// lane. Intervals between the first and last frame of a camera with no
/// frames become gaps.
DensitySeries aggregate(const std::vector<FrameCounts>& frames,
                        const std::vector<LaneGeometry>& lanes, double interval_s);

struct SeriesErrorStats {
  double rmse = 0.0;
  double mae = 0.0;
  double mape_percent = 0.0;
  int mape_skipped = 0;  // points with zero truth excluded from the MAPE mean
};

/// Standard RMSE/MAE/MAPE over aligned series; throws LengthMismatch.
SeriesErrorStats error_metrics(const std::vector<double>& estimated,
                               const std::vector<double>& truth);

/// One vehicle seen in a frame, located along the road axis.
struct VehicleObs {
  int lane_id = 0;
  double y_m = 0.0;
};

struct StFrame {
  double ts_utc_s = 0.0;
  std::vector<VehicleObs> vehicles;
};

/// Cell of the space-time density grid. Density pools all lanes:
/// vehicles in the cell per kilometer of road.
struct StCell {
  long long time_bin = 0;
  int space_bin = 0;
  double mean_k_veh_per_km = 0.0;
  int n_frames = 0;
  int vehicle_count = 0;
};

/// Bins vehicles by time and road position; every (time, space) cell in the
/// covered span is emitted, zero-frame time bins with n_frames = 0.
/// Vehicles outside [y_min, y_max) are dropped.
std::vector<StCell> st_grid(const std::vector<StFrame>& frames, double time_bin_s,
                            double space_bin_m, double y_min_m, double y_max_m);

/// Day-of-week (Monday = 0) by time-of-day pivot of density records.
struct DowCell {
  int day_of_week = 0;
  int time_of_day_bin = 0;
  double mean_k_veh_per_km = 0.0;
  int n_records = 0;
};

std::vector<DowCell> day_week_pivot(const std::vector<DensityRecord>& records,
                                    double time_bin_s);

}  // namespace camdense

#endif  // CAMDENSE_DENSITY_HPP
