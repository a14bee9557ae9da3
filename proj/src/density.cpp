#include "camdense/density.hpp"

#include <algorithm>
#include <cmath>

#include "camdense/errors.hpp"

namespace camdense {
namespace {

long long floor_bin(double value, double width) {
  return static_cast<long long>(std::floor(value / width));
}

}  // namespace

std::map<int, double> density_from_counts(const std::map<int, int>& counts,
                                          const std::vector<LaneGeometry>& lanes) {
  std::map<int, double> length_by_lane;
  for (const auto& lane : lanes) length_by_lane[lane.lane_id] = lane.length_m;

  std::map<int, double> densities;
  for (const auto& [lane_id, n] : counts) {
    const auto it = length_by_lane.find(lane_id);
    if (it == length_by_lane.end()) {
      throw InputError("counts reference unknown lane " + std::to_string(lane_id));
    }
    if (!(it->second > 0.0)) {
      throw ZeroLaneLength("lane " + std::to_string(lane_id) + " has nonpositive length");
    }
    densities[lane_id] = static_cast<double>(n) / (it->second / 1000.0);
  }
  return densities;
}

DensitySeries aggregate(const std::vector<FrameCounts>& frames,
                        const std::vector<LaneGeometry>& lanes, double interval_s) {
  if (!(interval_s > 0.0)) throw InputError("interval must be positive");

  // camera -> interval bin -> lane -> (density sum, frame count)
  std::map<std::string, std::map<long long, std::map<int, std::pair<double, int>>>> acc;
  std::map<std::string, std::pair<long long, long long>> span;  // camera -> [min,max] bin

  for (const auto& frame : frames) {
    const long long bin = floor_bin(frame.ts_utc_s, interval_s);
    const std::map<int, double> k = density_from_counts(frame.counts_by_lane, lanes);
    auto& by_lane = acc[frame.camera_id][bin];
    for (const auto& [lane_id, value] : k) {
      auto& cell = by_lane[lane_id];
      cell.first += value;
      cell.second += 1;
    }
    auto it = span.find(frame.camera_id);
    if (it == span.end()) {
      span[frame.camera_id] = {bin, bin};
    } else {
      it->second.first = std::min(it->second.first, bin);
      it->second.second = std::max(it->second.second, bin);
    }
  }

  DensitySeries series;
  for (const auto& [camera, by_bin] : acc) {
    const auto [lo, hi] = span.at(camera);
    for (long long bin = lo; bin <= hi; ++bin) {
      const auto it = by_bin.find(bin);
      if (it == by_bin.end()) {
        series.gaps.push_back({camera, static_cast<double>(bin) * interval_s});
        continue;
      }
      for (const auto& [lane_id, cell] : it->second) {
        DensityRecord rec;
        rec.camera_id = camera;
        rec.lane_id = lane_id;
        rec.interval_start_utc_s = static_cast<double>(bin) * interval_s;
        rec.interval_length_s = interval_s;
        rec.k_veh_per_km = cell.first / cell.second;
        rec.n_frames = cell.second;
        series.records.push_back(rec);
      }
    }
  }
  return series;
}

SeriesErrorStats error_metrics(const std::vector<double>& estimated,
                               const std::vector<double>& truth) {
  if (estimated.size() != truth.size()) {
    throw LengthMismatch("estimated and truth series differ in length");
  }
  if (estimated.empty()) throw InputError("error metrics need at least one point");

  SeriesErrorStats stats;
  double sum_sq = 0.0, sum_abs = 0.0, sum_ape = 0.0;
  int n_ape = 0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double err = estimated[i] - truth[i];
    sum_sq += err * err;
    sum_abs += std::abs(err);
    if (truth[i] != 0.0) {
      sum_ape += std::abs(err / truth[i]);
      ++n_ape;
    } else {
      ++stats.mape_skipped;
    }
  }
  const double n = static_cast<double>(estimated.size());
  stats.rmse = std::sqrt(sum_sq / n);
  stats.mae = sum_abs / n;
  stats.mape_percent = n_ape > 0 ? 100.0 * sum_ape / n_ape : 0.0;
  return stats;
}

std::vector<StCell> st_grid(const std::vector<StFrame>& frames, double time_bin_s,
                            double space_bin_m, double y_min_m, double y_max_m) {
  if (!(time_bin_s > 0.0) || !(space_bin_m > 0.0)) {
    throw InputError("grid bins must be positive");
  }
  if (!(y_max_m > y_min_m)) throw InputError("empty road range");
  if (frames.empty()) return {};

  const int n_space = static_cast<int>(std::ceil((y_max_m - y_min_m) / space_bin_m));

  long long lo = floor_bin(frames.front().ts_utc_s, time_bin_s);
  long long hi = lo;
  std::map<long long, std::pair<int, std::vector<int>>> acc;  // bin -> (frames, counts per space bin)
  for (const auto& frame : frames) {
    const long long bin = floor_bin(frame.ts_utc_s, time_bin_s);
    lo = std::min(lo, bin);
    hi = std::max(hi, bin);
    auto& cell = acc[bin];
    if (cell.second.empty()) cell.second.assign(static_cast<std::size_t>(n_space), 0);
    cell.first += 1;
    for (const auto& v : frame.vehicles) {
      if (v.y_m < y_min_m || v.y_m >= y_max_m) continue;
      const int sbin = static_cast<int>((v.y_m - y_min_m) / space_bin_m);
      cell.second[static_cast<std::size_t>(std::min(sbin, n_space - 1))] += 1;
    }
  }

  std::vector<StCell> cells;
  for (long long bin = lo; bin <= hi; ++bin) {
    const auto it = acc.find(bin);
    for (int s = 0; s < n_space; ++s) {
      StCell cell;
      cell.time_bin = bin;
      cell.space_bin = s;
      if (it != acc.end()) {
        cell.n_frames = it->second.first;
        cell.vehicle_count = it->second.second[static_cast<std::size_t>(s)];
        cell.mean_k_veh_per_km =
            static_cast<double>(cell.vehicle_count) / cell.n_frames / (space_bin_m / 1000.0);
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

std::vector<DowCell> day_week_pivot(const std::vector<DensityRecord>& records,
                                    double time_bin_s) {
  if (!(time_bin_s > 0.0)) throw InputError("time bin must be positive");
  std::map<std::pair<int, int>, std::pair<double, int>> acc;
  for (const auto& rec : records) {
    const long long day = floor_bin(rec.interval_start_utc_s, 86400.0);
    // epoch day 0 was a Thursday; shift so Monday = 0
    const int dow = static_cast<int>(((day % 7) + 7 + 3) % 7);
    const double seconds_of_day = rec.interval_start_utc_s - static_cast<double>(day) * 86400.0;
    const int tod = static_cast<int>(seconds_of_day / time_bin_s);
    auto& cell = acc[{dow, tod}];
    cell.first += rec.k_veh_per_km;
    cell.second += 1;
  }
  std::vector<DowCell> cells;
  for (const auto& [key, value] : acc) {
    DowCell cell;
    cell.day_of_week = key.first;
    cell.time_of_day_bin = key.second;
    cell.mean_k_veh_per_km = value.first / value.second;
    cell.n_records = value.second;
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace camdense
