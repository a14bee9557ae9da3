#include "camdense/measurement.hpp"

#include <cmath>

#include "camdense/errors.hpp"

namespace camdense {
namespace {

Point3 ground_point(const Point2& pixel, const CameraParams& params, const ImageSize& size) {
  const Ray ray = back_project_ray(pixel, params, size);
  const double t = intersect_plane_t(ray, 0.0);  // throws RayParallelToPlane
  if (t <= 0.0) {
    throw PointBehindCamera("pixel meets the ground plane behind the camera");
  }
  Point3 p = ray.origin + t * ray.direction;
  p.z() = 0.0;
  return p;
}

void accumulate_segments(const GroundSegmentSet& set, const CameraParams& params,
                         const ImageSize& size, double* sum_sq, double* sum_abs,
                         double* sum_ape, int* n) {
  if (!set.true_length_m.has_value()) throw MissingGroundTruth();
  if (set.points_px.size() < 2) {
    throw InputError("segment set needs at least 2 points");
  }
  const double truth = *set.true_length_m;
  for (std::size_t i = 0; i + 1 < set.points_px.size(); ++i) {
    if (set.points_px[i] == set.points_px[i + 1]) {
      throw InputError("segment set has coincident consecutive points");
    }
    const double est = ground_distance(set.points_px[i], set.points_px[i + 1], params, size);
    const double err = est - truth;
    *sum_sq += err * err;
    *sum_abs += std::abs(err);
    *sum_ape += std::abs(err) / truth;
    ++*n;
  }
}

}  // namespace

double ground_distance(const Point2& p1, const Point2& p2, const CameraParams& params,
                       const ImageSize& size) {
  return (ground_point(p1, params, size) - ground_point(p2, params, size)).norm();
}

LengthErrorStats evaluate_markings(const GroundSegmentSet& segments, const CameraParams& params,
                                   const ImageSize& size) {
  return evaluate_markings(std::vector<GroundSegmentSet>{segments}, params, size);
}

LengthErrorStats evaluate_markings(const std::vector<GroundSegmentSet>& sets,
                                   const CameraParams& params, const ImageSize& size) {
  double sum_sq = 0.0, sum_abs = 0.0, sum_ape = 0.0;
  int n = 0;
  for (const auto& set : sets) {
    accumulate_segments(set, params, size, &sum_sq, &sum_abs, &sum_ape, &n);
  }
  if (n == 0) throw InputError("no segments to evaluate");
  LengthErrorStats stats;
  stats.rmse_m = std::sqrt(sum_sq / n);
  stats.mae_m = sum_abs / n;
  stats.mape_percent = 100.0 * sum_ape / n;
  stats.n_segments = n;
  return stats;
}

double lane_length(const LaneGeometry& lane, const CameraParams& params, const ImageSize& size) {
  if (lane.centerline_px.size() < 2) {
    throw InputError("lane " + std::to_string(lane.lane_id) +
                     " centerline needs at least 2 points");
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < lane.centerline_px.size(); ++i) {
    total += ground_distance(lane.centerline_px[i], lane.centerline_px[i + 1], params, size);
  }
  return total;
}

}  // namespace camdense
