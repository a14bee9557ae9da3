#ifndef CAMDENSE_MEASUREMENT_HPP
#define CAMDENSE_MEASUREMENT_HPP

#include <optional>
#include <vector>

#include "camdense/geometry.hpp"
#include "camdense/lanes.hpp"

namespace camdense {

/// An annotated polyline of road-marking points with a known per-segment
/// ground-truth length (consecutive points delimit one segment each).
struct GroundSegmentSet {
  std::vector<Point2> points_px;
  std::optional<double> true_length_m;
};

struct LengthErrorStats {
  double rmse_m = 0.0;
  double mae_m = 0.0;
  double mape_percent = 0.0;
  int n_segments = 0;
};

/// Metric distance between two pixels on the road surface: both are
/// back-projected onto the plane Z=0 and the Euclidean distance taken.
/// Throws RayParallelToPlane for grazing rays and PointBehindCamera when a
/// ray meets the ground behind the camera.
double ground_distance(const Point2& p1, const Point2& p2, const CameraParams& params,
                       const ImageSize& size);

/// Errors of the estimated segment lengths against the set's true length.
/// Throws MissingGroundTruth without a true length.
LengthErrorStats evaluate_markings(const GroundSegmentSet& segments, const CameraParams& params,
                                   const ImageSize& size);

/// Pooled errors over several polylines (each with its own true length).
LengthErrorStats evaluate_markings(const std::vector<GroundSegmentSet>& sets,
                                   const CameraParams& params, const ImageSize& size);

/// Metric length of a lane centerline: sum of ground distances over
/// consecutive polyline points.
double lane_length(const LaneGeometry& lane, const CameraParams& params, const ImageSize& size);

}  // namespace camdense

#endif  // CAMDENSE_MEASUREMENT_HPP
