#ifndef CAMDENSE_LANES_HPP
#define CAMDENSE_LANES_HPP

#include <vector>

#include "camdense/geometry.hpp"

namespace camdense {

/// One monitored lane: an image-space polygon for vehicle assignment, a
/// centerline for metric length measurement, and the measured length.
struct LaneGeometry {
  int lane_id = 0;
  std::vector<Point2> polygon_px;     // closed ring, first vertex not repeated
  std::vector<Point2> centerline_px;  // ordered along the lane
  double length_m = 0.0;
};

}  // namespace camdense

#endif  // CAMDENSE_LANES_HPP
