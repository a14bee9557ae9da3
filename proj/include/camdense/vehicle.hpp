#ifndef CAMDENSE_VEHICLE_HPP
#define CAMDENSE_VEHICLE_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "camdense/geometry.hpp"

namespace camdense {

/// The eight keypoint names every annotation and model must draw from.
/// Vehicle-local frame: X to the vehicle's right, Y forward, Z up, wheels on
/// the ground plane Z = 0, units meters.
const std::array<std::string, 8>& keypoint_names();

bool is_keypoint_name(const std::string& name);

/// Index into keypoint_names(), or -1 for unknown names.
int keypoint_index(const std::string& name);

/// Image-space keypoint labels for one vehicle in one frame. Maps are keyed
/// by canonical name so iteration order is stable.
struct VehicleAnnotation {
  int vehicle_index = 0;
  std::map<std::string, Point2> keypoints_px;
};

/// Metric keypoint geometry of one vehicle model.
struct VehicleModel {
  std::string model_name;
  std::map<std::string, Point3> keypoints_m;
};

/// Throws InputError when the annotation is empty, oversized, or uses an
/// unknown keypoint name.
void validate_annotation(const VehicleAnnotation& annotation);

/// Throws InputError unless all eight keypoints are present, pairwise
/// distinct, and at nonnegative height.
void validate_model(const VehicleModel& model);

/// Five sedan-class models with distinct proportions. Coordinates are
/// hand-placed from published exterior dimensions, accurate to the decimeter
/// level that keypoint annotation supports.
std::vector<VehicleModel> default_model_library();

/// Content hash used to derive per-(vehicle, model) RNG seeds: identical
/// geometry gives identical optimization runs, so duplicate models tie
/// exactly and the index tie-break is observable.
std::uint64_t model_content_hash(const VehicleModel& model);

}  // namespace camdense

#endif  // CAMDENSE_VEHICLE_HPP
