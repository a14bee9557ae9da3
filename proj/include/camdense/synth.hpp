#ifndef CAMDENSE_SYNTH_HPP
#define CAMDENSE_SYNTH_HPP

#include <cstdint>
#include <vector>

#include "camdense/detection.hpp"
#include "camdense/geometry.hpp"
#include "camdense/lanes.hpp"
#include "camdense/measurement.hpp"
#include "camdense/vehicle.hpp"

namespace camdense {

/// Sampling ranges for the synthetic camera.
struct CameraRanges {
  double f_min_px = 200.0;
  double f_max_px = 800.0;
  double height_min_m = 6.0;  // mast-mounted, not dashcam height
  double height_max_m = 12.0;
  double pitch_min_deg = 10.0;
  double pitch_max_deg = 45.0;
  double yaw_range_deg = 25.0;  // camera yaw about the road direction
};

/// Ground pose of one placed vehicle. The road runs along +Y, lanes are
/// offset in X; yaw is about Z relative to the road direction.
struct ScenePlacement {
  int vehicle_index = 0;
  int model_index = 0;
  int lane = 0;
  double x_m = 0.0;
  double y_m = 0.0;
  double yaw_rad = 0.0;
};

/// A fully known road scene: the oracle against which calibration,
/// measurement, and counting are tested. World frame: road surface Z=0,
/// road direction +Y, camera above the road looking down it.
struct Scene {
  CameraParams true_params;
  ImageSize size;
  std::vector<VehicleAnnotation> annotations;   // noisy, visibility-filtered
  std::vector<ScenePlacement> placements;
  std::vector<std::vector<Point3>> marking_world;  // polylines on Z=0
  std::vector<std::vector<Point2>> marking_px;     // their exact projections
  double marking_segment_m = 6.0;
  int lane_count = 3;
  double lane_width_m = 3.5;
};

/// Generates a scene with n_vehicles placed without overlap and at least 4
/// visible keypoints each. Keypoint pixels carry Gaussian noise of scale
/// noise_px; points projecting outside the frame are dropped. Fixed seed
/// reproduces the scene exactly. Throws PlacementFailure when the sampled
/// camera leaves no room.
Scene generate_scene(std::uint64_t seed, int n_vehicles,
                     const std::vector<VehicleModel>& model_library,
                     const CameraRanges& ranges, double noise_px, const ImageSize& size);

/// World pose of one placement applied to a model keypoint.
Point3 place_keypoint(const ScenePlacement& placement, const Point3& model_point);

/// Marking polylines as measurement inputs with the true segment length.
std::vector<GroundSegmentSet> scene_marking_sets(const Scene& scene);

/// Image-space lane polygons/centerlines with true metric lengths, built
/// from the scene's known geometry.
std::vector<LaneGeometry> scene_lanes(const Scene& scene);

/// One synthetic detector box per placement, centered on the projected
/// ground center of the vehicle.
std::vector<BoundingBox> scene_boxes(const Scene& scene, double confidence);

}  // namespace camdense

#endif  // CAMDENSE_SYNTH_HPP
