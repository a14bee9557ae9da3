#include "camdense/synth.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "camdense/errors.hpp"
#include "camdense/rng.hpp"

namespace camdense {
namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr int kRetriesPerVehicle = 500;
// Minimum center separation between two placements, tested per axis: both
// gaps must close before a pair is rejected. Lateral clearance sits below the
// lane spacing so neighbouring lanes can be occupied side by side; the rare
// hard-yawed pair may brush footprint corners, which only affects looks.
constexpr double kClearanceX_m = 3.0;
constexpr double kClearanceY_m = 5.5;

Eigen::Matrix3d look_at_rotation(const Point3& camera, const Point3& target) {
  const Eigen::Vector3d forward = (target - camera).normalized();
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);  // unit, right-handed
  Eigen::Matrix3d r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  return r;
}

bool project_visible(const Point3& p, const CameraParams& params, const ImageSize& size,
                     Point2* out) {
  if (projection_depth(p, params) <= 1e-9) return false;
  const Point2 px = project(p, params, size);
  if (px.x() < 0.0 || px.x() >= size.width || px.y() < 0.0 || px.y() >= size.height) {
    return false;
  }
  *out = px;
  return true;
}

// Distance along the road at which the bottom-center pixel meets the ground;
// the closest road position the camera can see.
double near_visible_y(const CameraParams& params, const ImageSize& size) {
  const Point2 bottom(size.width / 2.0, size.height - 1.0);
  try {
    const Ray ray = back_project_ray(bottom, params, size);
    const double t = intersect_plane_t(ray, 0.0);
    if (t > 0.0) return (ray.origin + t * ray.direction).y();
  } catch (const NumericError&) {
  }
  return 1.0;
}

double lane_center_x(const Scene& scene, int lane) {
  return (lane - (scene.lane_count - 1) / 2.0) * scene.lane_width_m;
}

}  // namespace

Point3 place_keypoint(const ScenePlacement& placement, const Point3& model_point) {
  const double c = std::cos(placement.yaw_rad), s = std::sin(placement.yaw_rad);
  return Point3(c * model_point.x() - s * model_point.y() + placement.x_m,
                s * model_point.x() + c * model_point.y() + placement.y_m,
                model_point.z());
}

Scene generate_scene(std::uint64_t seed, int n_vehicles,
                     const std::vector<VehicleModel>& model_library,
                     const CameraRanges& ranges, double noise_px, const ImageSize& size) {
  if (n_vehicles < 1) throw InputError("scene needs at least one vehicle");
  if (model_library.empty()) throw InputError("scene needs a model library");

  Rng rng(seed);
  Scene scene;
  scene.size = size;

  scene.true_params.focal_px = rng.uniform(ranges.f_min_px, ranges.f_max_px);
  const double height = rng.uniform(ranges.height_min_m, ranges.height_max_m);

  // The pitch follows from how far up the road the camera should see: the
  // ray through the top of the placement band (a quarter down the frame) is
  // aimed at a ground point at the far end of the monitored strip. Tying
  // pitch to far visibility keeps the usable strip long for any lens; a
  // freely drawn pitch paired with a narrow lens often leaves a strip too
  // short to hold one vehicle. The reach is capped by annotatability, since
  // a 1.8 m car body has to span roughly a dozen pixels for anyone to click
  // keypoints on it (wide lenses watch the near field, narrow ones see far),
  // and floored so the strip still holds the requested amount of traffic.
  const double far_max =
      std::clamp(scene.true_params.focal_px * 1.8 / 12.0, 35.0, 120.0);
  const double far_lo = std::max(30.0, 4.8 * n_vehicles);
  const double far_y = rng.uniform(far_lo, std::max(far_max, far_lo + 8.0));
  const double band_top = std::atan2(size.height / 4.0, scene.true_params.focal_px);
  double pitch = std::atan2(height, far_y) + band_top;
  pitch = std::clamp(pitch, ranges.pitch_min_deg * kDegToRad, ranges.pitch_max_deg * kDegToRad);

  // Aim at a road point at the pitch's center-of-frame ground distance; the
  // lateral offsets between camera and target produce a modest natural yaw.
  const Point3 center(rng.uniform(-6.0, 6.0), 0.0, height);
  const double look_dist = height / std::tan(pitch);
  const double target_x = rng.uniform(-2.0, 2.0);
  const double dx = target_x - center.x();
  const double target_y = std::sqrt(std::max(look_dist * look_dist - dx * dx, 4.0));
  const Eigen::Matrix3d r = look_at_rotation(center, Point3(target_x, target_y, 0.0));
  scene.true_params.rotation = Rotation::from_matrix(r);
  scene.true_params.translation_m = -r * center;

  const double y_near = std::max(1.0, near_visible_y(scene.true_params, size));

  // One vehicle per horizontal band of the frame, bands visited in random
  // order. Free row sampling can drop every vehicle into a short strip of
  // road; a cluster like that pins the pose but leaves focal length nearly
  // unobservable. Spreading the rows guarantees near and far placements.
  const double band_lo = 0.25 * size.height;
  const double band_hi = 0.97 * size.height;
  const double band_step = (band_hi - band_lo) / n_vehicles;
  std::vector<int> stratum(static_cast<std::size_t>(n_vehicles));
  for (int v = 0; v < n_vehicles; ++v) stratum[static_cast<std::size_t>(v)] = v;
  for (int v = n_vehicles - 1; v > 0; --v) {
    const auto w = rng.uniform_index(static_cast<std::size_t>(v) + 1);
    std::swap(stratum[static_cast<std::size_t>(v)], stratum[w]);
  }

  // Vehicles are seeded from visible ground pixels so any focal length gets
  // usable placements: sample a pixel, drop it to the road, snap to a lane.
  // A vehicle whose own band is fully blocked by its neighbours gets a
  // second round anywhere in the frame; the rest keep the depth spread.
  for (int v = 0; v < n_vehicles; ++v) {
    bool placed = false;
    const double row_lo = band_lo + stratum[static_cast<std::size_t>(v)] * band_step;
    for (int attempt = 0; attempt < 2 * kRetriesPerVehicle && !placed; ++attempt) {
      const bool own_band = attempt < kRetriesPerVehicle;
      const double u = rng.uniform(0.1 * size.width, 0.9 * size.width);
      const double pv = own_band ? rng.uniform(row_lo, row_lo + band_step)
                                 : rng.uniform(band_lo, band_hi);
      Point3 ground;
      try {
        const Ray ray = back_project_ray(Point2(u, pv), scene.true_params, size);
        const double t = intersect_plane_t(ray, 0.0);
        if (t <= 0.0) continue;
        ground = ray.origin + t * ray.direction;
      } catch (const NumericError&) {
        continue;
      }
      if (ground.y() < y_near || ground.y() > 180.0) continue;

      int lane = 0;
      double best = std::abs(ground.x() - lane_center_x(scene, 0));
      for (int l = 1; l < scene.lane_count; ++l) {
        const double d = std::abs(ground.x() - lane_center_x(scene, l));
        if (d < best) {
          best = d;
          lane = l;
        }
      }
      ScenePlacement p;
      p.vehicle_index = v;
      p.model_index = static_cast<int>(rng.uniform_index(model_library.size()));
      p.lane = lane;
      p.x_m = lane_center_x(scene, lane) + rng.uniform(-0.8, 0.8);
      p.y_m = ground.y();
      p.yaw_rad = rng.uniform(-25.0, 25.0) * kDegToRad;

      bool clear = true;
      for (const auto& other : scene.placements) {
        if (std::abs(p.x_m - other.x_m) < kClearanceX_m &&
            std::abs(p.y_m - other.y_m) < kClearanceY_m) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;

      const VehicleModel& model = model_library[static_cast<std::size_t>(p.model_index)];
      VehicleAnnotation ann;
      ann.vehicle_index = v;
      // Two passes: first find which keypoints an annotator could mark as
      // distinct features, then add the click noise. On a distant car the
      // wiper and a mirror can fall on the same pixel; nobody can label
      // those separately, so points within a click's width of an already kept one
      // are dropped before noise is applied.
      std::vector<std::pair<std::string, Point2>> kept;
      for (const auto& name : keypoint_names()) {
        const Point3 world = place_keypoint(p, model.keypoints_m.at(name));
        Point2 px;
        if (!project_visible(world, scene.true_params, size, &px)) continue;
        bool distinct = true;
        for (const auto& [_, q] : kept) {
          if ((px - q).norm() < 2.5) {
            distinct = false;
            break;
          }
        }
        if (distinct) kept.emplace_back(name, px);
      }
      for (auto& [name, px] : kept) {
        if (noise_px > 0.0) {
          px.x() += rng.normal(0.0, noise_px);
          px.y() += rng.normal(0.0, noise_px);
          if (px.x() < 0.0 || px.x() >= size.width || px.y() < 0.0 || px.y() >= size.height) {
            continue;  // noise pushed it off-frame; an annotator could not mark it
          }
        }
        ann.keypoints_px[name] = px;
      }
      if (ann.keypoints_px.size() < 4) continue;

      scene.placements.push_back(p);
      scene.annotations.push_back(ann);
      placed = true;
    }
    if (!placed) throw PlacementFailure();
  }

  // Lane-boundary markings bracket the vehicle cluster: two 7-point
  // polylines, 6 m between consecutive points.
  double y_sum = 0.0;
  for (const auto& p : scene.placements) y_sum += p.y_m;
  const double y_bar = y_sum / scene.placements.size();
  double y0 = std::max(y_bar - 3.0 * scene.marking_segment_m, y_near);
  for (const double x : {-scene.lane_width_m / 2.0, scene.lane_width_m / 2.0}) {
    std::vector<Point3> world;
    std::vector<Point2> px;
    for (int i = 0; i < 7; ++i) {
      const Point3 p(x, y0 + i * scene.marking_segment_m, 0.0);
      world.push_back(p);
      px.push_back(project(p, scene.true_params, size));
    }
    scene.marking_world.push_back(world);
    scene.marking_px.push_back(px);
  }
  return scene;
}

std::vector<GroundSegmentSet> scene_marking_sets(const Scene& scene) {
  std::vector<GroundSegmentSet> sets;
  for (const auto& polyline : scene.marking_px) {
    GroundSegmentSet set;
    set.points_px = polyline;
    set.true_length_m = scene.marking_segment_m;
    sets.push_back(set);
  }
  return sets;
}

std::vector<LaneGeometry> scene_lanes(const Scene& scene) {
  double y_lo = 1e30, y_hi = -1e30;
  for (const auto& p : scene.placements) {
    y_lo = std::min(y_lo, p.y_m);
    y_hi = std::max(y_hi, p.y_m);
  }
  y_lo = std::max(y_lo - 6.0, near_visible_y(scene.true_params, scene.size));
  y_hi += 6.0;

  std::vector<LaneGeometry> lanes;
  for (int l = 0; l < scene.lane_count; ++l) {
    const double cx = lane_center_x(scene, l);
    const double half = scene.lane_width_m / 2.0;
    LaneGeometry lane;
    lane.lane_id = l;
    for (const Point3& corner :
         {Point3(cx - half, y_lo, 0.0), Point3(cx + half, y_lo, 0.0),
          Point3(cx + half, y_hi, 0.0), Point3(cx - half, y_hi, 0.0)}) {
      lane.polygon_px.push_back(project(corner, scene.true_params, scene.size));
    }
    lane.centerline_px.push_back(project(Point3(cx, y_lo, 0.0), scene.true_params, scene.size));
    lane.centerline_px.push_back(project(Point3(cx, y_hi, 0.0), scene.true_params, scene.size));
    lane.length_m = y_hi - y_lo;
    lanes.push_back(lane);
  }
  return lanes;
}

std::vector<BoundingBox> scene_boxes(const Scene& scene, double confidence) {
  std::vector<BoundingBox> boxes;
  for (std::size_t i = 0; i < scene.placements.size(); ++i) {
    const ScenePlacement& p = scene.placements[i];
    const Point2 center = project(Point3(p.x_m, p.y_m, 0.0), scene.true_params, scene.size);
    double min_u = 1e30, max_u = -1e30, min_v = 1e30, max_v = -1e30;
    for (const auto& [name, px] : scene.annotations[i].keypoints_px) {
      min_u = std::min(min_u, px.x());
      max_u = std::max(max_u, px.x());
      min_v = std::min(min_v, px.y());
      max_v = std::max(max_v, px.y());
    }
    const double half_w = std::max((max_u - min_u) / 2.0, 2.0);
    const double half_h = std::max((max_v - min_v) / 2.0, 2.0);
    BoundingBox box;
    box.x_min = center.x() - half_w;
    box.x_max = center.x() + half_w;
    box.y_min = center.y() - half_h;
    box.y_max = center.y() + half_h;
    box.confidence = confidence;
    boxes.push_back(box);
  }
  return boxes;
}

}  // namespace camdense
