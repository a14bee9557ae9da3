#include "camdense/vehicle.hpp"

#include <algorithm>
#include <cstring>

#include "camdense/errors.hpp"

namespace camdense {

const std::array<std::string, 8>& keypoint_names() {
  static const std::array<std::string, 8> names = {
      "left_headlight",   "right_headlight",  "plate_center",
      "wiper_center",     "left_wing_mirror", "right_wing_mirror",
      "back_left_corner", "back_right_corner"};
  return names;
}

bool is_keypoint_name(const std::string& name) { return keypoint_index(name) >= 0; }

int keypoint_index(const std::string& name) {
  const auto& names = keypoint_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void validate_annotation(const VehicleAnnotation& annotation) {
  if (annotation.keypoints_px.empty()) {
    throw InputError("annotation for vehicle " + std::to_string(annotation.vehicle_index) +
                     " has no keypoints");
  }
  if (annotation.keypoints_px.size() > keypoint_names().size()) {
    throw InputError("annotation for vehicle " + std::to_string(annotation.vehicle_index) +
                     " has more keypoints than the canonical set");
  }
  for (const auto& [name, _] : annotation.keypoints_px) {
    if (!is_keypoint_name(name)) {
      throw InputError("unknown keypoint name '" + name + "' in annotation for vehicle " +
                       std::to_string(annotation.vehicle_index));
    }
  }
}

void validate_model(const VehicleModel& model) {
  for (const auto& name : keypoint_names()) {
    if (model.keypoints_m.find(name) == model.keypoints_m.end()) {
      throw InputError("model '" + model.model_name + "' is missing keypoint '" + name + "'");
    }
  }
  for (const auto& [name, p] : model.keypoints_m) {
    if (!is_keypoint_name(name)) {
      throw InputError("unknown keypoint name '" + name + "' in model '" + model.model_name + "'");
    }
    if (p.z() < 0.0) {
      throw InputError("model '" + model.model_name + "' keypoint '" + name +
                       "' lies below the ground plane");
    }
  }
  const auto& names = keypoint_names();
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      if ((model.keypoints_m.at(names[a]) - model.keypoints_m.at(names[b])).norm() <= 0.0) {
        throw InputError("model '" + model.model_name + "' has coincident keypoints '" +
                         names[a] + "' and '" + names[b] + "'");
      }
    }
  }
}

namespace {

// Keypoint tables per model, meters, vehicle frame: origin at the footprint
// center on the ground, +Y toward the nose, Z up. The five cars deliberately
// differ in proportion, not just overall size: a monocular view with an
// unknown focal cannot tell two similar shapes apart when one is a uniform
// scaling of the other, so the library must vary hood length, nose height,
// and tail height independently of length and width.
VehicleModel make_model(const std::string& name,
                        double hl_x, double hl_y, double hl_z,     // headlights
                        double plate_y, double plate_z,            // front plate
                        double wiper_y, double wiper_z,            // wiper center
                        double mir_x, double mir_y, double mir_z,  // wing mirrors
                        double back_x, double back_y, double back_z) {
  VehicleModel m;
  m.model_name = name;
  m.keypoints_m["left_headlight"] = Point3(-hl_x, hl_y, hl_z);
  m.keypoints_m["right_headlight"] = Point3(hl_x, hl_y, hl_z);
  m.keypoints_m["plate_center"] = Point3(0.0, plate_y, plate_z);
  m.keypoints_m["wiper_center"] = Point3(0.0, wiper_y, wiper_z);
  m.keypoints_m["left_wing_mirror"] = Point3(-mir_x, mir_y, mir_z);
  m.keypoints_m["right_wing_mirror"] = Point3(mir_x, mir_y, mir_z);
  m.keypoints_m["back_left_corner"] = Point3(-back_x, -back_y, back_z);
  m.keypoints_m["back_right_corner"] = Point3(back_x, -back_y, back_z);
  return m;
}

}  // namespace

std::vector<VehicleModel> default_model_library() {
  std::vector<VehicleModel> lib;
  // Compact sedan, middle-of-the-road proportions.
  lib.push_back(make_model("toyota_corolla",
                           0.64, 2.21, 0.71, 2.315, 0.45, 1.08, 1.12,
                           0.99, 0.82, 1.02, 0.89, 2.315, 1.00));
  // Short hood, steep high nose, tall Kammback tail, cab-forward mirrors.
  lib.push_back(make_model("toyota_prius",
                           0.62, 2.19, 0.78, 2.285, 0.51, 1.37, 1.18,
                           0.97, 1.05, 1.08, 0.88, 2.285, 1.12));
  // Long cabin over a short hood, low cowl, low trunk lid.
  lib.push_back(make_model("honda_civic",
                           0.66, 2.27, 0.68, 2.335, 0.42, 1.28, 1.05,
                           0.985, 0.98, 0.95, 0.90, 2.335, 0.90));
  // Long hood, low beltline, mirrors set far back.
  lib.push_back(make_model("bmw_series_4",
                           0.70, 2.30, 0.63, 2.385, 0.38, 1.02, 1.05,
                           1.01, 0.78, 0.95, 0.92, 2.385, 0.95));
  // Widest body, long sleek nose, high liftback tail.
  lib.push_back(make_model("tesla_model_s",
                           0.72, 2.42, 0.60, 2.490, 0.40, 1.13, 1.08,
                           1.12, 0.88, 1.02, 0.98, 2.490, 1.02));
  return lib;
}

std::uint64_t model_content_hash(const VehicleModel& model) {
  // FNV-1a over keypoint names and raw coordinate bits, in canonical order.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_byte = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (const auto& name : keypoint_names()) {
    for (const char c : name) mix_byte(static_cast<unsigned char>(c));
    const Point3& p = model.keypoints_m.at(name);
    for (int axis = 0; axis < 3; ++axis) {
      std::uint64_t bits;
      const double value = p(axis);
      static_assert(sizeof(bits) == sizeof(value));
      std::memcpy(&bits, &value, sizeof(bits));
      for (int byte = 0; byte < 8; ++byte) {
        mix_byte(static_cast<unsigned char>(bits >> (8 * byte)));
      }
    }
  }
  return h;
}

}  // namespace camdense
