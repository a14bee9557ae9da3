#include "camdense/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "camdense/errors.hpp"

namespace camdense {
namespace {

using nlohmann::json;

/// Shortest decimal form that parses back to exactly the same double.
/// Integral values print without an exponent so they read naturally.
std::string fmt_double(double v) {
  char buf[40];
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw ParseError(where + ": trailing characters in number");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected a number, got '" + text + "'");
  }
}

long long parse_int(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw ParseError(where + ": trailing characters in integer");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected an integer, got '" + text + "'");
  }
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

void require_version(const json& j, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
  if (!j.contains("schema_version")) throw ParseError(what + ": missing field 'schema_version'");
  const json& v = j["schema_version"];
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw ParseError(what + ": unsupported schema_version " + v.dump() + ", expected " +
                     std::to_string(kSchemaVersion));
  }
}

const json& field(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(what + ": missing field '" + key + "'");
  }
  return j[key];
}

double num_field(const json& j, const char* key, const std::string& what) {
  const json& v = field(j, key, what);
  if (!v.is_number()) throw ParseError(what + ": field '" + key + "' must be a number");
  return v.get<double>();
}

long long int_field(const json& j, const char* key, const std::string& what) {
  const json& v = field(j, key, what);
  if (!v.is_number_integer()) throw ParseError(what + ": field '" + key + "' must be an integer");
  return v.get<long long>();
}

std::string str_field(const json& j, const char* key, const std::string& what) {
  const json& v = field(j, key, what);
  if (!v.is_string()) throw ParseError(what + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

Point2 point2_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(what + ": expected [u, v]");
  }
  return Point2(j[0].get<double>(), j[1].get<double>());
}

Point3 point3_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected [x, y, z]");
  for (const auto& c : j) {
    if (!c.is_number()) throw ParseError(what + ": expected [x, y, z]");
  }
  return Point3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json point2_json(const Point2& p) { return json::array({p.x(), p.y()}); }
json point3_json(const Point3& p) { return json::array({p.x(), p.y(), p.z()}); }

Eigen::Vector3d vec3_from(const json& j, const std::string& what) { return point3_from(j, what); }

ImageSize size_from(const json& j, const std::string& what) {
  ImageSize size;
  size.width = static_cast<int>(int_field(j, "image_width_px", what));
  size.height = static_cast<int>(int_field(j, "image_height_px", what));
  if (size.width <= 0 || size.height <= 0) {
    throw ParseError(what + ": image dimensions must be positive");
  }
  return size;
}

void size_to(json& j, const ImageSize& size) {
  j["image_width_px"] = size.width;
  j["image_height_px"] = size.height;
}

void dump_to_file(const json& j, const std::string& path) {
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void check_csv_safe(const std::string& value, const char* what) {
  if (value.find(',') != std::string::npos || value.find('\n') != std::string::npos) {
    throw InputError(std::string(what) + " may not contain commas or newlines: '" + value + "'");
  }
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file for reading: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open file for writing: " + path);
  out << text;
  if (!out) throw InputError("write failed: " + path);
}

Config parse_config(const std::string& text) {
  Config config;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (seen.count(key)) throw ParseError(where + ": duplicate key '" + key + "'");
    seen[key] = line_no;

    if (key == "f_default_px") {
      config.f_default_px = parse_double(value, where);
    } else if (key == "alpha") {
      config.alpha = parse_double(value, where);
    } else if (key == "tau_per_m") {
      config.tau_per_m = parse_double(value, where);
    } else if (key == "matching_evaluations") {
      config.matching_evaluations = static_cast<int>(parse_int(value, where));
    } else if (key == "fine_tune_evaluations") {
      config.fine_tune_evaluations = static_cast<int>(parse_int(value, where));
    } else if (key == "beta") {
      config.beta = parse_double(value, where);
    } else if (key == "gamma") {
      config.gamma = parse_double(value, where);
    } else if (key == "ransac_threshold_px") {
      config.ransac_threshold_px = parse_double(value, where);
    } else if (key == "confidence_min") {
      config.confidence_min = parse_double(value, where);
    } else if (key == "interval_s") {
      config.interval_s = parse_double(value, where);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_int(value, where));
    } else {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  return config;
}

std::string format_config(const Config& config) {
  std::ostringstream out;
  out << "f_default_px=" << fmt_double(config.f_default_px) << "\n"
      << "alpha=" << fmt_double(config.alpha) << "\n"
      << "tau_per_m=" << fmt_double(config.tau_per_m) << "\n"
      << "matching_evaluations=" << config.matching_evaluations << "\n"
      << "fine_tune_evaluations=" << config.fine_tune_evaluations << "\n"
      << "beta=" << fmt_double(config.beta) << "\n"
      << "gamma=" << fmt_double(config.gamma) << "\n"
      << "ransac_threshold_px=" << fmt_double(config.ransac_threshold_px) << "\n"
      << "confidence_min=" << fmt_double(config.confidence_min) << "\n"
      << "interval_s=" << fmt_double(config.interval_s) << "\n"
      << "seed=" << config.seed << "\n";
  return out.str();
}

Config load_config(const std::string& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_config(const Config& config, const std::string& path) {
  write_text_file(path, format_config(config));
}

MvcalibConfig to_mvcalib_config(const Config& config) {
  MvcalibConfig m;
  m.f_default_px = config.f_default_px;
  m.alpha = config.alpha;
  m.tau_per_m = config.tau_per_m;
  m.matching_evaluations = config.matching_evaluations;
  m.fine_tune_evaluations = config.fine_tune_evaluations;
  m.seed = config.seed;
  m.ransac.threshold_px = config.ransac_threshold_px;
  m.ransac.seed = config.seed;
  return m;
}

AnnotationFile load_annotations(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  AnnotationFile file;
  file.size = size_from(j, path);
  const json& vehicles = field(j, "vehicles", path);
  if (!vehicles.is_array()) throw ParseError(path + ": 'vehicles' must be an array");
  for (const json& vj : vehicles) {
    VehicleAnnotation ann;
    ann.vehicle_index = static_cast<int>(int_field(vj, "vehicle_index", path));
    const json& kps = field(vj, "keypoints_px", path);
    if (!kps.is_object()) throw ParseError(path + ": 'keypoints_px' must be an object");
    for (const auto& [name, pj] : kps.items()) {
      if (!is_keypoint_name(name)) {
        throw ParseError(path + ": unknown keypoint name '" + name + "'");
      }
      ann.keypoints_px[name] = point2_from(pj, path + " keypoint '" + name + "'");
    }
    validate_annotation(ann);
    file.vehicles.push_back(ann);
  }
  return file;
}

void save_annotations(const AnnotationFile& file, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  size_to(j, file.size);
  j["vehicles"] = json::array();
  for (const VehicleAnnotation& ann : file.vehicles) {
    json vj;
    vj["vehicle_index"] = ann.vehicle_index;
    vj["keypoints_px"] = json::object();
    for (const auto& [name, p] : ann.keypoints_px) vj["keypoints_px"][name] = point2_json(p);
    j["vehicles"].push_back(vj);
  }
  dump_to_file(j, path);
}

std::vector<VehicleModel> load_model_library(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  const json& models = field(j, "models", path);
  if (!models.is_array()) throw ParseError(path + ": 'models' must be an array");
  std::vector<VehicleModel> out;
  for (const json& mj : models) {
    VehicleModel model;
    model.model_name = str_field(mj, "model_name", path);
    const json& kps = field(mj, "keypoints_m", path);
    if (!kps.is_object()) throw ParseError(path + ": 'keypoints_m' must be an object");
    for (const auto& [name, pj] : kps.items()) {
      if (!is_keypoint_name(name)) {
        throw ParseError(path + ": unknown keypoint name '" + name + "'");
      }
      model.keypoints_m[name] = point3_from(pj, path + " keypoint '" + name + "'");
    }
    validate_model(model);
    out.push_back(model);
  }
  if (out.empty()) throw ParseError(path + ": model library is empty");
  return out;
}

void save_model_library(const std::vector<VehicleModel>& models, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["models"] = json::array();
  for (const VehicleModel& model : models) {
    json mj;
    mj["model_name"] = model.model_name;
    mj["keypoints_m"] = json::object();
    for (const auto& [name, p] : model.keypoints_m) mj["keypoints_m"][name] = point3_json(p);
    j["models"].push_back(mj);
  }
  dump_to_file(j, path);
}

CalibrationFile load_calibration(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  CalibrationFile file;
  file.size = size_from(j, path);
  file.params.focal_px = num_field(j, "focal_px", path);
  const Eigen::Vector3d axis_angle = vec3_from(field(j, "rotation_axis_angle", path), path);
  file.params.rotation = Rotation::from_axis_angle(axis_angle);
  file.params.translation_m = vec3_from(field(j, "translation_m", path), path);

  const json& mat = field(j, "rotation_matrix", path);
  if (!mat.is_array() || mat.size() != 3) throw ParseError(path + ": rotation_matrix must be 3x3");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    if (!mat[r].is_array() || mat[r].size() != 3) {
      throw ParseError(path + ": rotation_matrix must be 3x3");
    }
    for (int c = 0; c < 3; ++c) m(r, c) = mat[r][c].get<double>();
  }
  if ((m - file.params.rotation.matrix()).cwiseAbs().maxCoeff() > 1e-6) {
    throw ParseError(path + ": rotation_matrix and rotation_axis_angle disagree");
  }

  file.anchor_index = static_cast<int>(int_field(j, "anchor_index", path));
  file.stage1_loss = num_field(j, "stage1_loss", path);
  file.stage2_loss = num_field(j, "stage2_loss", path);
  file.final_loss = num_field(j, "final_loss", path);
  file.degenerate_pairs = static_cast<int>(int_field(j, "degenerate_pairs", path));
  const json& fb = field(j, "single_vehicle_fallback", path);
  if (!fb.is_boolean()) throw ParseError(path + ": 'single_vehicle_fallback' must be a boolean");
  file.single_vehicle_fallback = fb.get<bool>();

  for (const json& fj : field(j, "matched", path)) {
    VehicleFit fit;
    fit.vehicle_index = static_cast<int>(int_field(fj, "vehicle_index", path));
    fit.model_index = static_cast<int>(int_field(fj, "model_index", path));
    fit.projection_loss_px = num_field(fj, "projection_loss_px", path);
    fit.params.focal_px = num_field(fj, "focal_px", path);
    fit.params.rotation =
        Rotation::from_axis_angle(vec3_from(field(fj, "rotation_axis_angle", path), path));
    fit.params.translation_m = vec3_from(field(fj, "translation_m", path), path);
    file.matched.push_back(fit);
  }
  for (const json& sj : field(j, "skipped_vehicles", path)) {
    if (!sj.is_number_integer()) throw ParseError(path + ": 'skipped_vehicles' must hold integers");
    file.skipped_vehicles.push_back(sj.get<int>());
  }
  return file;
}

void save_calibration(const CalibrationFile& file, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  size_to(j, file.size);
  j["focal_px"] = file.params.focal_px;
  const Eigen::Matrix3d m = file.params.rotation.matrix();
  j["rotation_matrix"] = json::array();
  for (int r = 0; r < 3; ++r) {
    j["rotation_matrix"].push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  }
  j["rotation_axis_angle"] = point3_json(file.params.rotation.axis_angle());
  j["translation_m"] = point3_json(file.params.translation_m);
  j["anchor_index"] = file.anchor_index;
  j["stage1_loss"] = file.stage1_loss;
  j["stage2_loss"] = file.stage2_loss;
  j["final_loss"] = file.final_loss;
  j["degenerate_pairs"] = file.degenerate_pairs;
  j["single_vehicle_fallback"] = file.single_vehicle_fallback;
  j["matched"] = json::array();
  for (const VehicleFit& fit : file.matched) {
    json fj;
    fj["vehicle_index"] = fit.vehicle_index;
    fj["model_index"] = fit.model_index;
    fj["projection_loss_px"] = fit.projection_loss_px;
    fj["focal_px"] = fit.params.focal_px;
    fj["rotation_axis_angle"] = point3_json(fit.params.rotation.axis_angle());
    fj["translation_m"] = point3_json(fit.params.translation_m);
    j["matched"].push_back(fj);
  }
  j["skipped_vehicles"] = file.skipped_vehicles;
  dump_to_file(j, path);
}

CalibrationFile to_calibration_file(const CalibResult& result, const ImageSize& size) {
  CalibrationFile file;
  file.params = result.params;
  file.size = size;
  file.anchor_index = result.anchor_index;
  file.stage1_loss = result.stage1_loss;
  file.stage2_loss = result.stage2_loss;
  file.final_loss = result.final_loss;
  file.degenerate_pairs = result.degenerate_pairs;
  file.single_vehicle_fallback = result.single_vehicle_fallback;
  file.matched = result.matched;
  file.skipped_vehicles = result.skipped_vehicles;
  return file;
}

std::vector<GroundSegmentSet> load_markings(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  const json& sets = field(j, "sets", path);
  if (!sets.is_array()) throw ParseError(path + ": 'sets' must be an array");
  std::vector<GroundSegmentSet> out;
  for (const json& sj : sets) {
    GroundSegmentSet set;
    const json& pts = field(sj, "points_px", path);
    if (!pts.is_array()) throw ParseError(path + ": 'points_px' must be an array");
    for (const json& pj : pts) set.points_px.push_back(point2_from(pj, path + " points_px"));
    if (sj.contains("true_length_m") && !sj["true_length_m"].is_null()) {
      if (!sj["true_length_m"].is_number()) {
        throw ParseError(path + ": 'true_length_m' must be a number");
      }
      set.true_length_m = sj["true_length_m"].get<double>();
    }
    out.push_back(set);
  }
  return out;
}

void save_markings(const std::vector<GroundSegmentSet>& sets, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["sets"] = json::array();
  for (const GroundSegmentSet& set : sets) {
    json sj;
    sj["points_px"] = json::array();
    for (const Point2& p : set.points_px) sj["points_px"].push_back(point2_json(p));
    if (set.true_length_m) sj["true_length_m"] = *set.true_length_m;
    j["sets"].push_back(sj);
  }
  dump_to_file(j, path);
}

std::vector<LaneGeometry> load_lanes(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  const json& lanes = field(j, "lanes", path);
  if (!lanes.is_array()) throw ParseError(path + ": 'lanes' must be an array");
  std::vector<LaneGeometry> out;
  for (const json& lj : lanes) {
    LaneGeometry lane;
    lane.lane_id = static_cast<int>(int_field(lj, "lane_id", path));
    for (const json& pj : field(lj, "polygon_px", path)) {
      lane.polygon_px.push_back(point2_from(pj, path + " polygon_px"));
    }
    for (const json& pj : field(lj, "centerline_px", path)) {
      lane.centerline_px.push_back(point2_from(pj, path + " centerline_px"));
    }
    lane.length_m = num_field(lj, "length_m", path);
    out.push_back(lane);
  }
  validate_lanes(out);
  return out;
}

void save_lanes(const std::vector<LaneGeometry>& lanes, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["lanes"] = json::array();
  for (const LaneGeometry& lane : lanes) {
    json lj;
    lj["lane_id"] = lane.lane_id;
    lj["polygon_px"] = json::array();
    for (const Point2& p : lane.polygon_px) lj["polygon_px"].push_back(point2_json(p));
    lj["centerline_px"] = json::array();
    for (const Point2& p : lane.centerline_px) lj["centerline_px"].push_back(point2_json(p));
    lj["length_m"] = lane.length_m;
    j["lanes"].push_back(lj);
  }
  dump_to_file(j, path);
}

std::vector<DetectionFrame> load_detections(const std::string& path) {
  std::vector<DetectionFrame> frames;
  std::map<std::string, double> last_ts;
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const json j = parse_json_text(line, where);
    DetectionFrame frame;
    frame.ts_utc_s = num_field(j, "ts", where);
    frame.camera_id = str_field(j, "camera", where);
    const json& boxes = field(j, "boxes", where);
    if (!boxes.is_array()) throw ParseError(where + ": 'boxes' must be an array");
    for (const json& bj : boxes) {
      if (!bj.is_array() || (bj.size() != 4 && bj.size() != 5)) {
        throw ParseError(where + ": each box must be [x1,y1,x2,y2] or [x1,y1,x2,y2,conf]");
      }
      for (const json& c : bj) {
        if (!c.is_number()) throw ParseError(where + ": box entries must be numbers");
      }
      BoundingBox box;
      box.x_min = bj[0].get<double>();
      box.y_min = bj[1].get<double>();
      box.x_max = bj[2].get<double>();
      box.y_max = bj[3].get<double>();
      box.confidence = bj.size() == 5 ? bj[4].get<double>() : 1.0;
      try {
        validate_box(box);
      } catch (const InputError& e) {
        throw ParseError(where + ": " + e.what());
      }
      frame.boxes.push_back(box);
    }
    const auto it = last_ts.find(frame.camera_id);
    if (it != last_ts.end() && frame.ts_utc_s < it->second) {
      throw ParseError(where + ": timestamps must be nondecreasing per camera");
    }
    last_ts[frame.camera_id] = frame.ts_utc_s;
    frames.push_back(frame);
  }
  return frames;
}

void save_detections(const std::vector<DetectionFrame>& frames, const std::string& path,
                     bool with_confidence) {
  std::ostringstream out;
  for (const DetectionFrame& frame : frames) {
    json j;
    j["ts"] = frame.ts_utc_s;
    j["camera"] = frame.camera_id;
    j["boxes"] = json::array();
    for (const BoundingBox& box : frame.boxes) {
      json bj = json::array({box.x_min, box.y_min, box.x_max, box.y_max});
      if (with_confidence) bj.push_back(box.confidence);
      j["boxes"].push_back(bj);
    }
    out << j.dump() << "\n";
  }
  write_text_file(path, out.str());
}

DatasetManifest load_manifest(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  DatasetManifest manifest;
  const json& scenarios = field(j, "scenarios", path);
  if (!scenarios.is_array()) throw ParseError(path + ": 'scenarios' must be an array");
  for (const json& sj : scenarios) {
    if (!sj.is_string()) throw ParseError(path + ": scenario names must be strings");
    manifest.scenario_names.push_back(sj.get<std::string>());
  }
  const json& datasets = field(j, "datasets", path);
  if (!datasets.is_array()) throw ParseError(path + ": 'datasets' must be an array");
  std::vector<std::map<std::string, long long>> counts;
  for (const json& dj : datasets) {
    manifest.dataset_names.push_back(str_field(dj, "name", path));
    const json& cj = field(dj, "counts", path);
    if (!cj.is_object()) throw ParseError(path + ": 'counts' must be an object");
    std::map<std::string, long long> row;
    for (const auto& [scenario, count] : cj.items()) {
      if (std::find(manifest.scenario_names.begin(), manifest.scenario_names.end(), scenario) ==
          manifest.scenario_names.end()) {
        throw ParseError(path + ": counts reference unknown scenario '" + scenario + "'");
      }
      if (!count.is_number_integer()) {
        throw ParseError(path + ": count for '" + scenario + "' must be an integer");
      }
      row[scenario] = count.get<long long>();
    }
    counts.push_back(row);
  }
  const int u = static_cast<int>(manifest.dataset_names.size());
  const int v = static_cast<int>(manifest.scenario_names.size());
  manifest.capacities = Eigen::MatrixXi::Zero(u, v);
  for (int d = 0; d < u; ++d) {
    for (int s = 0; s < v; ++s) {
      const auto it = counts[static_cast<std::size_t>(d)].find(manifest.scenario_names[s]);
      manifest.capacities(d, s) = it == counts[static_cast<std::size_t>(d)].end()
                                      ? 0
                                      : static_cast<int>(it->second);
    }
  }
  validate_manifest(manifest);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  validate_manifest(manifest);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenarios"] = manifest.scenario_names;
  j["datasets"] = json::array();
  for (std::size_t d = 0; d < manifest.dataset_names.size(); ++d) {
    json dj;
    dj["name"] = manifest.dataset_names[d];
    dj["counts"] = json::object();
    for (std::size_t s = 0; s < manifest.scenario_names.size(); ++s) {
      dj["counts"][manifest.scenario_names[s]] =
          manifest.capacities(static_cast<int>(d), static_cast<int>(s));
    }
    j["datasets"].push_back(dj);
  }
  dump_to_file(j, path);
}

AllocationFile load_allocation(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  AllocationFile file;
  for (const json& n : field(j, "datasets", path)) {
    if (!n.is_string()) throw ParseError(path + ": dataset names must be strings");
    file.dataset_names.push_back(n.get<std::string>());
  }
  for (const json& n : field(j, "scenarios", path)) {
    if (!n.is_string()) throw ParseError(path + ": scenario names must be strings");
    file.scenario_names.push_back(n.get<std::string>());
  }
  file.allocation.beta = num_field(j, "beta", path);
  file.allocation.gamma = num_field(j, "gamma", path);
  file.allocation.objective = num_field(j, "objective", path);
  const int u = static_cast<int>(file.dataset_names.size());
  const int v = static_cast<int>(file.scenario_names.size());
  file.allocation.continuous = Eigen::MatrixXd::Zero(u, v);
  file.allocation.counts = Eigen::MatrixXi::Zero(u, v);
  const json& cont = field(j, "continuous", path);
  const json& counts = field(j, "counts", path);
  if (!cont.is_array() || static_cast<int>(cont.size()) != u || !counts.is_array() ||
      static_cast<int>(counts.size()) != u) {
    throw ParseError(path + ": allocation matrices must have one row per dataset");
  }
  for (int d = 0; d < u; ++d) {
    if (static_cast<int>(cont[d].size()) != v || static_cast<int>(counts[d].size()) != v) {
      throw ParseError(path + ": allocation matrices must have one column per scenario");
    }
    for (int s = 0; s < v; ++s) {
      file.allocation.continuous(d, s) = cont[d][s].get<double>();
      file.allocation.counts(d, s) = counts[d][s].get<int>();
    }
  }
  return file;
}

void save_allocation(const AllocationFile& file, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["datasets"] = file.dataset_names;
  j["scenarios"] = file.scenario_names;
  j["beta"] = file.allocation.beta;
  j["gamma"] = file.allocation.gamma;
  j["objective"] = file.allocation.objective;
  j["continuous"] = json::array();
  j["counts"] = json::array();
  for (int d = 0; d < file.allocation.continuous.rows(); ++d) {
    json crow = json::array(), irow = json::array();
    for (int s = 0; s < file.allocation.continuous.cols(); ++s) {
      crow.push_back(file.allocation.continuous(d, s));
      irow.push_back(file.allocation.counts(d, s));
    }
    j["continuous"].push_back(crow);
    j["counts"].push_back(irow);
  }
  dump_to_file(j, path);
}

std::string allocation_csv(const AllocationFile& file) {
  std::ostringstream out;
  out << "dataset";
  for (const std::string& s : file.scenario_names) {
    check_csv_safe(s, "scenario name");
    out << "," << s;
  }
  out << ",total\n";
  const int u = static_cast<int>(file.dataset_names.size());
  const int v = static_cast<int>(file.scenario_names.size());
  std::vector<long long> col_totals(static_cast<std::size_t>(v), 0);
  long long grand = 0;
  for (int d = 0; d < u; ++d) {
    check_csv_safe(file.dataset_names[d], "dataset name");
    out << file.dataset_names[d];
    long long row_total = 0;
    for (int s = 0; s < v; ++s) {
      const int q = file.allocation.counts(d, s);
      out << "," << q;
      row_total += q;
      col_totals[static_cast<std::size_t>(s)] += q;
    }
    grand += row_total;
    out << "," << row_total << "\n";
  }
  out << "total";
  for (int s = 0; s < v; ++s) out << "," << col_totals[static_cast<std::size_t>(s)];
  out << "," << grand << "\n";
  return out.str();
}

AllocationFile parse_allocation_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines.size() < 2) throw ParseError("allocation csv: need a header and a total row");
  const std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() < 3 || header.front() != "dataset" || header.back() != "total") {
    throw ParseError("allocation csv: header must be dataset,<scenarios...>,total");
  }
  AllocationFile file;
  file.scenario_names.assign(header.begin() + 1, header.end() - 1);
  const int v = static_cast<int>(file.scenario_names.size());

  std::vector<std::vector<int>> rows;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const std::string where = "allocation csv row " + std::to_string(i + 1);
    const std::vector<std::string> cells = split_csv_line(lines[i]);
    if (static_cast<int>(cells.size()) != v + 2) throw ParseError(where + ": wrong column count");
    file.dataset_names.push_back(cells[0]);
    std::vector<int> row;
    long long total = 0;
    for (int s = 0; s < v; ++s) {
      const long long q = parse_int(cells[static_cast<std::size_t>(s + 1)], where);
      row.push_back(static_cast<int>(q));
      total += q;
    }
    if (parse_int(cells.back(), where) != total) {
      throw ParseError(where + ": row total does not match its cells");
    }
    rows.push_back(row);
  }
  const std::vector<std::string> total_row = split_csv_line(lines.back());
  if (total_row.empty() || total_row.front() != "total" ||
      static_cast<int>(total_row.size()) != v + 2) {
    throw ParseError("allocation csv: last row must be the total row");
  }
  const int u = static_cast<int>(file.dataset_names.size());
  file.allocation.counts = Eigen::MatrixXi::Zero(u, v);
  long long grand = 0;
  for (int s = 0; s < v; ++s) {
    long long col = 0;
    for (int d = 0; d < u; ++d) {
      file.allocation.counts(d, s) = rows[static_cast<std::size_t>(d)][static_cast<std::size_t>(s)];
      col += file.allocation.counts(d, s);
    }
    if (parse_int(total_row[static_cast<std::size_t>(s + 1)], "allocation csv total row") != col) {
      throw ParseError("allocation csv: scenario total does not match its column");
    }
    grand += col;
  }
  if (parse_int(total_row.back(), "allocation csv total row") != grand) {
    throw ParseError("allocation csv: grand total does not match");
  }
  file.allocation.continuous = file.allocation.counts.cast<double>();
  file.allocation.objective = static_cast<double>(grand);
  return file;
}

std::string density_csv(const DensitySeries& series) {
  std::ostringstream out;
  out << "camera,lane_id,interval_start_utc_s,interval_length_s,k_veh_per_km,n_frames\n";
  for (const DensityRecord& r : series.records) {
    check_csv_safe(r.camera_id, "camera id");
    out << r.camera_id << "," << r.lane_id << "," << fmt_double(r.interval_start_utc_s) << ","
        << fmt_double(r.interval_length_s) << "," << fmt_double(r.k_veh_per_km) << ","
        << r.n_frames << "\n";
  }
  for (const DensityGap& g : series.gaps) {
    check_csv_safe(g.camera_id, "camera id");
    out << g.camera_id << ",," << fmt_double(g.interval_start_utc_s) << ",,,0\n";
  }
  return out.str();
}

DensitySeries parse_density_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines.empty() ||
      lines[0] != "camera,lane_id,interval_start_utc_s,interval_length_s,k_veh_per_km,n_frames") {
    throw ParseError("density csv: unexpected header");
  }
  DensitySeries series;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "density csv row " + std::to_string(i + 1);
    const std::vector<std::string> cells = split_csv_line(lines[i]);
    if (cells.size() != 6) throw ParseError(where + ": expected 6 columns");
    if (cells[1].empty()) {
      DensityGap gap;
      gap.camera_id = cells[0];
      gap.interval_start_utc_s = parse_double(cells[2], where);
      series.gaps.push_back(gap);
      continue;
    }
    DensityRecord r;
    r.camera_id = cells[0];
    r.lane_id = static_cast<int>(parse_int(cells[1], where));
    r.interval_start_utc_s = parse_double(cells[2], where);
    r.interval_length_s = parse_double(cells[3], where);
    r.k_veh_per_km = parse_double(cells[4], where);
    r.n_frames = static_cast<int>(parse_int(cells[5], where));
    series.records.push_back(r);
  }
  return series;
}

std::string st_grid_csv(const std::vector<StCell>& cells) {
  std::ostringstream out;
  out << "time_bin,space_bin,mean_k_veh_per_km,n_frames,vehicle_count\n";
  for (const StCell& c : cells) {
    out << c.time_bin << "," << c.space_bin << "," << fmt_double(c.mean_k_veh_per_km) << ","
        << c.n_frames << "," << c.vehicle_count << "\n";
  }
  return out.str();
}

std::vector<StCell> parse_st_grid_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines.empty() || lines[0] != "time_bin,space_bin,mean_k_veh_per_km,n_frames,vehicle_count") {
    throw ParseError("st grid csv: unexpected header");
  }
  std::vector<StCell> cells;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "st grid csv row " + std::to_string(i + 1);
    const std::vector<std::string> f = split_csv_line(lines[i]);
    if (f.size() != 5) throw ParseError(where + ": expected 5 columns");
    StCell c;
    c.time_bin = parse_int(f[0], where);
    c.space_bin = static_cast<int>(parse_int(f[1], where));
    c.mean_k_veh_per_km = parse_double(f[2], where);
    c.n_frames = static_cast<int>(parse_int(f[3], where));
    c.vehicle_count = static_cast<int>(parse_int(f[4], where));
    cells.push_back(c);
  }
  return cells;
}

std::string dow_pivot_csv(const std::vector<DowCell>& cells) {
  std::ostringstream out;
  out << "day_of_week,time_of_day_bin,mean_k_veh_per_km,n_records\n";
  for (const DowCell& c : cells) {
    out << c.day_of_week << "," << c.time_of_day_bin << "," << fmt_double(c.mean_k_veh_per_km)
        << "," << c.n_records << "\n";
  }
  return out.str();
}

std::vector<DowCell> parse_dow_pivot_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines.empty() || lines[0] != "day_of_week,time_of_day_bin,mean_k_veh_per_km,n_records") {
    throw ParseError("day-of-week csv: unexpected header");
  }
  std::vector<DowCell> cells;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "day-of-week csv row " + std::to_string(i + 1);
    const std::vector<std::string> f = split_csv_line(lines[i]);
    if (f.size() != 4) throw ParseError(where + ": expected 4 columns");
    DowCell c;
    c.day_of_week = static_cast<int>(parse_int(f[0], where));
    c.time_of_day_bin = static_cast<int>(parse_int(f[1], where));
    c.mean_k_veh_per_km = parse_double(f[2], where);
    c.n_records = static_cast<int>(parse_int(f[3], where));
    cells.push_back(c);
  }
  return cells;
}

ReportMap load_report(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  const json& values = field(j, "values", path);
  if (!values.is_object()) throw ParseError(path + ": 'values' must be an object");
  ReportMap report;
  for (const auto& [key, value] : values.items()) {
    if (!value.is_number()) throw ParseError(path + ": value '" + key + "' must be a number");
    report[key] = value.get<double>();
  }
  return report;
}

void save_report(const ReportMap& report, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["values"] = json::object();
  for (const auto& [key, value] : report) j["values"][key] = value;
  dump_to_file(j, path);
}

std::string tidy_csv(const TidyTable& table) {
  std::ostringstream out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    check_csv_safe(table.columns[c], "column name");
    out << (c ? "," : "") << table.columns[c];
  }
  out << "\n";
  for (const std::vector<double>& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw InputError("tidy table row width does not match the column count");
    }
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << fmt_double(row[c]);
    out << "\n";
  }
  return out.str();
}

TidyTable parse_tidy_csv(const std::string& text) {
  const std::vector<std::string> lines = csv_lines(text);
  if (lines.empty()) throw ParseError("tidy csv: missing header");
  TidyTable table;
  table.columns = split_csv_line(lines[0]);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "tidy csv row " + std::to_string(i + 1);
    const std::vector<std::string> cells = split_csv_line(lines[i]);
    if (cells.size() != table.columns.size()) throw ParseError(where + ": wrong column count");
    std::vector<double> row;
    for (const std::string& cell : cells) row.push_back(parse_double(cell, where));
    table.rows.push_back(row);
  }
  return table;
}

FdFile load_fd(const std::string& path) {
  const json j = parse_json_text(read_text_file(path), path);
  require_version(j, path);
  FdFile file;
  file.params.model = fd_model_from_name(str_field(j, "model", path));
  file.params.v_f_km_h = num_field(j, "v_f_km_h", path);
  file.params.k_j_veh_km = num_field(j, "k_j_veh_km", path);
  file.params.lambda_slope = num_field(j, "lambda_slope", path);
  file.residual_sum_squares = num_field(j, "residual_sum_squares", path);
  file.max_flow_veh_h = num_field(j, "max_flow_veh_h", path);
  file.max_flow_density_veh_km = num_field(j, "max_flow_density_veh_km", path);
  return file;
}

void save_fd(const FdFile& file, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = fd_model_name(file.params.model);
  j["v_f_km_h"] = file.params.v_f_km_h;
  j["k_j_veh_km"] = file.params.k_j_veh_km;
  j["lambda_slope"] = file.params.lambda_slope;
  j["residual_sum_squares"] = file.residual_sum_squares;
  j["max_flow_veh_h"] = file.max_flow_veh_h;
  j["max_flow_density_veh_km"] = file.max_flow_density_veh_km;
  dump_to_file(j, path);
}

}  // namespace camdense
