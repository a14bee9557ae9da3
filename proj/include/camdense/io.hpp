#ifndef CAMDENSE_IO_HPP
#define CAMDENSE_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "camdense/dataset_mixer.hpp"
#include "camdense/density.hpp"
#include "camdense/detection.hpp"
#include "camdense/fd_fit.hpp"
#include "camdense/geometry.hpp"
#include "camdense/lanes.hpp"
#include "camdense/measurement.hpp"
#include "camdense/mvcalib.hpp"
#include "camdense/vehicle.hpp"

namespace camdense {

/// Version stamped into every JSON file; parsers reject other versions.
inline constexpr int kSchemaVersion = 1;

/// Tool configuration, parsed from key=value lines ('#' starts a comment).
/// Unknown keys are rejected with the line number.
struct Config {
  double f_default_px = 350.0;
  double alpha = 6.0;
  double tau_per_m = -0.03;
  int matching_evaluations = 4000;
  int fine_tune_evaluations = 20000;
  double beta = 0.25;
  double gamma = 0.25;
  double ransac_threshold_px = 8.0;
  double confidence_min = 0.25;
  double interval_s = 900.0;
  std::uint64_t seed = 0;
};

Config parse_config(const std::string& text);
std::string format_config(const Config& config);
Config load_config(const std::string& path);
void save_config(const Config& config, const std::string& path);
MvcalibConfig to_mvcalib_config(const Config& config);

/// Keypoint labels for one camera frame plus the frame dimensions.
struct AnnotationFile {
  ImageSize size;
  std::vector<VehicleAnnotation> vehicles;
};

AnnotationFile load_annotations(const std::string& path);
void save_annotations(const AnnotationFile& file, const std::string& path);

std::vector<VehicleModel> load_model_library(const std::string& path);
void save_model_library(const std::vector<VehicleModel>& models, const std::string& path);

/// Calibration output: the camera parameters (rotation in both encodings)
/// plus per-stage diagnostics.
struct CalibrationFile {
  CameraParams params;
  ImageSize size;
  int anchor_index = -1;
  double stage1_loss = 0.0;
  double stage2_loss = 0.0;
  double final_loss = 0.0;
  int degenerate_pairs = 0;
  bool single_vehicle_fallback = false;
  std::vector<VehicleFit> matched;
  std::vector<int> skipped_vehicles;
};

CalibrationFile load_calibration(const std::string& path);
void save_calibration(const CalibrationFile& file, const std::string& path);
CalibrationFile to_calibration_file(const CalibResult& result, const ImageSize& size);

std::vector<GroundSegmentSet> load_markings(const std::string& path);
void save_markings(const std::vector<GroundSegmentSet>& sets, const std::string& path);

std::vector<LaneGeometry> load_lanes(const std::string& path);
void save_lanes(const std::vector<LaneGeometry>& lanes, const std::string& path);

/// JSON-lines detections: {"ts": s, "camera": id, "boxes": [[x1,y1,x2,y2,conf], ...]}.
/// Ground-truth boxes may omit conf (read back as 1). Timestamps must be
/// nondecreasing per camera.
std::vector<DetectionFrame> load_detections(const std::string& path);
void save_detections(const std::vector<DetectionFrame>& frames, const std::string& path,
                     bool with_confidence = true);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Allocation JSON carries the manifest axes so it stands alone.
struct AllocationFile {
  std::vector<std::string> dataset_names;
  std::vector<std::string> scenario_names;
  Allocation allocation;
};

AllocationFile load_allocation(const std::string& path);
void save_allocation(const AllocationFile& file, const std::string& path);

/// Counts table with per-dataset and per-scenario totals, one dataset per
/// row, scenarios as columns.
std::string allocation_csv(const AllocationFile& file);
AllocationFile parse_allocation_csv(const std::string& text);

/// camera,lane_id,interval_start_utc_s,interval_length_s,k_veh_per_km,n_frames;
/// gap intervals keep only camera and start, with n_frames 0.
std::string density_csv(const DensitySeries& series);
DensitySeries parse_density_csv(const std::string& text);

std::string st_grid_csv(const std::vector<StCell>& cells);
std::vector<StCell> parse_st_grid_csv(const std::string& text);

std::string dow_pivot_csv(const std::vector<DowCell>& cells);
std::vector<DowCell> parse_dow_pivot_csv(const std::string& text);

/// Flat named-number report, the JSON output format of the evaluation
/// subcommands.
using ReportMap = std::map<std::string, double>;

ReportMap load_report(const std::string& path);
void save_report(const ReportMap& report, const std::string& path);

/// All-numeric table with named columns; the --plot-data CSV format.
struct TidyTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string tidy_csv(const TidyTable& table);
TidyTable parse_tidy_csv(const std::string& text);

struct FdFile {
  FdParams params;
  double residual_sum_squares = 0.0;
  double max_flow_veh_h = 0.0;
  double max_flow_density_veh_km = 0.0;
};

FdFile load_fd(const std::string& path);
void save_fd(const FdFile& file, const std::string& path);

/// Whole-file helpers; throw InputError when the path cannot be opened.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace camdense

#endif  // CAMDENSE_IO_HPP
