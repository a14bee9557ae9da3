#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "camdense/density.hpp"
#include "camdense/detection.hpp"
#include "camdense/errors.hpp"
#include "camdense/fd_fit.hpp"
#include "camdense/fetch.hpp"
#include "camdense/io.hpp"
#include "camdense/measurement.hpp"
#include "camdense/mvcalib.hpp"
#include "camdense/synth.hpp"
#include "camdense/vehicle.hpp"

namespace {

using namespace camdense;

Config effective_config(const std::string& config_path, bool seed_set, std::uint64_t seed) {
  Config config = config_path.empty() ? Config{} : load_config(config_path);
  if (seed_set) config.seed = seed;
  return config;
}

struct CalibrateOpts {
  std::string annotations, models, config, output;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool candidates_only = false;
};

void run_calibrate(const CalibrateOpts& opt) {
  const Config config = effective_config(opt.config, opt.seed_set, opt.seed);
  std::cout << "configuration:\n" << format_config(config);

  const AnnotationFile ann = load_annotations(opt.annotations);
  const std::vector<VehicleModel> models =
      opt.models.empty() ? default_model_library() : load_model_library(opt.models);
  const MvcalibConfig mv = to_mvcalib_config(config);

  CalibrationFile file;
  if (opt.candidates_only) {
    const CandidateSet candidates = candidate_generation(ann.vehicles, models, mv.f_default_px,
                                                         ann.size, mv.ransac, mv.seed);
    file.params = best_candidate_params(candidates);
    file.size = ann.size;
    for (const int v : candidates.skipped_vehicles) file.skipped_vehicles.push_back(v);
    std::cout << "candidate stage only: " << candidates.candidates.size() << " candidates, "
              << candidates.infeasible_pairs.size() << " infeasible pairs\n";
  } else {
    const CalibResult result = calibrate(ann.vehicles, models, ann.size, mv);
    file = to_calibration_file(result, ann.size);
    std::cout << "anchor vehicle: " << result.anchor_index << "\n"
              << "stage losses: " << result.stage1_loss << " -> " << result.stage2_loss << " -> "
              << result.final_loss << "\n";
  }
  save_calibration(file, opt.output);
  std::cout << "focal_px: " << file.params.focal_px << "\n"
            << "calibration written to " << opt.output << "\n";
}

struct MeasureOpts {
  std::string calibration, markings, report, plot_data;
};

void run_measure(const MeasureOpts& opt) {
  const CalibrationFile calib = load_calibration(opt.calibration);
  const std::vector<GroundSegmentSet> sets = load_markings(opt.markings);
  const LengthErrorStats stats = evaluate_markings(sets, calib.params, calib.size);
  std::cout << "segments: " << stats.n_segments << "\n"
            << "rmse_m: " << stats.rmse_m << "\n"
            << "mae_m: " << stats.mae_m << "\n"
            << "mape_percent: " << stats.mape_percent << "\n";
  if (!opt.report.empty()) {
    save_report({{"rmse_m", stats.rmse_m},
                 {"mae_m", stats.mae_m},
                 {"mape_percent", stats.mape_percent},
                 {"n_segments", static_cast<double>(stats.n_segments)}},
                opt.report);
  }
  if (!opt.plot_data.empty()) {
    TidyTable table;
    table.columns = {"set", "segment", "estimated_length_m", "true_length_m"};
    for (std::size_t s = 0; s < sets.size(); ++s) {
      const GroundSegmentSet& set = sets[s];
      for (std::size_t i = 0; i + 1 < set.points_px.size(); ++i) {
        const double est = ground_distance(set.points_px[i], set.points_px[i + 1], calib.params,
                                           calib.size);
        table.rows.push_back({static_cast<double>(s), static_cast<double>(i), est,
                              set.true_length_m.value_or(std::nan(""))});
      }
    }
    write_text_file(opt.plot_data, tidy_csv(table));
  }
}

struct MixOpts {
  std::string manifest, config, output_json, output_csv, verify;
  double beta = -1.0, gamma = -1.0;  // negative means take the config value
};

void run_mix(const MixOpts& opt) {
  const Config config = effective_config(opt.config, false, 0);
  const double beta = opt.beta < 0.0 ? config.beta : opt.beta;
  const double gamma = opt.gamma < 0.0 ? config.gamma : opt.gamma;
  const DatasetManifest manifest = load_manifest(opt.manifest);

  if (!opt.verify.empty()) {
    const AllocationFile file = load_allocation(opt.verify);
    const AllocationReport report =
        verify_allocation(file.allocation.counts.cast<double>(), manifest, beta, gamma);
    for (const ConstraintSlack& c : report.constraints) {
      std::cout << (c.violated ? "VIOLATED " : "ok       ") << c.label << " slack " << c.slack
                << "\n";
    }
    std::cout << "violations: " << report.violations << "\n";
    if (report.violations > 0) {
      throw InputError("allocation violates " + std::to_string(report.violations) +
                       " constraints (worst slack " + std::to_string(report.worst_slack) + ")");
    }
    return;
  }

  const Allocation allocation = solve_allocation(manifest, beta, gamma);
  AllocationFile file;
  file.dataset_names = manifest.dataset_names;
  file.scenario_names = manifest.scenario_names;
  file.allocation = allocation;
  std::cout << "beta=" << beta << " gamma=" << gamma << "\n"
            << "objective: " << allocation.objective << "\n";
  for (int s = 0; s < allocation.counts.cols(); ++s) {
    std::cout << manifest.scenario_names[static_cast<std::size_t>(s)] << ": "
              << allocation.counts.col(s).sum() << "\n";
  }
  if (!opt.output_json.empty()) save_allocation(file, opt.output_json);
  if (!opt.output_csv.empty()) write_text_file(opt.output_csv, allocation_csv(file));
}

struct EvalOpts {
  std::string predictions, truth, report;
  double iou_threshold = 0.5;
};

void run_eval_detections(const EvalOpts& opt) {
  const std::vector<DetectionFrame> preds = load_detections(opt.predictions);
  const std::vector<DetectionFrame> truths = load_detections(opt.truth);

  std::map<std::pair<std::string, double>, EvalFrame> by_key;
  for (const DetectionFrame& f : preds) {
    EvalFrame& e = by_key[{f.camera_id, f.ts_utc_s}];
    e.preds.insert(e.preds.end(), f.boxes.begin(), f.boxes.end());
  }
  for (const DetectionFrame& f : truths) {
    EvalFrame& e = by_key[{f.camera_id, f.ts_utc_s}];
    e.truths.insert(e.truths.end(), f.boxes.begin(), f.boxes.end());
  }
  std::vector<EvalFrame> frames;
  for (const auto& [key, frame] : by_key) frames.push_back(frame);

  int tp = 0, fp = 0, fn = 0;
  for (const EvalFrame& f : frames) {
    const MatchResult m = match_detections(f.preds, f.truths, opt.iou_threshold);
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
  }
  const PrecisionRecall pr = precision_recall(tp, fp, fn);
  const double ap = average_precision(frames, opt.iou_threshold);
  const double map = mean_average_precision(frames);
  std::cout << "frames: " << frames.size() << "\n"
            << "tp/fp/fn: " << tp << "/" << fp << "/" << fn << "\n"
            << "precision: " << pr.precision << "\n"
            << "recall: " << pr.recall << "\n"
            << "ap@" << opt.iou_threshold << ": " << ap << "\n"
            << "map@0.5:0.95: " << map << "\n";
  if (!opt.report.empty()) {
    save_report({{"tp", static_cast<double>(tp)},
                 {"fp", static_cast<double>(fp)},
                 {"fn", static_cast<double>(fn)},
                 {"precision", pr.precision},
                 {"recall", pr.recall},
                 {"ap", ap},
                 {"map_50_95", map}},
                opt.report);
  }
}

struct DensityOpts {
  std::string detections, lanes, output, truth, report, pivot_output;
  std::string st_grid_output, calibration;
  std::string config;
  double interval_s = -1.0;
  double confidence_min = -1.0;
  double pivot_bin_s = 3600.0;
  double time_bin_s = 900.0;
  double space_bin_m = 50.0;
};

void run_density(const DensityOpts& opt) {
  const Config config = effective_config(opt.config, false, 0);
  const double interval = opt.interval_s > 0.0 ? opt.interval_s : config.interval_s;
  const double conf_min = opt.confidence_min >= 0.0 ? opt.confidence_min : config.confidence_min;

  const std::vector<DetectionFrame> det = load_detections(opt.detections);
  const std::vector<LaneGeometry> lanes = load_lanes(opt.lanes);

  std::vector<FrameCounts> counts;
  for (const DetectionFrame& frame : det) {
    FrameCounts fc;
    fc.ts_utc_s = frame.ts_utc_s;
    fc.camera_id = frame.camera_id;
    fc.counts_by_lane = count_per_lane(frame, lanes, conf_min);
    counts.push_back(fc);
  }
  const DensitySeries series = aggregate(counts, lanes, interval);
  std::cout << "records: " << series.records.size() << ", gaps: " << series.gaps.size() << "\n";
  if (!opt.output.empty()) write_text_file(opt.output, density_csv(series));

  ReportMap report;
  if (!opt.truth.empty()) {
    const DensitySeries truth = parse_density_csv(read_text_file(opt.truth));
    std::map<std::tuple<std::string, int, double>, double> truth_k;
    for (const DensityRecord& r : truth.records) {
      truth_k[{r.camera_id, r.lane_id, r.interval_start_utc_s}] = r.k_veh_per_km;
    }
    std::vector<double> est_v, truth_v;
    for (const DensityRecord& r : series.records) {
      const auto it = truth_k.find({r.camera_id, r.lane_id, r.interval_start_utc_s});
      if (it == truth_k.end()) continue;
      est_v.push_back(r.k_veh_per_km);
      truth_v.push_back(it->second);
    }
    if (est_v.empty()) throw InputError("no overlapping records between estimate and truth");
    const SeriesErrorStats stats = error_metrics(est_v, truth_v);
    std::cout << "compared records: " << est_v.size() << "\n"
              << "rmse: " << stats.rmse << "\n"
              << "mae: " << stats.mae << "\n"
              << "mape_percent: " << stats.mape_percent << " (" << stats.mape_skipped
              << " zero-truth points skipped)\n";
    report = {{"rmse", stats.rmse},
              {"mae", stats.mae},
              {"mape_percent", stats.mape_percent},
              {"mape_skipped", static_cast<double>(stats.mape_skipped)},
              {"n_compared", static_cast<double>(est_v.size())}};
  }
  if (!opt.report.empty()) {
    if (report.empty()) {
      report = {{"n_records", static_cast<double>(series.records.size())},
                {"n_gaps", static_cast<double>(series.gaps.size())}};
    }
    save_report(report, opt.report);
  }

  if (!opt.pivot_output.empty()) {
    write_text_file(opt.pivot_output,
                    dow_pivot_csv(day_week_pivot(series.records, opt.pivot_bin_s)));
  }

  if (!opt.st_grid_output.empty()) {
    if (opt.calibration.empty()) {
      throw InputError("--st-grid-output needs --calibration to place vehicles along the road");
    }
    const CalibrationFile calib = load_calibration(opt.calibration);
    std::vector<StFrame> st_frames;
    double y_lo = 1e300, y_hi = -1e300;
    for (const DetectionFrame& frame : det) {
      StFrame sf;
      sf.ts_utc_s = frame.ts_utc_s;
      for (const BoundingBox& box : frame.boxes) {
        if (box.confidence < conf_min) continue;
        const Point2 center((box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0);
        const std::optional<int> lane = assign_lane(box, lanes);
        if (!lane) continue;
        try {
          const Ray ray = back_project_ray(center, calib.params, calib.size);
          const double t = intersect_plane_t(ray, 0.0);
          if (t <= 0.0) continue;
          VehicleObs obs;
          obs.lane_id = *lane;
          obs.y_m = (ray.origin + t * ray.direction).y();
          sf.vehicles.push_back(obs);
          y_lo = std::min(y_lo, obs.y_m);
          y_hi = std::max(y_hi, obs.y_m);
        } catch (const NumericError&) {
          continue;
        }
      }
      st_frames.push_back(sf);
    }
    if (y_lo > y_hi) {
      y_lo = 0.0;
      y_hi = opt.space_bin_m;
    }
    const std::vector<StCell> cells =
        st_grid(st_frames, opt.time_bin_s, opt.space_bin_m, y_lo, y_hi + 1e-6);
    write_text_file(opt.st_grid_output, st_grid_csv(cells));
  }
}

struct FitFdOpts {
  std::string data, model = "newell", output, plot_data;
  std::uint64_t seed = 0;
};

void run_fit_fd(const FitFdOpts& opt) {
  const TidyTable table = parse_tidy_csv(read_text_file(opt.data));
  int k_col = -1, v_col = -1;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c] == "k_veh_per_km") k_col = static_cast<int>(c);
    if (table.columns[c] == "v_km_h") v_col = static_cast<int>(c);
  }
  if (k_col < 0 || v_col < 0) {
    throw InputError("fit-fd data needs columns k_veh_per_km and v_km_h");
  }
  std::vector<double> ks, vs;
  for (const std::vector<double>& row : table.rows) {
    ks.push_back(row[static_cast<std::size_t>(k_col)]);
    vs.push_back(row[static_cast<std::size_t>(v_col)]);
  }

  FdFile file;
  file.params = fit_fd(ks, vs, fd_model_from_name(opt.model), opt.seed);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double r = vs[i] - fd_speed(ks[i], file.params);
    file.residual_sum_squares += r * r;
  }
  file.max_flow_veh_h = max_flow(file.params);
  file.max_flow_density_veh_km = max_flow_density(file.params);
  std::cout << "model: " << fd_model_name(file.params.model) << "\n"
            << "v_f_km_h: " << file.params.v_f_km_h << "\n"
            << "k_j_veh_km: " << file.params.k_j_veh_km << "\n";
  if (file.params.model == FdModel::newell) {
    std::cout << "lambda_slope: " << file.params.lambda_slope << "\n";
  }
  std::cout << "max_flow_veh_h: " << file.max_flow_veh_h << " at k "
            << file.max_flow_density_veh_km << "\n";
  if (!opt.output.empty()) save_fd(file, opt.output);

  if (!opt.plot_data.empty()) {
    TidyTable curve;
    curve.columns = {"k_veh_per_km", "v_km_h", "q_veh_h"};
    const int n = 200;
    for (int i = 1; i <= n; ++i) {
      const double k = file.params.k_j_veh_km * i / n;
      const double v = fd_speed(k, file.params);
      curve.rows.push_back({k, v, flow(k, v)});
    }
    write_text_file(opt.plot_data, tidy_csv(curve));
  }
}

struct SynthOpts {
  std::string outdir, camera_id = "synth0";
  std::uint64_t seed = 0;
  int vehicles = 6;
  double noise_px = 0.5;
  int width = 320, height = 240;
  double confidence = 0.9;
};

void run_synth(const SynthOpts& opt) {
  std::filesystem::create_directories(opt.outdir);
  const std::vector<VehicleModel> models = default_model_library();
  const Scene scene = generate_scene(opt.seed, opt.vehicles, models, CameraRanges{}, opt.noise_px,
                                     ImageSize{opt.width, opt.height});
  const std::filesystem::path dir(opt.outdir);

  AnnotationFile ann;
  ann.size = scene.size;
  ann.vehicles = scene.annotations;
  save_annotations(ann, (dir / "annotations.json").string());
  save_model_library(models, (dir / "models.json").string());
  save_markings(scene_marking_sets(scene), (dir / "markings.json").string());
  save_lanes(scene_lanes(scene), (dir / "lanes.json").string());

  CalibrationFile truth;
  truth.params = scene.true_params;
  truth.size = scene.size;
  save_calibration(truth, (dir / "truth_calibration.json").string());

  DetectionFrame frame;
  frame.ts_utc_s = 0.0;
  frame.camera_id = opt.camera_id;
  frame.boxes = scene_boxes(scene, opt.confidence);
  save_detections({frame}, (dir / "detections.jsonl").string());

  TidyTable placements;
  placements.columns = {"vehicle_index", "model_index", "lane", "x_m", "y_m", "yaw_rad"};
  for (const ScenePlacement& p : scene.placements) {
    placements.rows.push_back({static_cast<double>(p.vehicle_index),
                               static_cast<double>(p.model_index), static_cast<double>(p.lane),
                               p.x_m, p.y_m, p.yaw_rad});
  }
  write_text_file((dir / "placements.csv").string(), tidy_csv(placements));

  std::cout << "scene seed " << opt.seed << ": " << scene.placements.size() << " vehicles, focal "
            << scene.true_params.focal_px << " px\n"
            << "files written to " << opt.outdir << "\n";
}

struct FetchOpts {
  std::string url, camera, outdir;
  double interval_s = 120.0;
  int max_frames = 1;
  int max_retries = 3;
  double backoff_s = 1.0;
};

void run_fetch(const FetchOpts& opt) {
  FetchConfig config;
  config.url = opt.url;
  config.camera_id = opt.camera;
  config.output_dir = opt.outdir;
  config.interval_s = opt.interval_s;
  config.max_frames = opt.max_frames;
  config.max_retries = opt.max_retries;
  config.backoff_base_s = opt.backoff_s;
  const FetchStats stats = fetch_feed(config);
  for (const std::string& line : stats.messages) std::cout << line << "\n";
  std::cout << "stored: " << stats.stored << ", skipped: " << stats.skipped
            << ", retries: " << stats.retries << ", failures: " << stats.failures << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic-camera calibration and density estimation toolkit"};
  app.require_subcommand(1);

  CalibrateOpts cal;
  CLI::App* c = app.add_subcommand("calibrate", "estimate camera parameters from vehicle keypoints");
  c->add_option("--annotations", cal.annotations, "keypoint annotation JSON")->required();
  c->add_option("--models", cal.models, "vehicle model library JSON (default: built-in sedans)");
  c->add_option("--config", cal.config, "key=value configuration file");
  c->add_option("--output", cal.output, "calibration JSON to write")->required();
  c->add_option("--seed", cal.seed, "random seed override")->each([&cal](const std::string&) {
    cal.seed_set = true;
  });
  c->add_flag("--candidates-only", cal.candidates_only,
              "stop after the robust per-vehicle candidate stage (ablation baseline)");
  c->callback([&cal] { run_calibrate(cal); });

  MeasureOpts mea;
  CLI::App* m = app.add_subcommand("measure", "evaluate ground lengths under a calibration");
  m->add_option("--calibration", mea.calibration, "calibration JSON")->required();
  m->add_option("--markings", mea.markings, "road-marking polylines JSON")->required();
  m->add_option("--report", mea.report, "error report JSON to write");
  m->add_option("--plot-data", mea.plot_data, "per-segment tidy CSV to write");
  m->callback([&mea] { run_measure(mea); });

  MixOpts mix;
  CLI::App* x = app.add_subcommand("mix", "balance image counts across datasets and scenarios");
  x->add_option("--manifest", mix.manifest, "dataset manifest JSON")->required();
  x->add_option("--config", mix.config, "key=value configuration file");
  x->add_option("--beta", mix.beta, "dataset share tolerance (default from config)");
  x->add_option("--gamma", mix.gamma, "scenario share tolerance (default from config)");
  x->add_option("--output-json", mix.output_json, "allocation JSON to write");
  x->add_option("--output-csv", mix.output_csv, "allocation table CSV to write");
  x->add_option("--verify", mix.verify, "audit this allocation JSON instead of solving");
  x->callback([&mix] { run_mix(mix); });

  EvalOpts ev;
  CLI::App* e = app.add_subcommand("eval-detections", "score detections against ground truth");
  e->add_option("--predictions", ev.predictions, "predicted boxes JSONL")->required();
  e->add_option("--truth", ev.truth, "ground-truth boxes JSONL")->required();
  e->add_option("--iou-threshold", ev.iou_threshold, "IoU threshold for AP and matching")
      ->check(CLI::Range(0.0, 1.0));
  e->add_option("--report", ev.report, "metrics report JSON to write");
  e->callback([&ev] { run_eval_detections(ev); });

  DensityOpts den;
  CLI::App* d = app.add_subcommand("density", "aggregate lane densities from detections");
  d->add_option("--detections", den.detections, "detection frames JSONL")->required();
  d->add_option("--lanes", den.lanes, "lane geometry JSON")->required();
  d->add_option("--config", den.config, "key=value configuration file");
  d->add_option("--interval-s", den.interval_s, "aggregation interval (default from config)");
  d->add_option("--confidence-min", den.confidence_min,
                "detection confidence cutoff (default from config)");
  d->add_option("--output", den.output, "density CSV to write");
  d->add_option("--truth", den.truth, "reference density CSV to compare against");
  d->add_option("--report", den.report, "error report JSON to write");
  d->add_option("--pivot-output", den.pivot_output, "day-of-week pivot CSV to write");
  d->add_option("--pivot-bin-s", den.pivot_bin_s, "time-of-day bin for the pivot");
  d->add_option("--st-grid-output", den.st_grid_output, "space-time grid CSV to write");
  d->add_option("--calibration", den.calibration, "calibration JSON for road positions");
  d->add_option("--time-bin-s", den.time_bin_s, "space-time grid time bin");
  d->add_option("--space-bin-m", den.space_bin_m, "space-time grid road bin");
  d->callback([&den] { run_density(den); });

  FitFdOpts fd;
  CLI::App* f = app.add_subcommand("fit-fd", "fit a fundamental diagram to density/speed data");
  f->add_option("--data", fd.data, "tidy CSV with k_veh_per_km and v_km_h columns")->required();
  f->add_option("--model", fd.model, "newell or greenshields");
  f->add_option("--seed", fd.seed, "random seed");
  f->add_option("--output", fd.output, "fitted parameters JSON to write");
  f->add_option("--plot-data", fd.plot_data, "fitted curve tidy CSV to write");
  f->callback([&fd] { run_fit_fd(fd); });

  SynthOpts syn;
  CLI::App* s = app.add_subcommand("synth", "generate a synthetic annotated road scene");
  s->add_option("--outdir", syn.outdir, "directory for the scene files")->required();
  s->add_option("--seed", syn.seed, "random seed");
  s->add_option("--vehicles", syn.vehicles, "number of vehicles")->check(CLI::PositiveNumber);
  s->add_option("--noise-px", syn.noise_px, "keypoint annotation noise");
  s->add_option("--width", syn.width, "frame width in pixels")->check(CLI::PositiveNumber);
  s->add_option("--height", syn.height, "frame height in pixels")->check(CLI::PositiveNumber);
  s->add_option("--confidence", syn.confidence, "confidence of the synthetic boxes");
  s->add_option("--camera-id", syn.camera_id, "camera id in the detection stream");
  s->callback([&syn] { run_synth(syn); });

  FetchOpts fe;
  CLI::App* g = app.add_subcommand("fetch", "poll a camera feed into timestamped snapshots");
  g->add_option("--url", fe.url, "snapshot endpoint URL")->required();
  g->add_option("--camera", fe.camera, "camera id (directory name)")->required();
  g->add_option("--outdir", fe.outdir, "output root directory")->required();
  g->add_option("--interval-s", fe.interval_s, "seconds between snapshots");
  g->add_option("--max-frames", fe.max_frames, "snapshots to take")->check(CLI::PositiveNumber);
  g->add_option("--max-retries", fe.max_retries, "retries per snapshot");
  g->add_option("--backoff-s", fe.backoff_s, "first retry delay, doubled per retry");
  g->callback([&fe] { run_fetch(fe); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& help) {
    return app.exit(help);
  } catch (const CLI::CallForAllHelp& help) {
    return app.exit(help);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  } catch (const NetworkError& err) {
    std::cerr << "network error: " << err.what() << "\n";
    return 4;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 3;
  } catch (const InputError& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
