#include "camdense/mvcalib.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "camdense/cmaes.hpp"
#include "camdense/errors.hpp"
#include "camdense/rng.hpp"

namespace camdense {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Optimizer setup shared by stages 2 and 3: bounds keep the focal positive,
// sigma0 is a tenth of each coordinate's magnitude scale.
CmaBounds focal_bounds() {
  CmaBounds b;
  b.lower = Eigen::VectorXd::Constant(7, -kInf);
  b.upper = Eigen::VectorXd::Constant(7, kInf);
  b.lower(0) = 1.0;
  b.upper(0) = 1e4;
  return b;
}

Eigen::VectorXd pose_sigma0(const Eigen::Matrix<double, 7, 1>& x0) {
  Eigen::VectorXd s(7);
  // The focal step is deliberately wide: runs start from a default focal
  // that can sit a factor of two from the true one, and the optimizer has
  // to cover that gap inside a few thousand evaluations.
  s(0) = 0.3 * std::max(std::abs(x0(0)), 100.0);
  for (int i = 1; i < 4; ++i) s(i) = 0.1;
  for (int i = 4; i < 7; ++i) s(i) = 0.1 * std::max(std::abs(x0(i)), 1.0);
  return s;
}

// Aligned (pixel, model point) lists in canonical keypoint order.
void aligned_correspondences(const VehicleAnnotation& annotation, const VehicleModel& model,
                             std::vector<Point2>* pixels, std::vector<Point3>* points) {
  pixels->clear();
  points->clear();
  for (const auto& name : keypoint_names()) {
    const auto it = annotation.keypoints_px.find(name);
    if (it == annotation.keypoints_px.end()) continue;
    const auto mit = model.keypoints_m.find(name);
    if (mit == model.keypoints_m.end()) {
      throw InputError("model '" + model.model_name + "' is missing keypoint '" + name + "'");
    }
    pixels->push_back(it->second);
    points->push_back(mit->second);
  }
}

// Back-projection of every annotated keypoint; false when any ray misses the
// plane or hits it behind the camera.
bool back_project_aligned(const VehicleAnnotation& annotation, const VehicleModel& model,
                          const CameraParams& params, const ImageSize& size,
                          std::vector<Point3>* back, std::vector<Point3>* model_pts) {
  std::vector<Point2> pixels;
  aligned_correspondences(annotation, model, &pixels, model_pts);
  back->clear();
  back->reserve(pixels.size());
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    Ray ray;
    try {
      ray = back_project_ray(pixels[k], params, size);
    } catch (const NumericError&) {
      return false;
    }
    const double plane_z = (*model_pts)[k].z();
    if (std::abs(ray.direction.z()) < 1e-12) return false;
    const double t = intersect_plane_t(ray, plane_z);
    if (t <= 0.0) return false;
    Point3 p = ray.origin + t * ray.direction;
    p.z() = plane_z;
    back->push_back(p);
  }
  return true;
}

double pair_loss(const std::vector<Point3>& back, const std::vector<Point3>& model_pts,
                 double alpha, int* pairs_skipped) {
  double loss = 0.0;
  for (std::size_t a = 0; a < back.size(); ++a) {
    for (std::size_t b = a + 1; b < back.size(); ++b) {
      const Eigen::Vector3d w = back[b] - back[a];
      const Eigen::Vector3d v = model_pts[b] - model_pts[a];
      const double wn = w.norm();
      const double vn = v.norm();
      if (wn < 1e-12 || vn < 1e-12) {
        if (pairs_skipped != nullptr) ++*pairs_skipped;
        continue;
      }
      const double cosang = std::clamp(w.dot(v) / (wn * vn), -1.0, 1.0);
      loss += std::abs(wn - vn) + alpha * std::sqrt(1.0 - cosang * cosang);
    }
  }
  return loss;
}

// One vehicle's role in the joint fine-tune objective.
struct Participant {
  const VehicleAnnotation* annotation = nullptr;
  const VehicleModel* model = nullptr;
  int vehicle_index = 0;
};

// Weighted joint loss across participants for one camera hypothesis.
// +infinity when any participant fails to back-project.
double joint_loss(const std::vector<Participant>& participants, int anchor_pos,
                  const CameraParams& params, const ImageSize& size, double alpha,
                  double tau, int* pairs_skipped = nullptr) {
  std::vector<Point3> centroids(participants.size());
  std::vector<double> losses(participants.size());
  std::vector<Point3> back, model_pts;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    if (!back_project_aligned(*participants[i].annotation, *participants[i].model, params,
                              size, &back, &model_pts)) {
      return kInf;
    }
    Point3 c = Point3::Zero();
    for (const auto& p : back) c += p;
    centroids[i] = c / static_cast<double>(back.size());
    losses[i] = pair_loss(back, model_pts, alpha, pairs_skipped);
  }
  const std::vector<double> weights = anchor_weights(centroids, anchor_pos, tau);
  double total = 0.0;
  for (std::size_t i = 0; i < participants.size(); ++i) total += weights[i] * losses[i];
  return total;
}

}  // namespace

CandidateSet candidate_generation(const std::vector<VehicleAnnotation>& annotations,
                                  const std::vector<VehicleModel>& models,
                                  double f_default_px, const ImageSize& size,
                                  const RansacConfig& ransac, std::uint64_t seed) {
  CandidateSet out;
  std::vector<std::uint64_t> model_hashes(models.size());
  for (std::size_t j = 0; j < models.size(); ++j) model_hashes[j] = model_content_hash(models[j]);

  bool any_processed = false;
  for (const auto& annotation : annotations) {
    validate_annotation(annotation);
    if (annotation.keypoints_px.size() < 4) {
      out.skipped_vehicles.push_back(annotation.vehicle_index);
      continue;
    }
    any_processed = true;
    for (std::size_t j = 0; j < models.size(); ++j) {
      std::vector<Point2> pixels;
      std::vector<Point3> points;
      aligned_correspondences(annotation, models[j], &pixels, &points);
      RansacConfig rc = ransac;
      rc.seed = mix_seed(mix_seed(seed, 0x3001 + static_cast<std::uint64_t>(
                                              annotation.vehicle_index)),
                         model_hashes[j]);
      try {
        const RansacPnpResult fit = solve_pnp_ransac(points, pixels, f_default_px, size, rc);
        Candidate c;
        c.vehicle_index = annotation.vehicle_index;
        c.model_index = static_cast<int>(j);
        c.params.focal_px = f_default_px;
        c.params.rotation = fit.rotation;
        c.params.translation_m = fit.translation_m;
        c.reprojection_error_px = fit.mean_inlier_error_px;
        out.candidates.push_back(c);
      } catch (const Error&) {
        out.infeasible_pairs.emplace_back(annotation.vehicle_index, static_cast<int>(j));
      }
    }
  }
  if (!any_processed) throw NoFeasibleVehicle();
  return out;
}

double projection_loss(const CameraParams& params, const VehicleAnnotation& annotation,
                       const VehicleModel& model, const ImageSize& size) {
  double loss = 0.0;
  for (const auto& name : keypoint_names()) {
    const auto it = annotation.keypoints_px.find(name);
    if (it == annotation.keypoints_px.end()) continue;
    const auto mit = model.keypoints_m.find(name);
    if (mit == model.keypoints_m.end()) {
      throw InputError("model '" + model.model_name + "' is missing keypoint '" + name + "'");
    }
    try {
      loss += (it->second - project(mit->second, params, size)).norm();
    } catch (const PointBehindCamera&) {
      return kInf;
    }
  }
  return loss;
}

std::vector<VehicleFit> model_matching(const CandidateSet& candidates,
                                       const std::vector<VehicleAnnotation>& annotations,
                                       const std::vector<VehicleModel>& models,
                                       const ImageSize& size, const MvcalibConfig& config) {
  std::vector<std::uint64_t> model_hashes(models.size());
  for (std::size_t j = 0; j < models.size(); ++j) model_hashes[j] = model_content_hash(models[j]);

  std::vector<VehicleFit> fits;
  for (const auto& annotation : annotations) {
    bool have = false;
    VehicleFit best_fit;
    for (const auto& cand : candidates.candidates) {
      if (cand.vehicle_index != annotation.vehicle_index) continue;
      const VehicleModel& model = models[static_cast<std::size_t>(cand.model_index)];
      auto objective = [&](const Eigen::VectorXd& x) {
        return projection_loss(CameraParams::from_vector7(x), annotation, model, size);
      };
      const Eigen::Matrix<double, 7, 1> x0 = cand.params.to_vector7();
      CmaConfig cma;
      cma.max_evaluations = config.matching_evaluations;
      cma.sigma0 = pose_sigma0(x0);
      cma.seed = mix_seed(mix_seed(config.seed, 0x5001 + static_cast<std::uint64_t>(
                                                    annotation.vehicle_index)),
                          model_hashes[static_cast<std::size_t>(cand.model_index)]);
      const CmaResult r = cmaes_minimize(objective, x0, cma, focal_bounds());

      VehicleFit current;
      current.vehicle_index = annotation.vehicle_index;
      current.model_index = cand.model_index;
      current.params = CameraParams::from_vector7(r.x);
      current.projection_loss_px = r.f;
      if (!have || current.projection_loss_px < best_fit.projection_loss_px) {
        best_fit = current;
        have = true;
      }
    }
    if (have) fits.push_back(best_fit);
  }
  return fits;
}

std::vector<Point3> back_project_points(const VehicleAnnotation& annotation,
                                        const VehicleModel& model,
                                        const CameraParams& anchor_params,
                                        const ImageSize& size) {
  std::vector<Point2> pixels;
  std::vector<Point3> model_pts;
  aligned_correspondences(annotation, model, &pixels, &model_pts);
  std::vector<Point3> back;
  back.reserve(pixels.size());
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    const Ray ray = back_project_ray(pixels[k], anchor_params, size);
    const double plane_z = model_pts[k].z();
    const double t = intersect_plane_t(ray, plane_z);  // throws RayParallelToPlane
    if (t <= 0.0) {
      throw PointBehindCamera("back-projected keypoint meets its height plane behind the camera");
    }
    Point3 p = ray.origin + t * ray.direction;
    p.z() = plane_z;
    back.push_back(p);
  }
  return back;
}

double fine_tune_loss(const VehicleAnnotation& annotation, const VehicleModel& model,
                      const CameraParams& anchor_params, const ImageSize& size,
                      double alpha, int* pairs_skipped) {
  std::vector<Point3> back, model_pts;
  if (!back_project_aligned(annotation, model, anchor_params, size, &back, &model_pts)) {
    return kInf;
  }
  if (back.size() < 2) {
    throw TooFewPoints("pairwise loss needs at least 2 back-projectable keypoints");
  }
  return pair_loss(back, model_pts, alpha, pairs_skipped);
}

std::vector<double> anchor_weights(const std::vector<Point3>& centroids, int anchor_pos,
                                   double tau) {
  std::vector<double> exponents(centroids.size());
  double max_e = -kInf;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    exponents[i] =
        tau * (centroids[i] - centroids[static_cast<std::size_t>(anchor_pos)]).norm();
    max_e = std::max(max_e, exponents[i]);
  }
  std::vector<double> weights(centroids.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    weights[i] = std::exp(exponents[i] - max_e);  // shift for overflow safety
    sum += weights[i];
  }
  for (auto& w : weights) w /= sum;
  return weights;
}

CalibResult fine_tune(const CandidateSet& candidates, const std::vector<VehicleFit>& stage2,
                      const std::vector<VehicleAnnotation>& annotations,
                      const std::vector<VehicleModel>& models, const ImageSize& size,
                      const MvcalibConfig& config) {
  if (stage2.empty()) throw NoFeasibleVehicle();

  auto annotation_by_index = [&](int vehicle_index) -> const VehicleAnnotation& {
    for (const auto& a : annotations) {
      if (a.vehicle_index == vehicle_index) return a;
    }
    throw InputError("no annotation for vehicle " + std::to_string(vehicle_index));
  };
  auto candidate_for = [&](int vehicle_index, int model_index) -> const Candidate* {
    for (const auto& c : candidates.candidates) {
      if (c.vehicle_index == vehicle_index && c.model_index == model_index) return &c;
    }
    return nullptr;
  };

  CalibResult result;
  result.matched = stage2;
  result.skipped_vehicles = candidates.skipped_vehicles;

  if (stage2.size() == 1) {
    // Joint information needs at least two vehicles; report the single fit,
    // falling back to the candidate pose when it scores better.
    const VehicleFit& only = stage2.front();
    result.anchor_index = only.vehicle_index;
    result.single_vehicle_fallback = true;
    std::vector<Participant> parts{{&annotation_by_index(only.vehicle_index),
                                    &models[static_cast<std::size_t>(only.model_index)],
                                    only.vehicle_index}};
    const double matched_loss =
        joint_loss(parts, 0, only.params, size, config.alpha, config.tau_per_m);
    const Candidate* cand = candidate_for(only.vehicle_index, only.model_index);
    const double cand_loss =
        cand != nullptr
            ? joint_loss(parts, 0, cand->params, size, config.alpha, config.tau_per_m)
            : kInf;
    result.params = matched_loss <= cand_loss ? only.params : cand->params;
    result.stage1_loss = cand != nullptr ? cand_loss : matched_loss;
    result.stage2_loss = std::min(matched_loss, cand_loss);
    result.final_loss =
        joint_loss(parts, 0, result.params, size, config.alpha, config.tau_per_m,
                   &result.degenerate_pairs);
    return result;
  }

  // Vehicles skipped in stages 1-2 still contribute pairwise information
  // when they carry at least 2 keypoints.
  std::vector<const VehicleAnnotation*> extra;
  for (const int v : candidates.skipped_vehicles) {
    const VehicleAnnotation& a = annotation_by_index(v);
    if (a.keypoints_px.size() >= 2) extra.push_back(&a);
  }

  // Participants for one anchor run, ordered by vehicle index: matched
  // vehicles with their matched models, then skipped vehicles with the model
  // that fits them best at the anchor's warm-start pose.
  auto build_participants = [&](const VehicleFit& anchor, int* anchor_pos) {
    std::vector<Participant> parts;
    for (const auto& fit : stage2) {
      parts.push_back({&annotation_by_index(fit.vehicle_index),
                       &models[static_cast<std::size_t>(fit.model_index)],
                       fit.vehicle_index});
    }
    for (const VehicleAnnotation* a : extra) {
      int best_model = -1;
      double best_lp = kInf;
      for (std::size_t j = 0; j < models.size(); ++j) {
        std::vector<Point3> back, model_pts;
        if (!back_project_aligned(*a, models[j], anchor.params, size, &back, &model_pts)) {
          continue;
        }
        const double lp = pair_loss(back, model_pts, config.alpha, nullptr);
        if (lp < best_lp) {
          best_lp = lp;
          best_model = static_cast<int>(j);
        }
      }
      if (best_model >= 0) {
        parts.push_back({a, &models[static_cast<std::size_t>(best_model)], a->vehicle_index});
      }
    }
    std::sort(parts.begin(), parts.end(),
              [](const Participant& x, const Participant& y) {
                return x.vehicle_index < y.vehicle_index;
              });
    *anchor_pos = -1;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].vehicle_index == anchor.vehicle_index) *anchor_pos = static_cast<int>(i);
    }
    return parts;
  };

  // The per-vehicle focals of stage 2 scatter widely (one car constrains f
  // poorly) but their median is a solid consensus; re-posing an anchor at
  // that focal seeds a second basin for the optimizer.
  double consensus_f = 0.0;
  {
    std::vector<double> fs;
    fs.reserve(stage2.size());
    for (const auto& fit : stage2) fs.push_back(fit.params.focal_px);
    std::sort(fs.begin(), fs.end());
    consensus_f = fs[fs.size() / 2];
  }

  bool have_best = false;
  double best_final = kInf;
  const VehicleFit* best_anchor = nullptr;
  CameraParams best_params;
  double best_stage1 = kInf, best_stage2 = kInf;

  for (const auto& anchor : stage2) {
    int anchor_pos = -1;
    const std::vector<Participant> parts = build_participants(anchor, &anchor_pos);

    auto objective = [&](const Eigen::VectorXd& x) {
      return joint_loss(parts, anchor_pos, CameraParams::from_vector7(x), size,
                        config.alpha, config.tau_per_m);
    };
    const double matched_loss = objective(anchor.params.to_vector7());
    const Candidate* cand = candidate_for(anchor.vehicle_index, anchor.model_index);
    const double cand_loss =
        cand != nullptr ? objective(cand->params.to_vector7()) : kInf;

    // Monotone acceptance: the matched pose seeds this anchor's run only
    // when it does not worsen the joint loss; otherwise the stage-1
    // candidate stands in. Keeps the per-stage loss chain nonincreasing.
    const bool use_matched = matched_loss <= cand_loss;
    const double stage1_loss = cand != nullptr ? cand_loss : matched_loss;
    const double stage2_loss = use_matched ? matched_loss : cand_loss;
    if (!std::isfinite(stage2_loss)) continue;  // warm start cannot be scored
    std::vector<Eigen::Matrix<double, 7, 1>> starts{
        use_matched ? anchor.params.to_vector7() : cand->params.to_vector7()};

    // Restart at the consensus focal, splitting the same evaluation budget.
    try {
      std::vector<Point2> pixels;
      std::vector<Point3> points;
      aligned_correspondences(annotation_by_index(anchor.vehicle_index),
                              models[static_cast<std::size_t>(anchor.model_index)], &pixels,
                              &points);
      const PnpResult refocus = solve_pnp(points, pixels, consensus_f, size);
      CameraParams rp;
      rp.focal_px = consensus_f;
      rp.rotation = refocus.rotation;
      rp.translation_m = refocus.translation_m;
      if (std::isfinite(objective(rp.to_vector7()))) starts.push_back(rp.to_vector7());
    } catch (const Error&) {
      // anchor not re-posable at the consensus focal; single start
    }

    double anchor_final = kInf;
    Eigen::VectorXd anchor_x;
    const int per_start =
        config.fine_tune_evaluations / static_cast<int>(starts.size());
    for (std::size_t s = 0; s < starts.size(); ++s) {
      CmaConfig cma;
      cma.max_evaluations = per_start;
      cma.sigma0 = pose_sigma0(starts[s]);
      cma.seed = mix_seed(config.seed, 0x7001 + 2 * static_cast<std::uint64_t>(
                                                    anchor.vehicle_index) + s);
      const CmaResult r = cmaes_minimize(objective, starts[s], cma, focal_bounds());
      if (r.f < anchor_final) {
        anchor_final = r.f;
        anchor_x = r.x;
      }
    }

    if (!have_best || anchor_final < best_final) {
      have_best = true;
      best_final = anchor_final;
      best_anchor = &anchor;
      best_params = CameraParams::from_vector7(anchor_x);
      best_stage1 = stage1_loss;
      best_stage2 = stage2_loss;
    }
  }
  if (!have_best) {
    throw NumericError("no anchor produced a finite joint loss to fine-tune from");
  }

  result.params = best_params;
  result.anchor_index = best_anchor->vehicle_index;
  result.stage1_loss = best_stage1;
  result.stage2_loss = best_stage2;
  result.final_loss = best_final;

  // Re-evaluate once at the returned params to count skipped pairs.
  int anchor_pos = -1;
  const std::vector<Participant> parts = build_participants(*best_anchor, &anchor_pos);
  joint_loss(parts, anchor_pos, best_params, size, config.alpha, config.tau_per_m,
             &result.degenerate_pairs);
  return result;
}

CalibResult calibrate(const std::vector<VehicleAnnotation>& annotations,
                      const std::vector<VehicleModel>& models, const ImageSize& size,
                      const MvcalibConfig& config) {
  const CandidateSet cands = candidate_generation(annotations, models, config.f_default_px,
                                                  size, config.ransac, config.seed);
  const std::vector<VehicleFit> fits =
      model_matching(cands, annotations, models, size, config);
  return fine_tune(cands, fits, annotations, models, size, config);
}

CameraParams best_candidate_params(const CandidateSet& candidates) {
  if (candidates.candidates.empty()) {
    throw InputError("candidate set is empty");
  }
  const Candidate* best = &candidates.candidates.front();
  for (const auto& c : candidates.candidates) {
    if (c.reprojection_error_px < best->reprojection_error_px) best = &c;
  }
  return best->params;
}

}  // namespace camdense
