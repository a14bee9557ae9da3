#ifndef CAMDENSE_MVCALIB_HPP
#define CAMDENSE_MVCALIB_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "camdense/geometry.hpp"
#include "camdense/pnp.hpp"
#include "camdense/vehicle.hpp"

namespace camdense {

/// Multi-vehicle calibration: robust per-vehicle pose candidates at a fixed
/// default focal, per-vehicle model matching with the focal freed, then a
/// joint fine-tune that scores one camera hypothesis against every vehicle's
/// back-projected geometry, anchored in turn at each vehicle's frame.

struct MvcalibConfig {
  double f_default_px = 350.0;        // fixed focal for candidate generation
  double alpha = 6.0;                 // weight of the angle term in pair losses
  // Anchor-distance weighting exponent. Scenes span tens of meters, so the
  // decay must stay shallow: at -0.03/m a vehicle 30 m from the anchor still
  // carries weight e^-0.9, keeping the joint objective truly multi-vehicle.
  // Steeper decay collapses the fit onto the anchor's neighbourhood and the
  // focal length drifts.
  double tau_per_m = -0.03;
  int matching_evaluations = 4000;    // optimizer budget per (vehicle, model)
  int fine_tune_evaluations = 20000;  // optimizer budget per anchor
  std::uint64_t seed = 0;
  RansacConfig ransac;
};

struct Candidate {
  int vehicle_index = 0;
  int model_index = 0;
  CameraParams params;                // focal pinned to f_default
  double reprojection_error_px = 0.0; // mean inlier reprojection error
};

struct CandidateSet {
  std::vector<Candidate> candidates;               // ordered by (vehicle, model)
  std::vector<int> skipped_vehicles;               // fewer than 4 keypoints
  std::vector<std::pair<int, int>> infeasible_pairs;  // robust fit found no consensus
};

struct VehicleFit {
  int vehicle_index = 0;
  int model_index = 0;
  CameraParams params;
  double projection_loss_px = 0.0;
};

struct CalibResult {
  CameraParams params;
  std::vector<VehicleFit> matched;
  std::vector<int> skipped_vehicles;
  int anchor_index = -1;     // vehicle_index of the winning anchor
  double stage1_loss = 0.0;  // joint loss at the anchor's candidate pose
  double stage2_loss = 0.0;  // joint loss at the anchor's accepted warm start
  double final_loss = 0.0;   // joint loss at the returned params
  int degenerate_pairs = 0;  // zero-length pairs skipped in the final evaluation
  bool single_vehicle_fallback = false;
  // final_loss <= stage2_loss <= stage1_loss for the winning anchor.
};

/// Stage 1: one robust pose per (vehicle, model) pair at the default focal.
/// Vehicles with fewer than 4 keypoints are skipped; pairs without consensus
/// are recorded as infeasible. Throws NoFeasibleVehicle when nothing is left.
CandidateSet candidate_generation(const std::vector<VehicleAnnotation>& annotations,
                                  const std::vector<VehicleModel>& models,
                                  double f_default_px, const ImageSize& size,
                                  const RansacConfig& ransac = {}, std::uint64_t seed = 0);

/// Sum over annotated keypoints of the pixel distance between the label and
/// the projected model point; +infinity when a point falls behind the camera
/// so minimizers keep a total order.
double projection_loss(const CameraParams& params, const VehicleAnnotation& annotation,
                       const VehicleModel& model, const ImageSize& size);

/// Stage 2: refine every candidate with the focal freed and keep, per
/// vehicle, the model with the lowest projection loss (ties: lowest model
/// index). The refined loss never exceeds the candidate's.
std::vector<VehicleFit> model_matching(const CandidateSet& candidates,
                                       const std::vector<VehicleAnnotation>& annotations,
                                       const std::vector<VehicleModel>& models,
                                       const ImageSize& size, const MvcalibConfig& config);

/// Back-projects each annotated keypoint onto the horizontal plane at that
/// keypoint's model height, in canonical keypoint order. The rays of the
/// underlying pixel-to-world map leave depth free; the vehicle models are
/// ground-anchored, so the keypoint's own height pins it.
std::vector<Point3> back_project_points(const VehicleAnnotation& annotation,
                                        const VehicleModel& model,
                                        const CameraParams& anchor_params,
                                        const ImageSize& size);

/// Pairwise loss of one vehicle: for every keypoint pair, the absolute
/// difference between back-projected and model distance, plus alpha times
/// the sine of the angle between the two vectors. Zero-length pairs are
/// skipped and counted.
double fine_tune_loss(const VehicleAnnotation& annotation, const VehicleModel& model,
                      const CameraParams& anchor_params, const ImageSize& size,
                      double alpha, int* pairs_skipped = nullptr);

/// exp(tau * distance to the anchor centroid), normalized to sum 1.
std::vector<double> anchor_weights(const std::vector<Point3>& centroids, int anchor_pos,
                                   double tau);

/// Stage 3: for each anchor, minimize the weighted sum of per-vehicle
/// pairwise losses over (focal, rotation, translation), warm-started from
/// the anchor's matched pose, or from its stage-1 candidate when that pose
/// scores a lower joint loss (so the per-stage loss chain never increases);
/// return the best anchor's run. Vehicles with 2-3 keypoints join the loss
/// with the model that fits them best at the anchor's matched pose. Falls
/// back to the best single-vehicle fit when only one vehicle is usable.
CalibResult fine_tune(const CandidateSet& candidates, const std::vector<VehicleFit>& stage2,
                      const std::vector<VehicleAnnotation>& annotations,
                      const std::vector<VehicleModel>& models, const ImageSize& size,
                      const MvcalibConfig& config);

/// Full pipeline: candidate_generation, model_matching, fine_tune.
CalibResult calibrate(const std::vector<VehicleAnnotation>& annotations,
                      const std::vector<VehicleModel>& models, const ImageSize& size,
                      const MvcalibConfig& config);

/// Candidate-stage-only pose: the candidate with the lowest reprojection
/// error (ties: first in (vehicle, model) order). The single-stage baseline
/// for ablation runs.
CameraParams best_candidate_params(const CandidateSet& candidates);

}  // namespace camdense

#endif  // CAMDENSE_MVCALIB_HPP
