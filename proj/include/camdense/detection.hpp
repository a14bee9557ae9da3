#ifndef CAMDENSE_DETECTION_HPP
#define CAMDENSE_DETECTION_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "camdense/lanes.hpp"

namespace camdense {

struct BoundingBox {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  double confidence = 1.0;
};

/// Throws InputError unless x_min < x_max, y_min < y_max, confidence in [0,1].
void validate_box(const BoundingBox& box);

struct DetectionFrame {
  double ts_utc_s = 0.0;
  std::string camera_id;
  std::vector<BoundingBox> boxes;
};

/// Intersection area over union area; symmetric; 1 iff identical boxes,
/// 0 iff disjoint.
double iou(const BoundingBox& a, const BoundingBox& b);

struct MatchResult {
  int tp = 0, fp = 0, fn = 0;
  std::vector<std::pair<int, int>> matches;  // (pred index, truth index)
};

/// Greedy matching in descending confidence (ties: input order). A
/// prediction is a true positive when its best unmatched truth reaches the
/// IoU threshold; each truth matches at most once.
MatchResult match_detections(const std::vector<BoundingBox>& preds,
                             const std::vector<BoundingBox>& truths, double iou_threshold);

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
};

/// Conventions: precision 1 when there are no predictions, recall 1 when
/// there are no truths.
PrecisionRecall precision_recall(int tp, int fp, int fn);

/// Predictions and ground truth for one image.
struct EvalFrame {
  std::vector<BoundingBox> preds;
  std::vector<BoundingBox> truths;
};

/// Area under the interpolated precision-recall curve, predictions pooled
/// over frames and ranked by confidence; matching is per frame.
double average_precision(const std::vector<EvalFrame>& frames, double iou_threshold);
double average_precision(const std::vector<BoundingBox>& preds,
                         const std::vector<BoundingBox>& truths, double iou_threshold);

/// Mean of average_precision over IoU thresholds 0.50, 0.55, ..., 0.95.
double mean_average_precision(const std::vector<EvalFrame>& frames);

/// Throws InputError for malformed polygons or nonpositive lengths,
/// OverlappingLanes when two lane interiors overlap (shared edges allowed).
void validate_lanes(const std::vector<LaneGeometry>& lanes);

/// Lane whose polygon contains the box center, boundary inclusive; ties on
/// shared edges go to the lower lane_id. none when outside all lanes.
std::optional<int> assign_lane(const BoundingBox& box, const std::vector<LaneGeometry>& lanes);

/// Boxes with confidence >= confidence_min grouped by assigned lane;
/// out-of-lane boxes are dropped. Every lane id appears in the result.
std::map<int, int> count_per_lane(const DetectionFrame& frame,
                                  const std::vector<LaneGeometry>& lanes,
                                  double confidence_min);

}  // namespace camdense

#endif  // CAMDENSE_DETECTION_HPP
