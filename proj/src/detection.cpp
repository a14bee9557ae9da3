#include "camdense/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "camdense/errors.hpp"

namespace camdense {
namespace {

double box_area(const BoundingBox& b) { return (b.x_max - b.x_min) * (b.y_max - b.y_min); }

// Indices of predictions in global processing order: confidence descending,
// then frame, then input position.
struct RankedPred {
  double confidence;
  int frame;
  int index;
};

std::vector<RankedPred> rank_predictions(const std::vector<EvalFrame>& frames) {
  std::vector<RankedPred> ranked;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t i = 0; i < frames[f].preds.size(); ++i) {
      ranked.push_back({frames[f].preds[i].confidence, static_cast<int>(f), static_cast<int>(i)});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedPred& a, const RankedPred& b) {
    return a.confidence > b.confidence;
  });
  return ranked;
}

// Best unmatched truth for one prediction: highest IoU >= threshold, ties to
// the lowest truth index.
int best_truth(const BoundingBox& pred, const std::vector<BoundingBox>& truths,
               const std::vector<bool>& used, double iou_threshold) {
  int best = -1;
  double best_iou = 0.0;
  for (std::size_t t = 0; t < truths.size(); ++t) {
    if (used[t]) continue;
    const double v = iou(pred, truths[t]);
    if (v >= iou_threshold && v > best_iou) {
      best_iou = v;
      best = static_cast<int>(t);
    }
  }
  return best;
}

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

bool segments_cross_properly(const Point2& a, const Point2& b, const Point2& c,
                             const Point2& d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  return o1 * o2 < 0.0 && o3 * o4 < 0.0;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

bool on_polygon_boundary(const Point2& p, const std::vector<Point2>& poly, double tol) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    if (point_segment_distance(p, a, b) <= tol) return true;
  }
  return false;
}

// Even-odd crossing test; boundary handled separately by callers.
bool point_in_polygon_interior(const Point2& p, const std::vector<Point2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const double xi = poly[i].x(), yi = poly[i].y();
    const double xj = poly[j].x(), yj = poly[j].y();
    if ((yi > p.y()) != (yj > p.y()) &&
        p.x() < (xj - xi) * (p.y() - yi) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

bool point_in_polygon_inclusive(const Point2& p, const std::vector<Point2>& poly) {
  return on_polygon_boundary(p, poly, 1e-9) || point_in_polygon_interior(p, poly);
}

bool polygon_simple(const std::vector<Point2>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[i] - poly[(i + 1) % n]).norm() <= 0.0) return false;  // repeated vertex
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip adjacent edges (shared endpoint)
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_cross_properly(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

// Interiors overlap when edges cross properly or a vertex of one polygon
// sits strictly inside the other. Touching boundaries do not count.
bool polygons_overlap(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (segments_cross_properly(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()])) {
        return true;
      }
    }
  }
  for (const auto& p : a) {
    if (!on_polygon_boundary(p, b, 1e-9) && point_in_polygon_interior(p, b)) return true;
  }
  for (const auto& p : b) {
    if (!on_polygon_boundary(p, a, 1e-9) && point_in_polygon_interior(p, a)) return true;
  }
  return false;
}

}  // namespace

void validate_box(const BoundingBox& box) {
  if (!(box.x_min < box.x_max) || !(box.y_min < box.y_max)) {
    throw InputError("bounding box has empty extent");
  }
  if (!(box.confidence >= 0.0 && box.confidence <= 1.0)) {
    throw InputError("bounding box confidence outside [0,1]");
  }
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = box_area(a) + box_area(b) - inter;
  return inter / uni;
}

MatchResult match_detections(const std::vector<BoundingBox>& preds,
                             const std::vector<BoundingBox>& truths, double iou_threshold) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].confidence >
           preds[static_cast<std::size_t>(b)].confidence;
  });

  MatchResult result;
  std::vector<bool> used(truths.size(), false);
  for (const int p : order) {
    const int t = best_truth(preds[static_cast<std::size_t>(p)], truths, used, iou_threshold);
    if (t >= 0) {
      used[static_cast<std::size_t>(t)] = true;
      ++result.tp;
      result.matches.emplace_back(p, t);
    } else {
      ++result.fp;
    }
  }
  result.fn = static_cast<int>(truths.size()) - result.tp;
  std::sort(result.matches.begin(), result.matches.end());
  return result;
}

PrecisionRecall precision_recall(int tp, int fp, int fn) {
  PrecisionRecall pr;
  pr.precision = (tp + fp == 0) ? 1.0 : static_cast<double>(tp) / (tp + fp);
  pr.recall = (tp + fn == 0) ? 1.0 : static_cast<double>(tp) / (tp + fn);
  return pr;
}

double average_precision(const std::vector<EvalFrame>& frames, double iou_threshold) {
  std::size_t total_truths = 0;
  for (const auto& f : frames) total_truths += f.truths.size();
  const std::vector<RankedPred> ranked = rank_predictions(frames);
  if (total_truths == 0) return ranked.empty() ? 1.0 : 0.0;

  std::vector<std::vector<bool>> used(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) used[f].assign(frames[f].truths.size(), false);

  // PR points at each distinct confidence cutoff.
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  int tp = 0, fp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& rp = ranked[r];
    const auto& frame = frames[static_cast<std::size_t>(rp.frame)];
    const int t = best_truth(frame.preds[static_cast<std::size_t>(rp.index)], frame.truths,
                             used[static_cast<std::size_t>(rp.frame)], iou_threshold);
    if (t >= 0) {
      used[static_cast<std::size_t>(rp.frame)][static_cast<std::size_t>(t)] = true;
      ++tp;
    } else {
      ++fp;
    }
    const bool boundary =
        r + 1 == ranked.size() || ranked[r + 1].confidence < rp.confidence;
    if (boundary) {
      points.emplace_back(static_cast<double>(tp) / static_cast<double>(total_truths),
                          static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
  }

  // Integrate under the running-max precision envelope, right to left.
  double ap = 0.0;
  double env = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    env = std::max(env, points[i].second);
    const double r_prev = (i == 0) ? 0.0 : points[i - 1].first;
    ap += (points[i].first - r_prev) * env;
  }
  return ap;
}

double average_precision(const std::vector<BoundingBox>& preds,
                         const std::vector<BoundingBox>& truths, double iou_threshold) {
  return average_precision(std::vector<EvalFrame>{{preds, truths}}, iou_threshold);
}

double mean_average_precision(const std::vector<EvalFrame>& frames) {
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i <= 9; ++i) {
    sum += average_precision(frames, 0.5 + 0.05 * i);
    ++n;
  }
  return sum / n;
}

void validate_lanes(const std::vector<LaneGeometry>& lanes) {
  std::set<int> seen;
  for (const auto& lane : lanes) {
    if (!seen.insert(lane.lane_id).second) {
      throw InputError("duplicate lane_id " + std::to_string(lane.lane_id));
    }
    if (!polygon_simple(lane.polygon_px)) {
      throw InputError("lane " + std::to_string(lane.lane_id) +
                       " polygon is degenerate or self-intersecting");
    }
    if (!(lane.length_m > 0.0)) {
      throw ZeroLaneLength("lane " + std::to_string(lane.lane_id) +
                           " has nonpositive length");
    }
  }
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    for (std::size_t j = i + 1; j < lanes.size(); ++j) {
      if (polygons_overlap(lanes[i].polygon_px, lanes[j].polygon_px)) {
        throw OverlappingLanes("lanes " + std::to_string(lanes[i].lane_id) + " and " +
                               std::to_string(lanes[j].lane_id) + " overlap");
      }
    }
  }
}

std::optional<int> assign_lane(const BoundingBox& box, const std::vector<LaneGeometry>& lanes) {
  const Point2 center((box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0);
  std::vector<const LaneGeometry*> ordered;
  ordered.reserve(lanes.size());
  for (const auto& lane : lanes) ordered.push_back(&lane);
  std::sort(ordered.begin(), ordered.end(),
            [](const LaneGeometry* a, const LaneGeometry* b) { return a->lane_id < b->lane_id; });
  for (const LaneGeometry* lane : ordered) {
    if (point_in_polygon_inclusive(center, lane->polygon_px)) return lane->lane_id;
  }
  return std::nullopt;
}

std::map<int, int> count_per_lane(const DetectionFrame& frame,
                                  const std::vector<LaneGeometry>& lanes,
                                  double confidence_min) {
  std::map<int, int> counts;
  for (const auto& lane : lanes) counts[lane.lane_id] = 0;
  for (const auto& box : frame.boxes) {
    if (box.confidence < confidence_min) continue;
    const auto lane = assign_lane(box, lanes);
    if (lane.has_value()) ++counts[*lane];
  }
  return counts;
}

}  // namespace camdense
