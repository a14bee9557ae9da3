#ifndef CAMDENSE_PNP_HPP
#define CAMDENSE_PNP_HPP

#include <cstdint>
#include <vector>

#include "camdense/geometry.hpp"

namespace camdense {

/// Pose from 3D-2D correspondences with known focal length, using control
/// points and a closed-form null-space expansion. Falls back to a planar
/// variant (three control points) when the reference points are close to
/// coplanar.

struct PnpResult {
  Rotation rotation;
  Eigen::Vector3d translation_m;
  double mean_reprojection_error_px = 0.0;
};

/// Solves for the camera pose given world points, their pixel observations,
/// the focal length, and the frame size. Requires at least 4 points (throws
/// TooFewPoints) and distinct, non-degenerate geometry (throws
/// DegenerateConfiguration when the points collapse to a point or a line).
PnpResult solve_pnp(const std::vector<Point3>& world, const std::vector<Point2>& pixels,
                    double focal_px, const ImageSize& size, bool refine = true);

struct RansacConfig {
  double threshold_px = 8.0;
  int max_iterations = 1000;
  double confidence = 0.99;
  int min_sample = 4;
  std::uint64_t seed = 0;
};

struct RansacPnpResult {
  Rotation rotation;
  Eigen::Vector3d translation_m;
  std::vector<bool> inlier_mask;   // one flag per input correspondence
  std::vector<int> inliers;        // sorted indices into the input
  double mean_inlier_error_px = 0.0;
  int iterations_run = 0;
};

/// Robust pose fit: samples minimal subsets, scores by reprojection error,
/// and refits on the best consensus set. Throws NoConsensus when no sample
/// yields at least min_sample inliers.
RansacPnpResult solve_pnp_ransac(const std::vector<Point3>& world,
                                 const std::vector<Point2>& pixels, double focal_px,
                                 const ImageSize& size, const RansacConfig& config = {});

}  // namespace camdense

#endif  // CAMDENSE_PNP_HPP
