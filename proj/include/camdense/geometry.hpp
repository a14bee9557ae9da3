#ifndef CAMDENSE_GEOMETRY_HPP
#define CAMDENSE_GEOMETRY_HPP

#include <Eigen/Core>

#include "camdense/errors.hpp"

namespace camdense {

/// Image pixel coordinates, origin at the top-left corner, u rightward,
/// v downward.
using Point2 = Eigen::Vector2d;
/// World coordinates in meters.
using Point3 = Eigen::Vector3d;

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Intrinsic matrix with the principal point fixed at the image center:
///   K = [ f 0 w/2 ; 0 f h/2 ; 0 0 1 ]
Eigen::Matrix3d intrinsic_matrix(double focal_px, const ImageSize& size);

/// A rotation stored both as a 3x3 matrix and as the axis-angle vector
/// theta*d (radians times unit axis). The two encodings always describe the
/// same rotation; constructors keep them in sync.
class Rotation {
 public:
  Rotation() : matrix_(Eigen::Matrix3d::Identity()), axis_angle_(Eigen::Vector3d::Zero()) {}

  /// Builds from an axis-angle vector via the Rodrigues formula
  ///   R = cos(theta) I + (1 - cos(theta)) d d^T + sin(theta) [d]_x
  /// A zero vector yields the identity.
  static Rotation from_axis_angle(const Eigen::Vector3d& axis_angle);

  /// Builds from a matrix; recovers theta = arccos((tr R - 1)/2) and the
  /// axis from R d = d. Throws NotARotation if the matrix is not orthonormal
  /// with determinant 1 (tolerance 1e-9). At theta = pi either axis sign is
  /// returned; both reproduce the matrix.
  static Rotation from_matrix(const Eigen::Matrix3d& matrix);

  const Eigen::Matrix3d& matrix() const { return matrix_; }
  const Eigen::Vector3d& axis_angle() const { return axis_angle_; }
  double angle() const { return axis_angle_.norm(); }

 private:
  Rotation(const Eigen::Matrix3d& m, const Eigen::Vector3d& aa) : matrix_(m), axis_angle_(aa) {}

  Eigen::Matrix3d matrix_;
  Eigen::Vector3d axis_angle_;
};

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& axis_angle);
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& matrix);

/// Camera pose and focal length: the unknowns of calibration. The reduced
/// parameter vector (f, theta*d, T) lives in R^7.
struct CameraParams {
  double focal_px = 0.0;
  Rotation rotation;
  Eigen::Vector3d translation_m = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 7, 1> to_vector7() const;
  static CameraParams from_vector7(const Eigen::Matrix<double, 7, 1>& v);
};

/// World ray: points origin + t * direction, t >= 0. direction is unit
/// length and oriented so that increasing t moves away from the camera in
/// front of it.
struct Ray {
  Point3 origin;
  Eigen::Vector3d direction;
};

/// Projects a world point through s [u v 1]^T = K [R|T] [P 1]^T and divides
/// by the scale factor s = R|_3 . P + T|_3.
/// Throws PointBehindCamera when s <= 0.
Point2 project(const Point3& point, const CameraParams& params, const ImageSize& size);

/// Depth of a world point along the optical axis (the scale factor s).
double projection_depth(const Point3& point, const CameraParams& params);

/// Back-projects a pixel to the set of world points mapping onto it. With
/// u~ = (u - w/2)/f and v~ = (v - h/2)/f, every returned point satisfies
///   (u~ [R|T]|_3 - [R|T]|_1) . [P 1]^T = 0
///   (v~ [R|T]|_3 - [R|T]|_2) . [P 1]^T = 0
/// i.e. the full solution set is the ray through the camera center with
/// camera-frame direction (u~, v~, 1).
Ray back_project_ray(const Point2& pixel, const CameraParams& params, const ImageSize& size);

/// Intersects a ray with the horizontal plane Z = plane_z. The returned
/// point has its third coordinate set to plane_z exactly. Throws
/// RayParallelToPlane when |direction.z| < 1e-12.
Point3 intersect_plane(const Ray& ray, double plane_z);

/// Signed ray parameter t of the plane intersection; negative t means the
/// plane crosses the ray behind the camera.
double intersect_plane_t(const Ray& ray, double plane_z);

}  // namespace camdense

#endif  // CAMDENSE_GEOMETRY_HPP
