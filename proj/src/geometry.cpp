#include "camdense/geometry.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace camdense {

namespace {

constexpr double kOrthonormalTol = 1e-9;

Eigen::Matrix3d skew(const Eigen::Vector3d& d) {
  Eigen::Matrix3d s;
  s << 0, -d.z(), d.y(), d.z(), 0, -d.x(), -d.y(), d.x(), 0;
  return s;
}

}  // namespace

Eigen::Matrix3d intrinsic_matrix(double focal_px, const ImageSize& size) {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = focal_px;
  k(1, 1) = focal_px;
  k(0, 2) = size.width / 2.0;
  k(1, 2) = size.height / 2.0;
  return k;
}

Eigen::Matrix3d axis_angle_to_matrix(const Eigen::Vector3d& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta == 0.0) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d d = axis_angle / theta;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return c * Eigen::Matrix3d::Identity() + (1.0 - c) * d * d.transpose() + s * skew(d);
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& r) {
  const double cos_theta = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-14) return Eigen::Vector3d::Zero();

  // Antisymmetric part carries sin(theta) * d.
  Eigen::Vector3d skew_axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double sin_theta = std::sin(theta);
  if (sin_theta > 1e-4) {
    return (theta / (2.0 * sin_theta)) * skew_axis;
  }

  // Near theta = pi the antisymmetric part vanishes; recover the axis from
  // the symmetric part, R + I = (1 + cos) I + (1 - cos) d d^T + sin [d]_x,
  // whose dominant column is parallel to d.
  const Eigen::Matrix3d m = r + Eigen::Matrix3d::Identity();
  int best = 0;
  m.colwise().norm().maxCoeff(&best);
  Eigen::Vector3d d = m.col(best);
  if (d.norm() < 1e-12) throw NotARotation("cannot extract rotation axis");
  d.normalize();
  // Fix the sign from whatever antisymmetric signal is left; at exactly pi
  // both signs are valid.
  if (skew_axis.norm() > 1e-12 && d.dot(skew_axis) < 0.0) d = -d;
  return theta * d;
}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis_angle) {
  return Rotation(axis_angle_to_matrix(axis_angle), axis_angle);
}

Rotation Rotation::from_matrix(const Eigen::Matrix3d& matrix) {
  const double ortho_err = (matrix.transpose() * matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > kOrthonormalTol || std::abs(matrix.determinant() - 1.0) > kOrthonormalTol) {
    throw NotARotation();
  }
  return Rotation(matrix, matrix_to_axis_angle(matrix));
}

Eigen::Matrix<double, 7, 1> CameraParams::to_vector7() const {
  Eigen::Matrix<double, 7, 1> v;
  v(0) = focal_px;
  v.segment<3>(1) = rotation.axis_angle();
  v.segment<3>(4) = translation_m;
  return v;
}

CameraParams CameraParams::from_vector7(const Eigen::Matrix<double, 7, 1>& v) {
  CameraParams p;
  p.focal_px = v(0);
  p.rotation = Rotation::from_axis_angle(v.segment<3>(1));
  p.translation_m = v.segment<3>(4);
  return p;
}

double projection_depth(const Point3& point, const CameraParams& params) {
  return params.rotation.matrix().row(2).dot(point) + params.translation_m.z();
}

Point2 project(const Point3& point, const CameraParams& params, const ImageSize& size) {
  const double s = projection_depth(point, params);
  if (s <= 0.0) throw PointBehindCamera();
  const Eigen::Vector3d cam = params.rotation.matrix() * point + params.translation_m;
  const Eigen::Vector3d homo = intrinsic_matrix(params.focal_px, size) * cam;
  return Point2(homo.x() / s, homo.y() / s);
}

Ray back_project_ray(const Point2& pixel, const CameraParams& params, const ImageSize& size) {
  const double u_n = (pixel.x() - size.width / 2.0) / params.focal_px;
  const double v_n = (pixel.y() - size.height / 2.0) / params.focal_px;
  const Eigen::Matrix3d r_t = params.rotation.matrix().transpose();
  Ray ray;
  ray.origin = -r_t * params.translation_m;  // camera center in world coordinates
  ray.direction = (r_t * Eigen::Vector3d(u_n, v_n, 1.0)).normalized();
  return ray;
}

double intersect_plane_t(const Ray& ray, double plane_z) {
  if (std::abs(ray.direction.z()) < 1e-12) throw RayParallelToPlane();
  return (plane_z - ray.origin.z()) / ray.direction.z();
}

Point3 intersect_plane(const Ray& ray, double plane_z) {
  const double t = intersect_plane_t(ray, plane_z);
  Point3 p = ray.origin + t * ray.direction;
  p.z() = plane_z;
  return p;
}

}  // namespace camdense
