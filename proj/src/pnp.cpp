#include "camdense/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "camdense/errors.hpp"
#include "camdense/rng.hpp"

namespace camdense {
namespace {

constexpr double kBigError = 1e30;

struct Correspondences {
  const std::vector<Point3>& world;
  const std::vector<Point2>& pixels;
  double f;
  double cx;
  double cy;
};

// Control-point layout plus the data shared by all beta cases.
struct EpnpSetup {
  int num_ctrl = 4;
  std::vector<Point3> ctrl_world;
  Eigen::MatrixXd alphas;   // n x num_ctrl barycentric weights
  Eigen::MatrixXd kernel;   // 3*num_ctrl x K null-space basis, smallest first
  std::vector<std::pair<int, int>> pairs;
  Eigen::VectorXd rho;      // squared control-point distances, one per pair
};

std::vector<std::pair<int, int>> make_pairs(int m) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) out.emplace_back(i, j);
  }
  return out;
}

double point_error_px(const Correspondences& c, const Eigen::Matrix3d& r,
                      const Eigen::Vector3d& t, std::size_t i) {
  const Eigen::Vector3d pc = r * c.world[i] + t;
  if (pc.z() <= 1e-12) return kBigError;
  const Point2 proj(c.f * pc.x() / pc.z() + c.cx, c.f * pc.y() / pc.z() + c.cy);
  return (proj - c.pixels[i]).norm();
}

double mean_error_px(const Correspondences& c, const Eigen::Matrix3d& r,
                     const Eigen::Vector3d& t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < c.world.size(); ++i) {
    const double e = point_error_px(c, r, t, i);
    if (e >= kBigError) return kBigError;
    sum += e;
  }
  return sum / static_cast<double>(c.world.size());
}

// Rigid alignment pc ~ R*pw + t by cross-covariance SVD.
void absolute_orientation(const std::vector<Point3>& pw, const std::vector<Point3>& pc,
                          Eigen::Matrix3d* r, Eigen::Vector3d* t) {
  Point3 wbar = Point3::Zero(), cbar = Point3::Zero();
  for (std::size_t i = 0; i < pw.size(); ++i) {
    wbar += pw[i];
    cbar += pc[i];
  }
  wbar /= static_cast<double>(pw.size());
  cbar /= static_cast<double>(pc.size());

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < pw.size(); ++i) {
    h += (pw[i] - wbar) * (pc[i] - cbar).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d rot = v * u.transpose();
  if (rot.determinant() < 0.0) {
    v.col(2) = -v.col(2);
    rot = v * u.transpose();
  }
  *r = rot;
  *t = cbar - rot * wbar;
}

// L-matrix row for one control pair over the chosen beta parameterization.
Eigen::Vector3d kernel_diff(const EpnpSetup& s, int col, int i, int j) {
  return s.kernel.col(col).segment<3>(3 * i) - s.kernel.col(col).segment<3>(3 * j);
}

// Single-vector scale: x = beta * v1 with beta matching control distances.
Eigen::VectorXd betas_scale_only(const EpnpSetup& s) {
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < s.pairs.size(); ++p) {
    const Eigen::Vector3d dv = kernel_diff(s, 0, s.pairs[p].first, s.pairs[p].second);
    num += dv.norm() * std::sqrt(s.rho(static_cast<Eigen::Index>(p)));
    den += dv.squaredNorm();
  }
  Eigen::VectorXd betas = Eigen::VectorXd::Zero(s.kernel.cols());
  if (den > 0.0) betas(0) = num / den;
  return betas;
}

// Unknowns [b11 b12 b22]; recover beta1, beta2 with a consistent sign.
Eigen::VectorXd betas_two_vectors(const EpnpSetup& s) {
  const int np = static_cast<int>(s.pairs.size());
  Eigen::MatrixXd l(np, 3);
  for (int p = 0; p < np; ++p) {
    const Eigen::Vector3d d1 = kernel_diff(s, 0, s.pairs[p].first, s.pairs[p].second);
    const Eigen::Vector3d d2 = kernel_diff(s, 1, s.pairs[p].first, s.pairs[p].second);
    l(p, 0) = d1.squaredNorm();
    l(p, 1) = 2.0 * d1.dot(d2);
    l(p, 2) = d2.squaredNorm();
  }
  const Eigen::Vector3d b = l.colPivHouseholderQr().solve(s.rho);
  Eigen::VectorXd betas = Eigen::VectorXd::Zero(s.kernel.cols());
  if (b(0) < 0.0) {
    betas(0) = std::sqrt(-b(0));
    betas(1) = (b(2) < 0.0) ? std::sqrt(-b(2)) : 0.0;
  } else {
    betas(0) = std::sqrt(b(0));
    betas(1) = (b(2) > 0.0) ? std::sqrt(b(2)) : 0.0;
  }
  if (b(1) < 0.0) betas(0) = -betas(0);
  return betas;
}

// Unknowns [b11 b12 b22 b13 b23]; requires at least three kernel vectors.
Eigen::VectorXd betas_three_vectors(const EpnpSetup& s) {
  const int np = static_cast<int>(s.pairs.size());
  Eigen::MatrixXd l(np, 5);
  for (int p = 0; p < np; ++p) {
    const Eigen::Vector3d d1 = kernel_diff(s, 0, s.pairs[p].first, s.pairs[p].second);
    const Eigen::Vector3d d2 = kernel_diff(s, 1, s.pairs[p].first, s.pairs[p].second);
    const Eigen::Vector3d d3 = kernel_diff(s, 2, s.pairs[p].first, s.pairs[p].second);
    l(p, 0) = d1.squaredNorm();
    l(p, 1) = 2.0 * d1.dot(d2);
    l(p, 2) = d2.squaredNorm();
    l(p, 3) = 2.0 * d1.dot(d3);
    l(p, 4) = 2.0 * d2.dot(d3);
  }
  const Eigen::VectorXd b = l.colPivHouseholderQr().solve(s.rho);
  Eigen::VectorXd betas = Eigen::VectorXd::Zero(s.kernel.cols());
  if (b(0) < 0.0) {
    betas(0) = std::sqrt(-b(0));
    betas(1) = (b(2) < 0.0) ? std::sqrt(-b(2)) : 0.0;
  } else {
    betas(0) = std::sqrt(b(0));
    betas(1) = (b(2) > 0.0) ? std::sqrt(b(2)) : 0.0;
  }
  if (b(1) < 0.0) betas(0) = -betas(0);
  if (std::abs(betas(0)) > 1e-12) betas(2) = b(3) / betas(0);
  return betas;
}

// Unknowns [b11 b12 b13 b14]; all four vectors tied to beta1.
Eigen::VectorXd betas_four_vectors(const EpnpSetup& s) {
  const int np = static_cast<int>(s.pairs.size());
  Eigen::MatrixXd l(np, 4);
  for (int p = 0; p < np; ++p) {
    const Eigen::Vector3d d1 = kernel_diff(s, 0, s.pairs[p].first, s.pairs[p].second);
    l(p, 0) = d1.squaredNorm();
    for (int k = 1; k < 4; ++k) {
      l(p, k) = 2.0 * d1.dot(kernel_diff(s, k, s.pairs[p].first, s.pairs[p].second));
    }
  }
  const Eigen::VectorXd b = l.colPivHouseholderQr().solve(s.rho);
  Eigen::VectorXd betas = Eigen::VectorXd::Zero(s.kernel.cols());
  const double sign = (b(0) < 0.0) ? -1.0 : 1.0;
  betas(0) = std::sqrt(std::abs(b(0)));
  if (betas(0) > 1e-12) {
    for (int k = 1; k < 4; ++k) betas(k) = sign * b(k) / betas(0);
  }
  return betas;
}

// Newton steps on the control-distance residuals over all betas.
void gauss_newton_refine(const EpnpSetup& s, Eigen::VectorXd* betas) {
  const int nk = static_cast<int>(s.kernel.cols());
  const int np = static_cast<int>(s.pairs.size());
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd x = s.kernel * (*betas);
    Eigen::MatrixXd jac(np, nk);
    Eigen::VectorXd res(np);
    for (int p = 0; p < np; ++p) {
      const int i = s.pairs[p].first, j = s.pairs[p].second;
      const Eigen::Vector3d d = x.segment<3>(3 * i) - x.segment<3>(3 * j);
      res(p) = d.squaredNorm() - s.rho(p);
      for (int k = 0; k < nk; ++k) {
        jac(p, k) = 2.0 * d.dot(kernel_diff(s, k, i, j));
      }
    }
    const Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(-res);
    if (!delta.allFinite()) return;
    *betas += delta;
  }
}

double pose_from_betas(const EpnpSetup& s, const Correspondences& c,
                       const Eigen::VectorXd& betas, Eigen::Matrix3d* r,
                       Eigen::Vector3d* t) {
  const Eigen::VectorXd x = s.kernel * betas;
  const std::size_t n = c.world.size();
  std::vector<Point3> pc(n, Point3::Zero());
  double zsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < s.num_ctrl; ++j) {
      pc[i] += s.alphas(static_cast<Eigen::Index>(i), j) * x.segment<3>(3 * j);
    }
    zsum += pc[i].z();
  }
  // The null space only determines the reconstruction up to sign; keep the
  // branch with points in front of the camera.
  if (zsum < 0.0) {
    for (auto& p : pc) p = -p;
  }
  absolute_orientation(c.world, pc, r, t);
  return mean_error_px(c, *r, *t);
}

int count_distinct(const std::vector<Point3>& pts) {
  int distinct = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i; ++j) {
      if (pts[i] == pts[j]) {
        seen = true;
        break;
      }
    }
    if (!seen) ++distinct;
  }
  return distinct;
}

}  // namespace

PnpResult solve_pnp(const std::vector<Point3>& world, const std::vector<Point2>& pixels,
                    double focal_px, const ImageSize& size, bool refine) {
  if (world.size() != pixels.size()) {
    throw LengthMismatch("solve_pnp: world and pixel lists differ in length");
  }
  const int n = static_cast<int>(world.size());
  if (n < 4) throw TooFewPoints("solve_pnp: need at least 4 correspondences");
  if (count_distinct(world) < 4) {
    throw DegenerateConfiguration("solve_pnp: fewer than 4 distinct points");
  }

  const Correspondences corr{world, pixels, focal_px, size.width / 2.0, size.height / 2.0};

  Point3 centroid = Point3::Zero();
  for (const auto& p : world) centroid += p;
  centroid /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : world) cov += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d lam = es.eigenvalues().cwiseMax(0.0);  // ascending
  const double s_max = std::sqrt(lam(2));
  if (s_max < 1e-12) throw DegenerateConfiguration("solve_pnp: points coincide");
  if (std::sqrt(lam(1)) / s_max < 1e-6) {
    throw DegenerateConfiguration("solve_pnp: points collinear");
  }
  const bool planar = std::sqrt(lam(0)) / s_max < 1e-3;

  EpnpSetup setup;
  setup.num_ctrl = planar ? 3 : 4;
  setup.ctrl_world.resize(setup.num_ctrl);
  setup.ctrl_world[0] = centroid;
  for (int k = 1; k < setup.num_ctrl; ++k) {
    const int axis = 2 - (k - 1);  // descending spread
    setup.ctrl_world[k] =
        centroid + std::sqrt(lam(axis) / n) * es.eigenvectors().col(axis);
  }

  setup.alphas.resize(n, setup.num_ctrl);
  if (!planar) {
    Eigen::Matrix3d basis;
    for (int k = 0; k < 3; ++k) basis.col(k) = setup.ctrl_world[k + 1] - centroid;
    const Eigen::Matrix3d inv = basis.inverse();
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d a = inv * (world[i] - centroid);
      setup.alphas(i, 0) = 1.0 - a.sum();
      for (int k = 0; k < 3; ++k) setup.alphas(i, k + 1) = a(k);
    }
  } else {
    Eigen::Matrix<double, 3, 2> basis;
    basis.col(0) = setup.ctrl_world[1] - centroid;
    basis.col(1) = setup.ctrl_world[2] - centroid;
    const Eigen::Matrix2d gram = basis.transpose() * basis;
    const Eigen::Matrix<double, 2, 3> pinv = gram.inverse() * basis.transpose();
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d a = pinv * (world[i] - centroid);
      setup.alphas(i, 0) = 1.0 - a.sum();
      setup.alphas(i, 1) = a(0);
      setup.alphas(i, 2) = a(1);
    }
  }

  Eigen::MatrixXd m(2 * n, 3 * setup.num_ctrl);
  for (int i = 0; i < n; ++i) {
    const double u = pixels[static_cast<std::size_t>(i)].x();
    const double v = pixels[static_cast<std::size_t>(i)].y();
    for (int j = 0; j < setup.num_ctrl; ++j) {
      const double a = setup.alphas(i, j);
      m(2 * i, 3 * j) = a * focal_px;
      m(2 * i, 3 * j + 1) = 0.0;
      m(2 * i, 3 * j + 2) = a * (corr.cx - u);
      m(2 * i + 1, 3 * j) = 0.0;
      m(2 * i + 1, 3 * j + 1) = a * focal_px;
      m(2 * i + 1, 3 * j + 2) = a * (corr.cy - v);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m.transpose() * m);
  const int num_kernel = planar ? 2 : 4;
  setup.kernel = em.eigenvectors().leftCols(num_kernel);

  setup.pairs = make_pairs(setup.num_ctrl);
  setup.rho.resize(static_cast<Eigen::Index>(setup.pairs.size()));
  for (std::size_t p = 0; p < setup.pairs.size(); ++p) {
    setup.rho(static_cast<Eigen::Index>(p)) =
        (setup.ctrl_world[setup.pairs[p].first] - setup.ctrl_world[setup.pairs[p].second])
            .squaredNorm();
  }

  std::vector<Eigen::VectorXd> candidates;
  candidates.push_back(betas_scale_only(setup));
  candidates.push_back(betas_two_vectors(setup));
  if (!planar) {
    candidates.push_back(betas_three_vectors(setup));
    candidates.push_back(betas_four_vectors(setup));
  }

  double best_err = kBigError;
  Eigen::Matrix3d best_r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d best_t = Eigen::Vector3d::Zero();
  for (Eigen::VectorXd betas : candidates) {
    if (refine) gauss_newton_refine(setup, &betas);
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    const double err = pose_from_betas(setup, corr, betas, &r, &t);
    if (err < best_err) {
      best_err = err;
      best_r = r;
      best_t = t;
    }
  }
  if (best_err >= kBigError) {
    throw DegenerateConfiguration("solve_pnp: no candidate places points in front of camera");
  }
  return PnpResult{Rotation::from_matrix(best_r), best_t, best_err};
}

RansacPnpResult solve_pnp_ransac(const std::vector<Point3>& world,
                                 const std::vector<Point2>& pixels, double focal_px,
                                 const ImageSize& size, const RansacConfig& config) {
  if (world.size() != pixels.size()) {
    throw LengthMismatch("solve_pnp_ransac: world and pixel lists differ in length");
  }
  const int n = static_cast<int>(world.size());
  const int sample_size = config.min_sample;
  if (n < sample_size) throw TooFewPoints("solve_pnp_ransac: too few correspondences");

  const Correspondences corr{world, pixels, focal_px, size.width / 2.0, size.height / 2.0};
  Rng rng(config.seed);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);

  int best_count = 0;
  double best_mean = kBigError;
  Eigen::Matrix3d best_r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d best_t = Eigen::Vector3d::Zero();
  std::vector<bool> best_mask(static_cast<std::size_t>(n), false);

  int needed = config.max_iterations;
  int iter = 0;
  std::vector<Point3> sw(static_cast<std::size_t>(sample_size));
  std::vector<Point2> sp(static_cast<std::size_t>(sample_size));
  for (; iter < needed; ++iter) {
    for (int k = 0; k < sample_size; ++k) {
      const std::size_t j =
          static_cast<std::size_t>(k) + rng.uniform_index(static_cast<std::size_t>(n - k));
      std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
      sw[static_cast<std::size_t>(k)] = world[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
      sp[static_cast<std::size_t>(k)] = pixels[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    }
    PnpResult pose;
    try {
      pose = solve_pnp(sw, sp, focal_px, size, true);
    } catch (const Error&) {
      continue;  // degenerate sample
    }
    const Eigen::Matrix3d r = pose.rotation.matrix();
    const Eigen::Vector3d& t = pose.translation_m;

    int count = 0;
    double err_sum = 0.0;
    std::vector<bool> mask(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      const double e = point_error_px(corr, r, t, static_cast<std::size_t>(i));
      if (e <= config.threshold_px) {
        mask[static_cast<std::size_t>(i)] = true;
        ++count;
        err_sum += e;
      }
    }
    if (count == 0) continue;
    const double mean = err_sum / count;
    if (count > best_count || (count == best_count && mean < best_mean)) {
      best_count = count;
      best_mean = mean;
      best_r = r;
      best_t = t;
      best_mask = mask;
      const double w = static_cast<double>(count) / n;
      const double denom = 1.0 - std::pow(w, sample_size);
      if (denom <= std::numeric_limits<double>::epsilon()) {
        needed = iter + 1;
      } else {
        const double bound = std::log(1.0 - config.confidence) / std::log(denom);
        if (bound < static_cast<double>(config.max_iterations)) {
          needed = std::max(iter + 1, static_cast<int>(std::ceil(bound)));
        }
      }
    }
  }

  if (best_count < config.min_sample) {
    throw NoConsensus("solve_pnp_ransac: no consensus set");
  }

  RansacPnpResult out;
  out.inlier_mask = best_mask;
  for (int i = 0; i < n; ++i) {
    if (best_mask[static_cast<std::size_t>(i)]) out.inliers.push_back(i);
  }
  std::vector<Point3> iw;
  std::vector<Point2> ip;
  for (int i : out.inliers) {
    iw.push_back(world[static_cast<std::size_t>(i)]);
    ip.push_back(pixels[static_cast<std::size_t>(i)]);
  }
  try {
    const PnpResult refit = solve_pnp(iw, ip, focal_px, size, true);
    best_r = refit.rotation.matrix();
    best_t = refit.translation_m;
  } catch (const Error&) {
    // refit can degenerate on unlucky inlier geometry; keep the sample pose
  }
  double err_sum = 0.0;
  for (int i : out.inliers) {
    err_sum += point_error_px(corr, best_r, best_t, static_cast<std::size_t>(i));
  }
  out.rotation = Rotation::from_matrix(best_r);
  out.translation_m = best_t;
  out.mean_inlier_error_px = err_sum / best_count;
  out.iterations_run = iter;
  return out;
}

}  // namespace camdense
