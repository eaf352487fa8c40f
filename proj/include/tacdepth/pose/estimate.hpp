#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/Core>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/geometry/pose.hpp"
#include "tacdepth/pose/sdf.hpp"

namespace tacdepth::pose {

/// residual_i = phi(T^-1 p_i): sensor-frame points mapped into the object
/// frame of `pose` (object -> sensor). The quaternion is normalized first.
inline Eigen::VectorXd residuals(const ProximityField& field, const Pose& pose, std::span<const Eigen::Vector3d> cloud) {
  if (cloud.empty()) throw DomainError("residuals: empty point cloud");
  const Pose T = pose.normalized();
  const Eigen::Matrix3d Rt = T.rotation.toRotationMatrix().transpose();
  Eigen::VectorXd r(static_cast<Eigen::Index>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i)
    r[static_cast<Eigen::Index>(i)] = field(Rt * (cloud[i] - T.translation));
  return r;
}

inline double cost(const ProximityField& field, const Pose& pose, std::span<const Eigen::Vector3d> cloud) {
  return residuals(field, pose, cloud).squaredNorm();
}

struct LmOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;
  double relative_cost_tolerance = 1e-12;
  double fd_step = 1e-6;
  double initial_lambda = 1e-3;
  double lambda_factor = 10.0;
  double max_lambda = 1e16;
  double rank_tolerance = 1e-10;  // relative eigenvalue cut of the damped normal matrix
};

struct PoseEstimate {
  Pose pose;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> accepted_costs;  // initial cost, then after each accepted step
  std::vector<double> quaternion_norms;  // after every iteration
};

namespace detail {

inline Pose from_theta(const Eigen::Matrix<double, 7, 1>& th) {
  return Pose::from_vector({th[0], th[1], th[2], th[3], th[4], th[5], th[6]});
}

inline Eigen::Matrix<double, 7, 1> to_theta(const Pose& p) {
  const auto v = p.to_vector();
  return Eigen::Map<const Eigen::Matrix<double, 7, 1>>(v.data());
}

/// 7x6 basis: identity on translation, and an orthonormal basis of the
/// quaternion tangent space (columns of the left-multiplication matrix of q
/// orthogonal to q itself).
inline Eigen::Matrix<double, 7, 6> tangent_basis(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix<double, 7, 6> B = Eigen::Matrix<double, 7, 6>::Zero();
  B.block<3, 3>(0, 0).setIdentity();
  B.block<4, 3>(3, 3) << -x, -y, -z,
                          w, -z,  y,
                          z,  w, -x,
                         -y,  x,  w;
  return B;
}

/// Minimum-norm solution of the symmetric system M x = b. Eigen-directions
/// with eigenvalue below rel_tol times the largest are dropped, so
/// directions the cloud cannot see (spin about a cylinder's axis, slide
/// along it) get no step instead of one driven by finite-difference noise.
inline Eigen::Matrix<double, 6, 1> min_norm_solve(const Eigen::Matrix<double, 6, 6>& M,
                                                  const Eigen::Matrix<double, 6, 1>& b, double rel_tol) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(M);
  const auto& ev = es.eigenvalues();
  const double cut = ev.maxCoeff() * rel_tol;
  Eigen::Matrix<double, 6, 1> x = Eigen::Matrix<double, 6, 1>::Zero();
  for (int k = 0; k < 6; ++k)
    if (ev[k] > cut) x += es.eigenvectors().col(k) * (es.eigenvectors().col(k).dot(b) / ev[k]);
  return x;
}

}  // namespace detail

/// Central-difference Jacobian of the residuals w.r.t. the 7-vector
/// [t, q], N x 7.
inline Eigen::MatrixXd jacobian(const ProximityField& field, const Pose& pose, std::span<const Eigen::Vector3d> cloud,
                                double h) {
  const Eigen::Matrix<double, 7, 1> th = detail::to_theta(pose);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(cloud.size()), 7);
  for (int k = 0; k < 7; ++k) {
    Eigen::Matrix<double, 7, 1> a = th, b = th;
    a[k] += h;
    b[k] -= h;
    J.col(k) = (residuals(field, detail::from_theta(a), cloud) - residuals(field, detail::from_theta(b), cloud)) / (2 * h);
  }
  return J;
}

/// Levenberg-Marquardt on the 7-vector pose. Steps are solved in the
/// 6-dimensional tangent space and the quaternion is renormalized after
/// every step. Only cost-decreasing steps are accepted.
inline PoseEstimate estimate_pose(const ProximityField& field, std::span<const Eigen::Vector3d> cloud,
                                  const Pose& initial, const LmOptions& opt = {}) {
  if (cloud.empty()) throw DomainError("estimate_pose: empty point cloud");
  PoseEstimate est;
  est.pose = initial.normalized();
  Eigen::VectorXd r = residuals(field, est.pose, cloud);
  double c = r.squaredNorm();
  if (!std::isfinite(c)) throw NumericError("estimate_pose: non-finite cost at iteration 0", 0);
  est.initial_cost = c;
  est.accepted_costs.push_back(c);
  double lambda = opt.initial_lambda;
  bool need_jacobian = true;
  Eigen::Matrix<double, 6, 6> A;
  Eigen::Matrix<double, 6, 1> g;
  Eigen::Matrix<double, 7, 6> B;

  while (true) {
    if (c == 0.0) {
      est.converged = true;
      est.stop_reason = "zero_cost";
      break;
    }
    if (est.iterations >= opt.max_iterations) {
      est.stop_reason = "max_iterations";
      break;
    }
    ++est.iterations;
    if (need_jacobian) {
      B = detail::tangent_basis(detail::to_theta(est.pose).tail<4>());
      const Eigen::MatrixXd J = jacobian(field, est.pose, cloud, opt.fd_step) * B;
      A = J.transpose() * J;
      g = J.transpose() * r;
      need_jacobian = false;
    }
    Eigen::Matrix<double, 6, 1> diag = A.diagonal();
    const double floor = std::max(diag.maxCoeff() * 1e-9, 1e-300);
    diag = diag.cwiseMax(floor);
    Eigen::Matrix<double, 6, 6> M = A;
    M.diagonal() += lambda * diag;
    const Eigen::Matrix<double, 6, 1> delta = detail::min_norm_solve(M, -g, opt.rank_tolerance);
    const Eigen::Matrix<double, 7, 1> step = B * delta;
    const Eigen::Matrix<double, 7, 1> th = detail::to_theta(est.pose) + step;
    const Pose trial = detail::from_theta(th).normalized();
    const Eigen::VectorXd r_trial = residuals(field, trial, cloud);
    const double c_trial = r_trial.squaredNorm();
    if (!std::isfinite(c_trial))
      throw NumericError("estimate_pose: non-finite cost at iteration " + std::to_string(est.iterations),
                         est.iterations);
    const double step_norm = step.norm();
    if (c_trial < c) {
      const double rel = (c - c_trial) / c;
      est.pose = trial;
      r = r_trial;
      c = c_trial;
      est.accepted_costs.push_back(c);
      lambda = std::max(lambda / opt.lambda_factor, 1e-300);
      need_jacobian = true;
      est.quaternion_norms.push_back(est.pose.quaternion_norm());
      if (step_norm < opt.step_tolerance) {
        est.converged = true;
        est.stop_reason = "step_tolerance";
        break;
      }
      if (rel < opt.relative_cost_tolerance) {
        est.converged = true;
        est.stop_reason = "relative_cost";
        break;
      }
    } else {
      est.quaternion_norms.push_back(est.pose.quaternion_norm());
      if (step_norm < opt.step_tolerance) {
        est.converged = true;
        est.stop_reason = "step_tolerance";
        break;
      }
      lambda *= opt.lambda_factor;
      if (lambda > opt.max_lambda) {
        est.converged = true;
        est.stop_reason = "no_descent";
        break;
      }
    }
  }
  est.final_cost = c;
  return est;
}

/// Concatenates clouds given in their own sensor frames into one frame;
/// extrinsics[k] maps cloud k into the common frame.
inline PointCloud merge_clouds(std::span<const PointCloud> clouds, std::span<const Pose> extrinsics) {
  if (clouds.size() != extrinsics.size()) throw DomainError("merge_clouds: one extrinsic per cloud required");
  PointCloud out;
  for (std::size_t k = 0; k < clouds.size(); ++k)
    for (const auto& p : clouds[k]) out.push_back(extrinsics[k].apply(p));
  return out;
}

// ------------------------------------------------------------ errors

struct PoseError {
  double e_x = 0.0;      // meters
  double e_theta = 0.0;  // 1 - |q1 . q2|
};

inline PoseError pose_errors(const Pose& a, const Pose& b) {
  if (!a.is_unit() || !b.is_unit()) throw DomainError("pose_errors: quaternions must be unit norm");
  PoseError e;
  e.e_x = (a.translation - b.translation).norm();
  e.e_theta = std::clamp(1.0 - std::abs(a.rotation.coeffs().dot(b.rotation.coeffs())), 0.0, 1.0);
  return e;
}

/// Angle between two (unsigned) axes, radians.
inline double axis_angle_error(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d u = a.normalized(), v = b.normalized();
  return std::atan2(u.cross(v).norm(), std::abs(u.dot(v)));
}

}  // namespace tacdepth::pose
