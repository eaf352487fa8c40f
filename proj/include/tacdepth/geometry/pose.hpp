#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>

#include "tacdepth/error.hpp"

namespace tacdepth {

/// Rigid transform object -> sensor frame: p_sensor = R(q) * p_object + t.
/// Serialized as the 7-vector [tx, ty, tz, qw, qx, qy, qz].
struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  Pose() = default;
  Pose(const Eigen::Vector3d& t, const Eigen::Quaterniond& q) : translation(t), rotation(q) {}

  static Pose identity() { return {}; }

  static Pose from_vector(const std::array<double, 7>& v) {
    return Pose({v[0], v[1], v[2]}, Eigen::Quaterniond(v[3], v[4], v[5], v[6]));
  }

  std::array<double, 7> to_vector() const {
    return {translation.x(), translation.y(), translation.z(),
            rotation.w(),    rotation.x(),    rotation.y(), rotation.z()};
  }

  static Pose from_axis_angle(const Eigen::Vector3d& t, const Eigen::Vector3d& axis, double angle) {
    return Pose(t, Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
  }

  double quaternion_norm() const { return rotation.coeffs().norm(); }

  bool is_unit(double tol = 1e-9) const { return std::abs(quaternion_norm() - 1.0) <= tol; }

  Pose normalized() const {
    Pose p = *this;
    p.rotation.normalize();
    return p;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  /// Maps sensor-frame points into the object frame.
  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p) const {
    return rotation.conjugate() * (p - translation);
  }

  Pose inverse() const {
    const Eigen::Quaterniond qi = rotation.conjugate();
    return Pose(-(qi * translation), qi);
  }

  /// (this * other)(p) == this(other(p)).
  Pose operator*(const Pose& other) const {
    return Pose(rotation * other.translation + translation, rotation * other.rotation);
  }
};

}  // namespace tacdepth
