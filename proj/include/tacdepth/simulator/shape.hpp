#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tacdepth/error.hpp"
#include "tacdepth/geometry/pose.hpp"

namespace tacdepth {

enum class ShapeKind { kSphere, kCylinder, kBox, kCapsule };

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kCylinder: return "cylinder";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kCapsule: return "capsule";
  }
  return "unknown";
}

inline ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "sphere") return ShapeKind::kSphere;
  if (s == "cylinder") return ShapeKind::kCylinder;
  if (s == "box") return ShapeKind::kBox;
  if (s == "capsule") return ShapeKind::kCapsule;
  throw DomainError("unsupported primitive '" + s + "'");
}

/// Primitive geometry in its own frame. Axis-aligned with the object
/// frame; cylinders and capsules run along +z.
///   sphere   {radius}
///   cylinder {radius, half_height}
///   box      {half_x, half_y, half_z}
///   capsule  {radius, half_length}   (segment from -z to +z)
struct ShapeDims {
  ShapeKind kind = ShapeKind::kSphere;
  std::array<double, 3> dims{0.01, 0.0, 0.0};

  static ShapeDims sphere(double r) { return {ShapeKind::kSphere, {r, 0, 0}}; }
  static ShapeDims cylinder(double r, double half_height) {
    return {ShapeKind::kCylinder, {r, half_height, 0}};
  }
  static ShapeDims box(double hx, double hy, double hz) { return {ShapeKind::kBox, {hx, hy, hz}}; }
  static ShapeDims capsule(double r, double half_length) {
    return {ShapeKind::kCapsule, {r, half_length, 0}};
  }

  int dim_count() const { return kind == ShapeKind::kSphere ? 1 : kind == ShapeKind::kBox ? 3 : 2; }

  void validate() const {
    for (int i = 0; i < dim_count(); ++i)
      if (!(dims[i] > 0.0) || !std::isfinite(dims[i]))
        throw DomainError(std::string(to_string(kind)) + ": dimensions must be positive");
  }
};

/// A primitive placed in the sensor frame.
struct ShapePrimitive {
  ShapeDims shape;
  Pose pose;  // object -> sensor
};

namespace sim {

namespace detail {

inline void keep_min(std::optional<double>& best, double t) {
  if (t > 0.0 && (!best || t < *best)) best = t;
}

inline std::optional<double> ray_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                        const Eigen::Vector3d& c, double r) {
  const Eigen::Vector3d oc = o - c;
  const double a = d.squaredNorm(), b = oc.dot(d), cc = oc.squaredNorm() - r * r;
  const double disc = b * b - a * cc;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  std::optional<double> best;
  keep_min(best, (-b - s) / a);
  if (!best) keep_min(best, (-b + s) / a);
  return best;
}

/// Lateral surface of the infinite z-axis cylinder, restricted to |z| <= h.
inline void ray_tube(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r, double h,
                     std::optional<double>& best) {
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a <= 0.0) return;
  const double b = o.x() * d.x() + o.y() * d.y();
  const double c = o.x() * o.x() + o.y() * o.y() - r * r;
  const double disc = b * b - a * c;
  if (disc < 0.0) return;
  const double s = std::sqrt(disc);
  for (double t : {(-b - s) / a, (-b + s) / a}) {
    if (std::abs(o.z() + t * d.z()) <= h) keep_min(best, t);
  }
}

}  // namespace detail

/// First positive ray parameter at which o + t*d meets the primitive's
/// surface, in the primitive's own frame.
inline std::optional<double> ray_cast_local(const ShapeDims& s, const Eigen::Vector3d& o,
                                            const Eigen::Vector3d& d) {
  std::optional<double> best;
  switch (s.kind) {
    case ShapeKind::kSphere:
      return detail::ray_sphere(o, d, Eigen::Vector3d::Zero(), s.dims[0]);
    case ShapeKind::kBox: {
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i) {
        const double h = s.dims[i];
        if (d[i] == 0.0) {
          if (std::abs(o[i]) > h) return std::nullopt;
          continue;
        }
        double t1 = (-h - o[i]) / d[i], t2 = (h - o[i]) / d[i];
        if (t1 > t2) std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
      }
      if (t_near > t_far || t_far <= 0.0) return std::nullopt;
      detail::keep_min(best, t_near > 0.0 ? t_near : t_far);
      return best;
    }
    case ShapeKind::kCylinder: {
      const double r = s.dims[0], h = s.dims[1];
      detail::ray_tube(o, d, r, h, best);
      if (d.z() != 0.0) {
        for (double zc : {-h, h}) {
          const double t = (zc - o.z()) / d.z();
          const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
          if (x * x + y * y <= r * r) detail::keep_min(best, t);
        }
      }
      return best;
    }
    case ShapeKind::kCapsule: {
      const double r = s.dims[0], h = s.dims[1];
      detail::ray_tube(o, d, r, h, best);
      for (double zc : {-h, h}) {
        if (auto t = detail::ray_sphere(o, d, {0, 0, zc}, r)) detail::keep_min(best, *t);
      }
      return best;
    }
  }
  return best;
}

/// Ray from the sensor origin along d (sensor frame). With d.z() == 1 the
/// returned parameter equals the hit depth.
inline std::optional<double> ray_cast(const ShapePrimitive& p, const Eigen::Vector3d& d) {
  const Eigen::Vector3d o_local = p.pose.apply_inverse(Eigen::Vector3d::Zero());
  const Eigen::Vector3d d_local = p.pose.rotation.conjugate() * d;
  return ray_cast_local(p.shape, o_local, d_local);
}

/// Smallest sensor-frame z over the primitive (its support along -z).
inline double min_depth(const ShapePrimitive& p) {
  const Eigen::Matrix3d R = p.pose.rotation.toRotationMatrix();
  const Eigen::Vector3d zrow = R.row(2).transpose();  // object-frame direction of sensor z
  const double tz = p.pose.translation.z();
  const auto& d = p.shape.dims;
  switch (p.shape.kind) {
    case ShapeKind::kSphere: return tz - d[0];
    case ShapeKind::kBox:
      return tz - (std::abs(zrow.x()) * d[0] + std::abs(zrow.y()) * d[1] + std::abs(zrow.z()) * d[2]);
    case ShapeKind::kCylinder: {
      const double az = std::abs(zrow.z());
      return tz - (d[0] * std::sqrt(std::max(0.0, 1.0 - az * az)) + d[1] * az);
    }
    case ShapeKind::kCapsule: return tz - (d[0] + d[1] * std::abs(zrow.z()));
  }
  return tz;
}

}  // namespace sim
}  // namespace tacdepth
