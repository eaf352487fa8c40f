#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "tacdepth/error.hpp"
#include "tacdepth/simulator/shape.hpp"

namespace tacdepth::pose {

/// Exact signed distance to a primitive in its own frame; negative inside.
inline double sdf_eval(const ShapeDims& s, const Eigen::Vector3d& p) {
  const auto& d = s.dims;
  switch (s.kind) {
    case ShapeKind::kSphere:
      return p.norm() - d[0];
    case ShapeKind::kBox: {
      const Eigen::Vector3d q = p.cwiseAbs() - Eigen::Vector3d(d[0], d[1], d[2]);
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case ShapeKind::kCylinder: {
      const double dr = std::hypot(p.x(), p.y()) - d[0];
      const double dz = std::abs(p.z()) - d[1];
      return std::min(std::max(dr, dz), 0.0) + std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
    }
    case ShapeKind::kCapsule: {
      const double z = std::clamp(p.z(), -d[1], d[1]);
      return Eigen::Vector3d(p.x(), p.y(), p.z() - z).norm() - d[0];
    }
  }
  throw DomainError("sdf_eval: unsupported primitive");
}

/// Proximity field of one primitive, defined in the object frame.
struct ProximityField {
  ShapeDims shape;

  explicit ProximityField(ShapeDims s) : shape(s) { shape.validate(); }

  double operator()(const Eigen::Vector3d& p_object) const { return sdf_eval(shape, p_object); }
};

}  // namespace tacdepth::pose
