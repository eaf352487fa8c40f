#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>

#include "tacdepth/random.hpp"
#include "tacdepth/simulator/shape.hpp"

namespace tacdepth::testing {

/// Point on the surface of a primitive in its own frame, built from the
/// parametric description of each face (not from the distance function).
inline Eigen::Vector3d sample_surface(const ShapeDims& s, Rng& rng) {
  const auto& d = s.dims;
  const double two_pi = 2.0 * std::numbers::pi;
  auto unit = [&rng] {
    Eigen::Vector3d v;
    do v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    while (v.norm() < 1e-9);
    return Eigen::Vector3d(v.normalized());
  };
  switch (s.kind) {
    case ShapeKind::kSphere:
      return d[0] * unit();
    case ShapeKind::kBox: {
      const int axis = static_cast<int>(rng.below(3));
      Eigen::Vector3d p(rng.uniform(-d[0], d[0]), rng.uniform(-d[1], d[1]), rng.uniform(-d[2], d[2]));
      p[axis] = rng.uniform() < 0.5 ? -d[static_cast<std::size_t>(axis)] : d[static_cast<std::size_t>(axis)];
      return p;
    }
    case ShapeKind::kCylinder: {
      const double a = rng.uniform(0.0, two_pi);
      if (rng.uniform() < 0.6) return {d[0] * std::cos(a), d[0] * std::sin(a), rng.uniform(-d[1], d[1])};
      const double r = d[0] * std::sqrt(rng.uniform());
      return {r * std::cos(a), r * std::sin(a), rng.uniform() < 0.5 ? -d[1] : d[1]};
    }
    case ShapeKind::kCapsule: {
      if (rng.uniform() < 0.5) {
        const double a = rng.uniform(0.0, two_pi);
        return {d[0] * std::cos(a), d[0] * std::sin(a), rng.uniform(-d[1], d[1])};
      }
      Eigen::Vector3d u = unit();
      const double cap = rng.uniform() < 0.5 ? -d[1] : d[1];
      if ((cap > 0) != (u.z() > 0)) u.z() = -u.z();
      return Eigen::Vector3d(0, 0, cap) + d[0] * u;
    }
  }
  return Eigen::Vector3d::Zero();
}

/// Random primitive with dimensions in [lo, hi].
inline ShapeDims random_shape(ShapeKind kind, Rng& rng, double lo = 0.005, double hi = 0.05) {
  return {kind, {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)}};
}

}  // namespace tacdepth::testing
