#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/simulator/sensor.hpp"
#include "tacdepth/simulator/shape.hpp"

namespace tacdepth::sim {

/// Camera ray through pixel (u, v), scaled so that its z component is 1.
inline Eigen::Vector3d pixel_ray(const CameraIntrinsics& cam, double u, double v) {
  return {(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0};
}

/// Depth of the undeformed membrane: near intersection of each pixel ray
/// with the membrane ellipsoid. Pixels outside the FOV circle are invalid.
inline DepthMap rest_surface(const SensorConfig& config) {
  config.validate();
  const auto& cam = config.intrinsics;
  const Eigen::Vector3d& ax = config.membrane.semi_axes;
  const double zc = config.membrane.center_depth();
  DepthMap out(cam.width, cam.height);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      if (!config.in_fov(u, v)) continue;
      const Eigen::Vector3d d = pixel_ray(cam, u, v);
      // ((x t)/a)^2 + ((y t)/b)^2 + ((t - zc)/c)^2 = 1
      const double A = d.x() * d.x() / (ax.x() * ax.x()) + d.y() * d.y() / (ax.y() * ax.y()) +
                       1.0 / (ax.z() * ax.z());
      const double B = -2.0 * zc / (ax.z() * ax.z());
      const double C = (zc * zc - ax.z() * ax.z()) / (ax.z() * ax.z());
      const double disc = B * B - 4.0 * A * C;
      if (disc < 0.0)
        throw DomainError("rest_surface: membrane not visible from the camera at pixel (" +
                          std::to_string(u) + "," + std::to_string(v) + ")");
      const double t = 2.0 * C / (-B + std::sqrt(disc));  // near root, stable form
      if (!(t > 0.0)) throw DomainError("rest_surface: degenerate membrane geometry");
      out.set(u, v, t);
    }
  }
  return out;
}

struct Indentation {
  DepthMap depth;
  PixelMask contact;  // pixels pinned to the object surface
};

/// Presses the object (union of primitives) into the membrane.
///
/// Along each valid pixel ray the membrane is pushed to the object's front
/// surface where the object lies in front of the rest membrane. The
/// displacement toward the camera is then relaxed by Jacobi neighbour
/// averaging with contact pixels held fixed and invalid/out-of-image
/// neighbours pinned at zero. Non-contact displacement is therefore zero
/// beyond relaxation_iterations pixels (4-neighbour distance) of contact.
inline Indentation indent_with_contact(const DepthMap& rest,
                                       std::span<const ShapePrimitive> primitives,
                                       const SensorConfig& config) {
  const auto& cam = config.intrinsics;
  if (rest.width() != cam.width || rest.height() != cam.height)
    throw ShapeError("indent: rest map does not match the sensor intrinsics");
  for (const auto& p : primitives) p.shape.validate();

  const int W = rest.width(), H = rest.height();
  const std::size_t n = rest.size();
  Indentation result{rest, PixelMask(W, H)};
  std::vector<double> disp(n, 0.0);
  bool any_contact = false;
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!rest.valid(u, v)) continue;
      const double d_rest = rest.depth(u, v);
      const Eigen::Vector3d ray = pixel_ray(cam, u, v);
      for (const auto& p : primitives) {
        if (auto t = ray_cast(p, ray); t && *t < d_rest) {
          const std::size_t i = static_cast<std::size_t>(v) * W + u;
          disp[i] = std::max(disp[i], d_rest - *t);
          result.contact.bits[i] = 1;
          any_contact = true;
        }
      }
    }
  }
  if (!any_contact) return result;

  std::vector<double> next(disp);
  auto at = [&](const std::vector<double>& f, int u, int v) {
    if (u < 0 || v < 0 || u >= W || v >= H) return 0.0;
    return f[static_cast<std::size_t>(v) * W + u];
  };
  for (int it = 0; it < config.relaxation_iterations; ++it) {
    for (int v = 0; v < H; ++v) {
      for (int u = 0; u < W; ++u) {
        const std::size_t i = static_cast<std::size_t>(v) * W + u;
        if (!rest.valid(i) || result.contact.bits[i]) continue;
        next[i] = 0.25 * (at(disp, u - 1, v) + at(disp, u + 1, v) + at(disp, u, v - 1) +
                          at(disp, u, v + 1));
      }
    }
    disp.swap(next);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rest.valid(i) && disp[i] != 0.0) result.depth.set(i, rest.depth(i) - disp[i]);
  }
  return result;
}

inline DepthMap indent(const DepthMap& rest, std::span<const ShapePrimitive> primitives,
                       const SensorConfig& config) {
  return indent_with_contact(rest, primitives, config).depth;
}

inline DepthMap indent(const DepthMap& rest, const ShapePrimitive& primitive,
                       const SensorConfig& config) {
  return indent(rest, std::span<const ShapePrimitive>(&primitive, 1), config);
}

}  // namespace tacdepth::sim
