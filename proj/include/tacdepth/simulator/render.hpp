#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/random.hpp"
#include "tacdepth/simulator/sensor.hpp"

namespace tacdepth::sim {

inline constexpr double kDotDarkening = 0.15;

/// Pixels covered by the printed dot pattern. Depends only on the pattern
/// parameters and the image size, never on the depth.
inline PixelMask dot_mask(const DotPattern& dots, int width, int height) {
  PixelMask mask(width, height);
  if (!dots.enabled || dots.density == 0) return mask;
  Rng rng(derive_seed(dots.seed, "dots"));
  const double r2 = dots.radius * dots.radius;
  const int reach = static_cast<int>(std::ceil(dots.radius));
  for (int k = 0; k < dots.density; ++k) {
    const double cu = rng.uniform(-0.5, width - 0.5);
    const double cv = rng.uniform(-0.5, height - 0.5);
    const int u0 = static_cast<int>(std::lround(cu)), v0 = static_cast<int>(std::lround(cv));
    for (int v = std::max(0, v0 - reach); v <= std::min(height - 1, v0 + reach); ++v) {
      for (int u = std::max(0, u0 - reach); u <= std::min(width - 1, u0 + reach); ++u) {
        const double du = u - cu, dv = v - cv;
        if (du * du + dv * dv <= r2) mask.bits[static_cast<std::size_t>(v) * width + u] = 1;
      }
    }
  }
  return mask;
}

namespace detail {

inline Eigen::Vector3d lift(const CameraIntrinsics& cam, int u, int v, double d) {
  return {(u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d};
}

}  // namespace detail

/// Unnormalised Lambertian response: max(0, n.l) / d^2 with the emitter
/// coaxial with the camera (l = -z) and d the pixel depth. Normals come
/// from central differences of the lifted depth map, one-sided at the
/// validity boundary. Invalid pixels return 0.
inline std::vector<double> shading(const DepthMap& depth, const CameraIntrinsics& cam) {
  const int W = depth.width(), H = depth.height();
  std::vector<double> out(depth.size(), 0.0);
  auto ok = [&](int u, int v) { return u >= 0 && v >= 0 && u < W && v < H && depth.valid(u, v); };
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!depth.valid(u, v)) continue;
      const double d = depth.depth(u, v);
      const Eigen::Vector3d p = detail::lift(cam, u, v, d);
      auto tangent = [&](int du, int dv) -> Eigen::Vector3d {
        const bool fwd = ok(u + du, v + dv), back = ok(u - du, v - dv);
        const Eigen::Vector3d pf = fwd ? detail::lift(cam, u + du, v + dv, depth.depth(u + du, v + dv)) : p;
        const Eigen::Vector3d pb = back ? detail::lift(cam, u - du, v - dv, depth.depth(u - du, v - dv)) : p;
        return pf - pb;
      };
      const Eigen::Vector3d tu = tangent(1, 0), tv = tangent(0, 1);
      Eigen::Vector3d n = tu.cross(tv);
      double cos_term = 1.0;
      if (n.norm() > 0.0) {
        n.normalize();
        cos_term = std::max(0.0, std::abs(n.z()));  // facing the camera by construction
      }
      out[static_cast<std::size_t>(v) * W + u] = cos_term / (d * d);
    }
  }
  return out;
}

/// IR-like grayscale rendering of a depth map: shading normalised so a
/// frontal surface at ir_reference_depth renders at 1, printed dots
/// darkened multiplicatively, then additive Gaussian noise, clamped to
/// [0, 1].
inline GrayImage render_ir(const DepthMap& depth, const SensorConfig& config,
                           std::uint64_t noise_seed) {
  const auto& cam = config.intrinsics;
  if (depth.width() != cam.width || depth.height() != cam.height)
    throw ShapeError("render_ir: depth map does not match intrinsics");
  const auto shade = shading(depth, cam);
  const PixelMask dots = dot_mask(config.dot_pattern, cam.width, cam.height);
  const double norm = config.ir_reference_depth * config.ir_reference_depth;
  GrayImage img(cam.width, cam.height);
  Rng rng(derive_seed(noise_seed, "ir-noise"));
  for (std::size_t i = 0; i < img.size(); ++i) {
    double x = shade[i] * norm;
    if (dots.bits[i]) x *= kDotDarkening;
    if (config.noise_sigma > 0.0) x += config.noise_sigma * rng.normal();
    img[i] = std::clamp(x, 0.0, 1.0);
  }
  return img;
}

/// Sensor artefacts on a clean depth map: out-of-FOV pixels always
/// invalid, close-range returns (depth < saturation_depth) dropped with
/// probability `rate`, everything else perturbed by Gaussian depth noise.
inline DepthMap degrade_depth(const DepthMap& depth, const SensorConfig& config,
                              std::uint64_t rng_seed) {
  if (depth.width() != config.intrinsics.width || depth.height() != config.intrinsics.height)
    throw ShapeError("degrade_depth: depth map does not match intrinsics");
  Rng rng(derive_seed(rng_seed, "dropout"));
  DepthMap out(depth.width(), depth.height());
  const double floor = 0.1 * config.rest_depth_range[0];
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.valid(u, v) || !config.in_fov(u, v)) continue;
      const double d = depth.depth(u, v);
      // Both draws happen for every pixel so streams stay aligned.
      const double drop = rng.uniform();
      const double noise = rng.normal();
      if (d < config.dropout.saturation_depth && drop < config.dropout.rate) continue;
      out.set(u, v, std::max(floor, d + config.dropout.depth_noise_sigma * noise));
    }
  }
  return out;
}

}  // namespace tacdepth::sim
