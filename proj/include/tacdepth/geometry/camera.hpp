#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/random.hpp"

namespace tacdepth::geometry {

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Lifts every valid pixel to the camera frame.
inline PointCloud unproject(const DepthMap& depth, const CameraIntrinsics& cam) {
  if (depth.width() != cam.width || depth.height() != cam.height)
    throw ShapeError("unproject: depth map and intrinsics disagree on image size");
  PointCloud cloud;
  cloud.reserve(depth.valid_count());
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.valid(u, v)) continue;
      const double d = depth.depth(u, v);
      cloud.emplace_back((u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d);
    }
  }
  return cloud;
}

/// Same as unproject, restricted to pixels where mask is set.
inline PointCloud unproject_masked(const DepthMap& depth, const CameraIntrinsics& cam,
                                   const PixelMask& mask) {
  if (mask.width != depth.width() || mask.height != depth.height())
    throw ShapeError("unproject_masked: mask size mismatch");
  if (depth.width() != cam.width || depth.height() != cam.height)
    throw ShapeError("unproject_masked: depth map and intrinsics disagree on image size");
  PointCloud cloud;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!mask(u, v) || !depth.valid(u, v)) continue;
      const double d = depth.depth(u, v);
      cloud.emplace_back((u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d);
    }
  }
  return cloud;
}

inline PixelDepth project(const Eigen::Vector3d& p, const CameraIntrinsics& cam) {
  if (!(p.z() > 0.0)) throw DomainError("project: point must lie in front of the camera (z > 0)");
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy, p.z()};
}

/// Pixels where both maps are valid and the membrane moved toward the
/// camera by more than threshold meters.
inline PixelMask contact_patch_mask(const DepthMap& current, const DepthMap& reference,
                                    double threshold) {
  if (!current.same_shape(reference)) throw ShapeError("contact_patch_mask: shape mismatch");
  PixelMask mask(current.width(), current.height());
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (current.valid(i) && reference.valid(i) &&
        reference.depth(i) - current.depth(i) > threshold)
      mask.bits[i] = 1;
  }
  return mask;
}

/// Uniform random subset without replacement; identity when the cloud
/// already has at most target_count points. Input order is preserved.
inline PointCloud downsample(const PointCloud& cloud, std::size_t target_count,
                             std::uint64_t seed) {
  if (target_count == 0) throw DomainError("downsample: target_count must be >= 1");
  if (cloud.size() <= target_count) return cloud;
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "downsample"));
  // Partial Fisher-Yates: the first target_count slots are the sample.
  for (std::size_t i = 0; i < target_count; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(target_count);
  std::sort(idx.begin(), idx.end());
  PointCloud out;
  out.reserve(target_count);
  for (auto i : idx) out.push_back(cloud[i]);
  return out;
}

}  // namespace tacdepth::geometry
