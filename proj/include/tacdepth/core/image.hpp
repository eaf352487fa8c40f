#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tacdepth/error.hpp"

namespace tacdepth {

/// Pinhole intrinsics, pixel units. Pixel (u, v) indexes column u, row v
/// with the origin at the top-left pixel.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw DomainError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw DomainError("intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw DomainError("intrinsics: principal point outside the image");
  }

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Grayscale image with intensities in [0, 1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}
  GrayImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(checked_area(width, height)))
      throw ShapeError("GrayImage: data length does not match width*height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  double& at(int u, int v) { return data_[index(u, v)]; }
  double at(int u, int v) const { return data_[index(u, v)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// True when every value is finite and within [0, 1].
  bool in_range() const {
    for (double x : data_)
      if (!std::isfinite(x) || x < 0.0 || x > 1.0) return false;
    return true;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static long checked_area(int w, int h) {
    if (w < 0 || h < 0) throw ShapeError("negative image dimensions");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Depth in meters along the optical axis plus a validity mask.
/// Depth values at invalid pixels carry no meaning.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height)
      : width_(width), height_(height),
        depth_(static_cast<std::size_t>(width) * height, 0.0),
        valid_(static_cast<std::size_t>(width) * height, 0) {}
  DepthMap(int width, int height, std::vector<double> depth, std::vector<std::uint8_t> valid)
      : width_(width), height_(height), depth_(std::move(depth)), valid_(std::move(valid)) {
    const auto n = static_cast<std::size_t>(width) * height;
    if (depth_.size() != n || valid_.size() != n)
      throw ShapeError("DepthMap: buffers do not match width*height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return depth_.size(); }

  double depth(int u, int v) const { return depth_[index(u, v)]; }
  bool valid(int u, int v) const { return valid_[index(u, v)] != 0; }
  double depth(std::size_t i) const { return depth_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }

  void set(int u, int v, double d) { set(index(u, v), d); }
  void set(std::size_t i, double d) {
    depth_[i] = d;
    valid_[i] = 1;
  }
  void invalidate(int u, int v) { invalidate(index(u, v)); }
  void invalidate(std::size_t i) {
    depth_[i] = 0.0;
    valid_[i] = 0;
  }

  const std::vector<double>& depth_data() const { return depth_; }
  const std::vector<std::uint8_t>& valid_data() const { return valid_; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_) n += v != 0;
    return n;
  }

  /// Valid pixels hold positive finite depth.
  bool well_formed() const {
    for (std::size_t i = 0; i < depth_.size(); ++i)
      if (valid_[i] && (!std::isfinite(depth_[i]) || depth_[i] <= 0.0)) return false;
    return true;
  }

  bool same_shape(const DepthMap& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> depth_;
  std::vector<std::uint8_t> valid_;
};

/// Boolean per-pixel mask, row-major.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  PixelMask() = default;
  PixelMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool operator()(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  bool empty() const { return count() == 0; }
};

/// Points in the camera frame, meters.
using PointCloud = std::vector<Eigen::Vector3d>;

}  // namespace tacdepth
