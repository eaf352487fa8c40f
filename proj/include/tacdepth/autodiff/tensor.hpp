#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tacdepth/error.hpp"

namespace tacdepth::ad {

/// (batch, channels, height, width). Lower-rank data uses leading 1s; a
/// scalar is {1, 1, 1, 1}.
using Shape = std::array<int, 4>;

inline std::string to_string(const Shape& s) {
  return "[" + std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) +
         "x" + std::to_string(s[3]) + "]";
}

inline std::size_t element_count(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/// Element storage aligned for the widest SIMD packet, so vectorised
/// reductions split their work the same way wherever a buffer lands.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major NCHW tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(const Shape& shape, double fill = 0.0)
      : shape_(shape), data_(element_count(shape), fill) {}
  Tensor(const Shape& shape, const std::vector<double>& data) : shape_(shape), data_(data.begin(), data.end()) {
    if (data_.size() != element_count(shape_))
      throw ShapeError("Tensor: data length does not match shape " + to_string(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }
  std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }
  double& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{0, 0, 0, 0};
  Storage data_;
};

}  // namespace tacdepth::ad
