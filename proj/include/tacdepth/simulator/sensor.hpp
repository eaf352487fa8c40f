#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "tacdepth/core/image.hpp"
#include "tacdepth/core/json_reader.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/random.hpp"

namespace tacdepth::sim {

/// Inflated membrane at rest: the near cap of an ellipsoid centred on the
/// optical axis, apex closest to the camera.
struct MembraneGeometry {
  Eigen::Vector3d semi_axes{0.05, 0.05, 0.025};
  double apex_depth = 0.03;

  double center_depth() const { return apex_depth + semi_axes.z(); }
};

struct DotPattern {
  bool enabled = true;
  std::uint64_t seed = 17;
  int density = 400;    // dots per image
  double radius = 2.0;  // pixels
};

struct Dropout {
  double saturation_depth = 0.024;  // meters; closer returns may drop out
  double rate = 0.3;
  double depth_noise_sigma = 5e-5;  // meters
};

struct SensorConfig {
  std::string sensor_id = "left";
  CameraIntrinsics intrinsics{120.0, 120.0, 112.0, 112.0, 224, 224};
  std::array<double, 2> rest_depth_range{0.015, 0.06};
  MembraneGeometry membrane;
  DotPattern dot_pattern;
  double fov_circle_radius = 100.0;  // pixels, about the principal point
  Dropout dropout;
  double noise_sigma = 0.01;         // additive intensity noise
  int relaxation_iterations = 50;
  double ir_reference_depth = 0.02;  // frontal surface at this depth renders at 1.0

  void validate() const {
    intrinsics.validate();
    const auto [dmin, dmax] = rest_depth_range;
    if (!(dmin > 0.0 && dmin < dmax)) throw ConfigError("sensor: need 0 < d_min < d_max");
    if (!(membrane.semi_axes.minCoeff() > 0.0) || !(membrane.apex_depth > 0.0))
      throw ConfigError("sensor: membrane dimensions must be positive");
    if (dot_pattern.density < 0 || !(dot_pattern.radius >= 0.0))
      throw ConfigError("sensor: dot density and radius must be non-negative");
    if (!(dropout.rate >= 0.0 && dropout.rate <= 1.0))
      throw ConfigError("sensor: dropout rate must lie in [0,1]");
    if (!(dropout.depth_noise_sigma >= 0.0) || !(noise_sigma >= 0.0))
      throw ConfigError("sensor: noise levels must be non-negative");
    if (!(fov_circle_radius > 0.0)) throw ConfigError("sensor: fov_circle_radius must be positive");
    if (relaxation_iterations < 0) throw ConfigError("sensor: relaxation_iterations must be >= 0");
    if (!(ir_reference_depth > 0.0)) throw ConfigError("sensor: ir_reference_depth must be positive");
  }

  bool in_fov(int u, int v) const {
    const double du = u - intrinsics.cx, dv = v - intrinsics.cy;
    return du * du + dv * dv <= fov_circle_radius * fov_circle_radius;
  }

  /// Rescales pixel-denominated quantities to a square image of `size`
  /// pixels. Relaxation iterations scale with area so the elastic falloff
  /// keeps its metric extent.
  SensorConfig at_resolution(int size) const {
    if (size <= 0) throw ConfigError("sensor: image size must be positive");
    SensorConfig c = *this;
    const double s = static_cast<double>(size) / intrinsics.width;
    c.intrinsics.fx = intrinsics.fx * s;
    c.intrinsics.fy = intrinsics.fy * s;
    c.intrinsics.cx = std::floor(intrinsics.cx * s);
    c.intrinsics.cy = std::floor(intrinsics.cy * s);
    c.intrinsics.width = size;
    c.intrinsics.height = static_cast<int>(std::lround(intrinsics.height * s));
    c.fov_circle_radius = fov_circle_radius * s;
    c.dot_pattern.radius = std::max(0.5, dot_pattern.radius * s);
    c.relaxation_iterations =
        std::max(1, static_cast<int>(std::lround(relaxation_iterations * s * s)));
    return c;
  }

  /// The two cameras of the gripper: "right" differs from "left" by a
  /// small intrinsics perturbation and its own dot seed.
  SensorConfig for_sensor(const std::string& id) const {
    SensorConfig c = *this;
    c.sensor_id = id;
    if (id == "left") return c;
    if (id != "right") throw ConfigError("sensor: unknown sensor_id '" + id + "'");
    c.intrinsics.fx *= 1.015;
    c.intrinsics.fy *= 0.99;
    c.intrinsics.cx = std::min<double>(c.intrinsics.cx + 1.0, c.intrinsics.width - 1);
    c.dot_pattern.seed = derive_seed(dot_pattern.seed, "right-dots");
    return c;
  }
};

inline json to_json(const SensorConfig& c) {
  return json{
      {"sensor_id", c.sensor_id},
      {"intrinsics", camera_to_json(c.intrinsics)},
      {"rest_depth_range", {c.rest_depth_range[0], c.rest_depth_range[1]}},
      {"membrane",
       {{"semi_axes", {c.membrane.semi_axes.x(), c.membrane.semi_axes.y(), c.membrane.semi_axes.z()}},
        {"apex_depth", c.membrane.apex_depth}}},
      {"dot_pattern",
       {{"enabled", c.dot_pattern.enabled},
        {"seed", c.dot_pattern.seed},
        {"density", c.dot_pattern.density},
        {"radius", c.dot_pattern.radius}}},
      {"fov_circle_radius", c.fov_circle_radius},
      {"dropout",
       {{"saturation_depth", c.dropout.saturation_depth},
        {"rate", c.dropout.rate},
        {"depth_noise_sigma", c.dropout.depth_noise_sigma}}},
      {"noise_sigma", c.noise_sigma},
      {"relaxation_iterations", c.relaxation_iterations},
      {"ir_reference_depth", c.ir_reference_depth},
  };
}

/// Parses a (possibly partial) sensor block over `base`. Unknown keys are
/// rejected.
inline SensorConfig sensor_from_json(const json& j, SensorConfig base = {}) {
  JsonReader r(j, "sensor");
  SensorConfig c = std::move(base);
  c.sensor_id = r.get("sensor_id", c.sensor_id);
  if (const json* cam = r.child("intrinsics")) c.intrinsics = camera_from_json(*cam);
  c.rest_depth_range = r.get("rest_depth_range", c.rest_depth_range);
  if (const json* m = r.child("membrane")) {
    JsonReader mr(*m, "sensor.membrane");
    const auto axes = mr.get("semi_axes", std::array<double, 3>{c.membrane.semi_axes.x(),
                                                               c.membrane.semi_axes.y(),
                                                               c.membrane.semi_axes.z()});
    c.membrane.semi_axes = {axes[0], axes[1], axes[2]};
    c.membrane.apex_depth = mr.get("apex_depth", c.membrane.apex_depth);
    mr.finish();
  }
  if (const json* d = r.child("dot_pattern")) {
    JsonReader dr(*d, "sensor.dot_pattern");
    c.dot_pattern.enabled = dr.get("enabled", c.dot_pattern.enabled);
    c.dot_pattern.seed = dr.get("seed", c.dot_pattern.seed);
    c.dot_pattern.density = dr.get("density", c.dot_pattern.density);
    c.dot_pattern.radius = dr.get("radius", c.dot_pattern.radius);
    dr.finish();
  }
  c.fov_circle_radius = r.get("fov_circle_radius", c.fov_circle_radius);
  if (const json* d = r.child("dropout")) {
    JsonReader dr(*d, "sensor.dropout");
    c.dropout.saturation_depth = dr.get("saturation_depth", c.dropout.saturation_depth);
    c.dropout.rate = dr.get("rate", c.dropout.rate);
    c.dropout.depth_noise_sigma = dr.get("depth_noise_sigma", c.dropout.depth_noise_sigma);
    dr.finish();
  }
  c.noise_sigma = r.get("noise_sigma", c.noise_sigma);
  c.relaxation_iterations = r.get("relaxation_iterations", c.relaxation_iterations);
  c.ir_reference_depth = r.get("ir_reference_depth", c.ir_reference_depth);
  r.finish();
  c.validate();
  return c;
}

}  // namespace tacdepth::sim
