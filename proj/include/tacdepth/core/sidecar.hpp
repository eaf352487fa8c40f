#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tacdepth/core/image.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth {

using json = nlohmann::ordered_json;

/// Per-sample metadata stored next to each image/depth pair.
struct SampleMeta {
  std::string sample_id;
  CameraIntrinsics camera;
  std::string object_class;
  std::array<double, 7> object_pose{0, 0, 0, 1, 0, 0, 0};  // tx ty tz qw qx qy qz
  std::string sensor_id;
  std::uint64_t seed = 0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

inline json camera_to_json(const CameraIntrinsics& c) {
  return json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},
              {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics camera_from_json(const json& j) {
  CameraIntrinsics c;
  try {
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("camera: ") + e.what());
  }
  c.validate();
  return c;
}

inline json to_json(const SampleMeta& m) {
  json pose = json::array();
  for (double x : m.object_pose) pose.push_back(x);
  return json{{"sample_id", m.sample_id},   {"camera", camera_to_json(m.camera)},
              {"object_class", m.object_class}, {"object_pose", pose},
              {"sensor_id", m.sensor_id},   {"seed", m.seed}};
}

inline SampleMeta meta_from_json(const json& j) {
  SampleMeta m;
  try {
    m.sample_id = j.at("sample_id").get<std::string>();
    m.camera = camera_from_json(j.at("camera"));
    m.object_class = j.at("object_class").get<std::string>();
    const auto& pose = j.at("object_pose");
    if (!pose.is_array() || pose.size() != 7) throw ConfigError("object_pose must have 7 entries");
    for (std::size_t i = 0; i < 7; ++i) m.object_pose[i] = pose[i].get<double>();
    m.sensor_id = j.at("sensor_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sidecar: ") + e.what());
  }
  return m;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(FormatIssue::kOpenFailed, path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(FormatIssue::kOpenFailed, path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError(FormatIssue::kOpenFailed, path.string());
}

}  // namespace tacdepth
