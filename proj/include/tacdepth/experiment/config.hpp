#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tacdepth/core/json_reader.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/depthnet/network.hpp"
#include "tacdepth/depthnet/train.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/pose/benchmark.hpp"
#include "tacdepth/simulator/dataset.hpp"
#include "tacdepth/simulator/sensor.hpp"

namespace tacdepth::experiment {

enum class Protocol { kInClass, kLeaveOneOut, kCrossCamera };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::kInClass: return "in_class";
    case Protocol::kLeaveOneOut: return "leave_one_out";
    case Protocol::kCrossCamera: return "cross_camera";
  }
  return "unknown";
}

inline Protocol protocol_from_string(const std::string& s) {
  if (s == "in_class") return Protocol::kInClass;
  if (s == "leave_one_out") return Protocol::kLeaveOneOut;
  if (s == "cross_camera") return Protocol::kCrossCamera;
  throw ConfigError("protocol must be one of in_class, leave_one_out, cross_camera (got '" + s + "')");
}

struct PoseSettings {
  std::string object_class = "mug";
  std::string primitive = "cylinder";
  int count = 91;
  double contact_threshold = 0.001;
  int max_points = 1500;
  int min_points = 50;
  double init_translation = 0.005;
  double init_rotation_deg = 5.0;
  bool multi_cloud = false;
};

/// One JSON document drives every subcommand. Unknown keys are rejected at
/// every level.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  double scale = 1.0;
  int image_size = 224;
  sim::SensorConfig sensor;  // base configuration, before image_size is applied
  sim::PlacementRanges placement;
  std::vector<std::string> classes;          // empty means every class
  std::map<std::string, int> class_counts;   // overrides of the scaled defaults
  net::NetworkSpec network;
  net::TrainConfig train;
  std::string dataset;  // dataset root
  Protocol protocol = Protocol::kInClass;
  double train_fraction = 0.7;
  bool literal_rmse = false;
  PoseSettings pose;

  /// Sensor at the configured image size.
  sim::SensorConfig resolved_sensor() const {
    return image_size == sensor.intrinsics.width ? sensor : sensor.at_resolution(image_size);
  }

  std::vector<std::string> generated_classes() const {
    if (!classes.empty()) return classes;
    std::vector<std::string> all;
    for (const auto& c : sim::kClasses) all.emplace_back(c.name);
    return all;
  }

  sim::GenerationPlan generation_plan() const {
    sim::GenerationPlan plan;
    plan.sensor = resolved_sensor();
    plan.seed = seed;
    plan.scale = scale;
    plan.ranges = placement;
    for (const auto& c : generated_classes()) {
      int def = 0;
      for (const auto& info : sim::kClasses)
        if (c == info.name) def = info.default_count;
      const auto it = class_counts.find(c);
      plan.counts[c] = it != class_counts.end() ? it->second : sim::scaled_count(def, scale);
    }
    return plan;
  }

  pose::BenchmarkOptions benchmark_options() const {
    pose::BenchmarkOptions o;
    o.object_class = pose.object_class;
    o.field_kind = shape_kind_from_string(pose.primitive);
    o.count = pose.count;
    o.seed = derive_seed(seed, "pose");
    o.cloud.contact_threshold = pose.contact_threshold;
    o.cloud.max_points = static_cast<std::size_t>(pose.max_points);
    o.cloud.min_points = static_cast<std::size_t>(pose.min_points);
    o.init.translation = pose.init_translation;
    o.init.rotation = pose.init_rotation_deg * std::numbers::pi / 180.0;
    return o;
  }

  void validate() const {
    if (!(scale > 0.0)) throw ConfigError("scale must be positive");
    if (image_size < 1) throw ConfigError("image_size must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split.train_fraction must lie in (0,1)");
    for (const auto& c : classes)
      if (!sim::is_known_class(c)) throw ConfigError("unknown class '" + c + "'");
    for (const auto& [c, n] : class_counts) {
      if (!sim::is_known_class(c)) throw ConfigError("class_counts: unknown class '" + c + "'");
      if (n < 1) throw ConfigError("class_counts: counts must be positive");
    }
    if (!(placement.penetration_min >= 0.0 && placement.penetration_min <= placement.penetration_max))
      throw ConfigError("placement: need 0 <= penetration_min <= penetration_max");
    if (!(placement.lateral_fraction >= 0.0)) throw ConfigError("placement: lateral_fraction must be >= 0");
    if (pose.count < 1 || pose.max_points < 1 || pose.min_points < 1)
      throw ConfigError("pose: count, max_points and min_points must be positive");
    if (!(pose.contact_threshold >= 0.0)) throw ConfigError("pose: contact_threshold must be >= 0");
    try {
      (void)shape_kind_from_string(pose.primitive);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("pose: ") + e.what());
    }
    if (!sim::is_known_class(pose.object_class)) throw ConfigError("pose: unknown object_class");
    network.validate();
    train.validate();
    resolved_sensor().validate();
  }
};

inline json to_json(const ExperimentConfig& c) {
  json train = net::to_json(c.train);
  train.erase("seed");
  json counts = json::object();
  for (const auto& [k, v] : c.class_counts) counts[k] = v;
  return json{
      {"seed", c.seed},
      {"scale", c.scale},
      {"image_size", c.image_size},
      {"sensor", sim::to_json(c.sensor)},
      {"placement",
       {{"penetration_min", c.placement.penetration_min},
        {"penetration_max", c.placement.penetration_max},
        {"lateral_fraction", c.placement.lateral_fraction}}},
      {"classes", c.classes},
      {"class_counts", counts},
      {"network", net::to_json(c.network)},
      {"train", train},
      {"dataset", c.dataset},
      {"protocol", to_string(c.protocol)},
      {"split", {{"train_fraction", c.train_fraction}}},
      {"metrics", {{"literal_rmse", c.literal_rmse}}},
      {"pose",
       {{"object_class", c.pose.object_class},
        {"primitive", c.pose.primitive},
        {"count", c.pose.count},
        {"contact_threshold", c.pose.contact_threshold},
        {"max_points", c.pose.max_points},
        {"min_points", c.pose.min_points},
        {"init_translation", c.pose.init_translation},
        {"init_rotation_deg", c.pose.init_rotation_deg},
        {"multi_cloud", c.pose.multi_cloud}}},
  };
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  JsonReader r(j, "config");
  c.seed = r.get("seed", c.seed);
  c.scale = r.get("scale", c.scale);
  c.image_size = r.get("image_size", c.image_size);
  if (const json* s = r.child("sensor")) c.sensor = sim::sensor_from_json(*s);
  if (const json* p = r.child("placement")) {
    JsonReader pr(*p, "config.placement");
    c.placement.penetration_min = pr.get("penetration_min", c.placement.penetration_min);
    c.placement.penetration_max = pr.get("penetration_max", c.placement.penetration_max);
    c.placement.lateral_fraction = pr.get("lateral_fraction", c.placement.lateral_fraction);
    pr.finish();
  }
  c.classes = r.get("classes", c.classes);
  c.class_counts = r.get("class_counts", c.class_counts);
  if (const json* n = r.child("network")) c.network = net::network_from_json(*n);
  if (const json* t = r.child("train")) {
    if (t->is_object() && t->contains("seed"))
      throw ConfigError("config.train.seed: training seeds derive from the top-level seed");
    c.train = net::train_config_from_json(*t);
  }
  c.dataset = r.get("dataset", c.dataset);
  c.protocol = protocol_from_string(r.get<std::string>("protocol", to_string(c.protocol)));
  if (const json* s = r.child("split")) {
    JsonReader sr(*s, "config.split");
    c.train_fraction = sr.get("train_fraction", c.train_fraction);
    sr.finish();
  }
  if (const json* m = r.child("metrics")) {
    JsonReader mr(*m, "config.metrics");
    c.literal_rmse = mr.get("literal_rmse", c.literal_rmse);
    mr.finish();
  }
  if (const json* p = r.child("pose")) {
    JsonReader pr(*p, "config.pose");
    c.pose.object_class = pr.get("object_class", c.pose.object_class);
    c.pose.primitive = pr.get("primitive", c.pose.primitive);
    c.pose.count = pr.get("count", c.pose.count);
    c.pose.contact_threshold = pr.get("contact_threshold", c.pose.contact_threshold);
    c.pose.max_points = pr.get("max_points", c.pose.max_points);
    c.pose.min_points = pr.get("min_points", c.pose.min_points);
    c.pose.init_translation = pr.get("init_translation", c.pose.init_translation);
    c.pose.init_rotation_deg = pr.get("init_rotation_deg", c.pose.init_rotation_deg);
    c.pose.multi_cloud = pr.get("multi_cloud", c.pose.multi_cloud);
    pr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

}  // namespace tacdepth::experiment
