#pragma once

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/core/io.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/random.hpp"
#include "tacdepth/simulator/membrane.hpp"
#include "tacdepth/simulator/render.hpp"
#include "tacdepth/simulator/sensor.hpp"
#include "tacdepth/simulator/shape.hpp"

namespace tacdepth::sim {

/// Object classes and their default per-class image counts (both cameras).
struct ClassInfo {
  const char* name;
  int default_count;
};

inline constexpr std::array<ClassInfo, 5> kClasses{{
    {"wine_glass", 5820},
    {"box", 6038},
    {"fingers", 4752},
    {"mug", 1600},
    {"no_contact", 3750},
}};

inline constexpr std::array<const char*, 4> kObjectClasses{"wine_glass", "box", "fingers", "mug"};
inline constexpr std::array<const char*, 2> kSensorIds{"left", "right"};

inline bool is_known_class(const std::string& c) {
  return std::any_of(kClasses.begin(), kClasses.end(), [&](const ClassInfo& k) { return c == k.name; });
}

/// Images per class after scaling, never fewer than 8.
inline int scaled_count(int default_count, double scale) {
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
  return std::max(8, static_cast<int>(std::lround(default_count * scale)));
}

/// Generation controls shared by every class.
struct PlacementRanges {
  double penetration_min = 0.0;    // meters
  double penetration_max = 0.010;  // meters
  double lateral_fraction = 0.35;  // of the visible membrane footprint radius
};

struct Sample {
  GrayImage image;
  DepthMap depth;        // degraded (dropout + noise), the training target
  DepthMap clean_depth;  // noiseless, no dropout
  PixelMask contact;     // pixels pinned to the object surface
  SampleMeta meta;
  std::vector<ShapePrimitive> primitives;
};

namespace detail {

inline Eigen::Quaterniond axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()));
}

/// Small tilt about a random in-plane axis.
inline Eigen::Quaterniond random_tilt(Rng& rng, double max_angle) {
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return axis_angle({std::cos(phi), std::sin(phi), 0.0}, rng.uniform(-max_angle, max_angle));
}

struct Part {
  ShapeDims shape;
  Pose local;  // part -> object frame
};

/// Object parts in the object frame plus its orientation in the sensor frame.
struct ObjectDraw {
  std::vector<Part> parts;
  Eigen::Quaterniond orientation;
};

inline ObjectDraw draw_object(const std::string& cls, Rng& rng) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
  ObjectDraw o;
  if (cls == "wine_glass") {
    // Bowl pressed into the membrane; the stem trails off to the side.
    const double r = rng.uniform(0.025, 0.035);
    const double stem = 0.03;
    o.parts.push_back({ShapeDims::sphere(r), Pose::identity()});
    o.parts.push_back({ShapeDims::capsule(0.0035, stem),
                       Pose({0.0, -(r + stem), 0.0}, axis_angle(Eigen::Vector3d::UnitX(), std::numbers::pi / 2))});
    o.orientation = axis_angle(z, rng.uniform(0.0, 2.0 * std::numbers::pi)) * random_tilt(rng, 15 * kDeg);
  } else if (cls == "box") {
    const double hx = rng.uniform(0.012, 0.020), hy = rng.uniform(0.008, 0.015);
    o.parts.push_back({ShapeDims::box(hx, hy, 0.02), Pose::identity()});
    o.orientation = axis_angle(z, rng.uniform(0.0, std::numbers::pi)) * random_tilt(rng, 5 * kDeg);
  } else if (cls == "fingers") {
    const double r = rng.uniform(0.007, 0.009);
    const double gap = rng.uniform(0.018, 0.022);
    const Eigen::Quaterniond along_y = axis_angle(Eigen::Vector3d::UnitX(), std::numbers::pi / 2);
    o.parts.push_back({ShapeDims::capsule(r, 0.025), Pose({-gap / 2, 0.0, 0.0}, along_y)});
    o.parts.push_back({ShapeDims::capsule(r, 0.025), Pose({gap / 2, 0.0, 0.0}, along_y)});
    o.orientation = axis_angle(z, rng.uniform(0.0, 2.0 * std::numbers::pi)) * random_tilt(rng, 10 * kDeg);
  } else if (cls == "mug") {
    // Upright mug grasped from the side: cylinder axis across the image.
    const double r = rng.uniform(0.035, 0.045);
    o.parts.push_back({ShapeDims::cylinder(r, 0.05), Pose::identity()});
    o.orientation = axis_angle(z, rng.uniform(-10 * kDeg, 10 * kDeg)) * random_tilt(rng, 5 * kDeg) *
                    axis_angle(Eigen::Vector3d::UnitX(), std::numbers::pi / 2);
  } else if (cls == "no_contact") {
    o.parts.push_back({ShapeDims::sphere(0.02), Pose::identity()});
    o.orientation = Eigen::Quaterniond::Identity();
  } else {
    throw ConfigError("unknown object class '" + cls + "'");
  }
  return o;
}

inline std::vector<ShapePrimitive> place(const ObjectDraw& o, const Pose& object_pose) {
  std::vector<ShapePrimitive> out;
  for (const auto& part : o.parts) out.push_back({part.shape, object_pose * part.local});
  return out;
}

}  // namespace detail

/// Draws an object pose for `object_class` and returns the placed primitives.
///
/// Distribution: class-specific orientation (random spin about the optical
/// axis and a small tilt; mugs keep their axis across the image), lateral
/// offset uniform over a disc of lateral_fraction times the visible
/// membrane footprint, and penetration uniform in
/// [penetration_min, penetration_max] measured from the rest membrane at
/// the lateral offset to the object's closest point. no_contact objects are
/// placed 0.1 m beyond the membrane.
inline std::pair<Pose, std::vector<ShapePrimitive>> draw_placement(const std::string& object_class,
                                                                   const SensorConfig& config,
                                                                   const PlacementRanges& ranges,
                                                                   Rng& rng) {
  detail::ObjectDraw obj = detail::draw_object(object_class, rng);
  const auto& m = config.membrane;
  const double footprint =
      config.fov_circle_radius / std::max(config.intrinsics.fx, config.intrinsics.fy) * m.apex_depth;
  const double rad = ranges.lateral_fraction * footprint * std::sqrt(rng.uniform());
  const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ox = rad * std::cos(ang), oy = rad * std::sin(ang);
  const double pen = rng.uniform(ranges.penetration_min, ranges.penetration_max);

  const double ex = ox / m.semi_axes.x(), ey = oy / m.semi_axes.y();
  const double membrane_z = m.center_depth() - m.semi_axes.z() * std::sqrt(std::max(0.0, 1.0 - ex * ex - ey * ey));

  Pose pose({ox, oy, 0.0}, obj.orientation);
  double front = 1e9;
  for (const auto& p : detail::place(obj, pose)) front = std::min(front, min_depth(p));
  const double target_front = object_class == "no_contact" ? membrane_z + 0.1 : membrane_z - pen;
  pose.translation.z() = target_front - front;
  return {pose, detail::place(obj, pose)};
}

inline std::string sample_id(const std::string& object_class, const std::string& sensor_id,
                             int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return object_class + "_" + sensor_id + "_" + buf;
}

/// One sample; a pure function of (config, class, index, seed).
inline Sample generate_sample(const SensorConfig& config, const std::string& object_class,
                              int index, std::uint64_t seed, const DepthMap& rest,
                              const PlacementRanges& ranges = {}) {
  const std::uint64_t sample_seed =
      derive_seed(seed, "sample:" + object_class + ":" + config.sensor_id, static_cast<std::uint64_t>(index));
  Rng rng(derive_seed(sample_seed, "placement"));
  auto [pose, prims] = draw_placement(object_class, config, ranges, rng);
  Sample s;
  auto ind = indent_with_contact(rest, prims, config);
  s.clean_depth = std::move(ind.depth);
  s.contact = std::move(ind.contact);
  s.image = render_ir(s.clean_depth, config, derive_seed(sample_seed, "render"));
  s.depth = degrade_depth(s.clean_depth, config, derive_seed(sample_seed, "degrade"));
  s.meta.sample_id = sample_id(object_class, config.sensor_id, index);
  s.meta.camera = config.intrinsics;
  s.meta.object_class = object_class;
  s.meta.object_pose = pose.to_vector();
  s.meta.sensor_id = config.sensor_id;
  s.meta.seed = sample_seed;
  s.primitives = std::move(prims);
  return s;
}

inline std::vector<Sample> generate_dataset(const SensorConfig& config,
                                            const std::string& object_class, int count,
                                            std::uint64_t seed, const PlacementRanges& ranges = {},
                                            int first_index = 0) {
  if (count < 1) throw DomainError("generate_dataset: count must be >= 1");
  if (!is_known_class(object_class)) throw ConfigError("unknown object class '" + object_class + "'");
  const DepthMap rest = rest_surface(config);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(generate_sample(config, object_class, first_index + i, seed, rest, ranges));
  return out;
}

// ------------------------------------------------------------ on disk
//
// <root>/<class>/<sensor_id>/<sample_id>.{pgm,pfm,clean.pfm,json}
// <root>/reference/<sensor_id>.rest.pfm   no-contact reference depth
// <root>/manifest.json

struct SampleFiles {
  std::filesystem::path image, depth, clean_depth, meta;
};

inline SampleFiles sample_files(const std::filesystem::path& root, const std::string& object_class,
                                const std::string& sensor_id, const std::string& id) {
  const auto dir = root / object_class / sensor_id;
  return {dir / (id + ".pgm"), dir / (id + ".pfm"), dir / (id + ".clean.pfm"), dir / (id + ".json")};
}

inline json primitive_to_json(const ShapePrimitive& p) {
  json dims = json::array();
  for (int i = 0; i < p.shape.dim_count(); ++i) dims.push_back(p.shape.dims[static_cast<std::size_t>(i)]);
  json pose = json::array();
  for (double x : p.pose.to_vector()) pose.push_back(x);
  return json{{"kind", to_string(p.shape.kind)}, {"dims", dims}, {"pose", pose}};
}

inline ShapePrimitive primitive_from_json(const json& j) {
  try {
    ShapePrimitive p;
    p.shape.kind = shape_kind_from_string(j.at("kind").get<std::string>());
    const auto& dims = j.at("dims");
    if (!dims.is_array() || static_cast<int>(dims.size()) != p.shape.dim_count())
      throw ConfigError("primitive: wrong number of dimensions");
    for (std::size_t i = 0; i < dims.size(); ++i) p.shape.dims[i] = dims[i].get<double>();
    p.shape.validate();
    const auto& pose = j.at("pose");
    if (!pose.is_array() || pose.size() != 7) throw ConfigError("primitive: pose must have 7 entries");
    std::array<double, 7> v{};
    for (std::size_t i = 0; i < 7; ++i) v[i] = pose[i].get<double>();
    p.pose = Pose::from_vector(v);
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("primitive: ") + e.what());
  }
}

inline void write_sample(const Sample& s, const std::filesystem::path& root) {
  const auto f = sample_files(root, s.meta.object_class, s.meta.sensor_id, s.meta.sample_id);
  std::filesystem::create_directories(f.image.parent_path());
  io::write_pgm(s.image, f.image, 65535);
  io::write_pfm(s.depth, f.depth);
  io::write_pfm(s.clean_depth, f.clean_depth);
  json meta = to_json(s.meta);
  json prims = json::array();
  for (const auto& p : s.primitives) prims.push_back(primitive_to_json(p));
  meta["primitives"] = prims;
  write_json(meta, f.meta);
}

/// Sample as read back from disk (no contact set).
struct StoredSample {
  GrayImage image;
  DepthMap depth;
  DepthMap clean_depth;
  SampleMeta meta;
  std::vector<ShapePrimitive> primitives;  // sensor frame
};

struct DatasetEntry {
  std::string object_class;
  std::string sensor_id;
  std::string sample_id;
};

/// Manifest view of a generated dataset.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root) {
    Dataset d;
    d.root_ = root;
    d.manifest_ = read_json(root / "manifest.json");
    try {
      for (const auto& e : d.manifest_.at("samples")) {
        d.entries_.push_back({e.at("object_class").get<std::string>(),
                              e.at("sensor_id").get<std::string>(),
                              e.at("sample_id").get<std::string>()});
      }
      d.sensor_ = sensor_from_json(d.manifest_.at("sensor"));
    } catch (const json::exception& e) {
      throw ConfigError(root.string() + "/manifest.json: " + e.what());
    }
    return d;
  }

  const std::filesystem::path& root() const { return root_; }
  const json& manifest() const { return manifest_; }
  const std::vector<DatasetEntry>& entries() const { return entries_; }
  /// Base ("left") sensor configuration the dataset was rendered with.
  const SensorConfig& sensor() const { return sensor_; }

  StoredSample load(const DatasetEntry& e) const {
    const auto f = sample_files(root_, e.object_class, e.sensor_id, e.sample_id);
    const json meta = read_json(f.meta);
    StoredSample s{io::read_pgm(f.image), io::read_pfm(f.depth), io::read_pfm(f.clean_depth),
                   meta_from_json(meta), {}};
    if (meta.contains("primitives"))
      for (const auto& p : meta.at("primitives")) s.primitives.push_back(primitive_from_json(p));
    return s;
  }

  DepthMap reference(const std::string& sensor_id) const {
    return io::read_pfm(root_ / "reference" / (sensor_id + ".rest.pfm"));
  }

 private:
  std::filesystem::path root_;
  json manifest_;
  std::vector<DatasetEntry> entries_;
  SensorConfig sensor_;
};

struct GenerationPlan {
  SensorConfig sensor;                // base ("left") configuration
  std::map<std::string, int> counts;  // per class, both cameras together
  std::uint64_t seed = 0;
  double scale = 1.0;
  PlacementRanges ranges;
};

/// Writes every class for both cameras plus references and manifest.
/// Each class's images are split between the cameras, left first.
inline void write_dataset(const GenerationPlan& plan, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "reference");
  json samples = json::array();
  json classes = json::object();
  json references = json::object();
  for (const char* sid : kSensorIds) {
    const SensorConfig cfg = plan.sensor.for_sensor(sid);
    io::write_pfm(rest_surface(cfg), root / "reference" / (std::string(sid) + ".rest.pfm"));
    references[sid] = "reference/" + std::string(sid) + ".rest.pfm";
  }
  for (const auto& info : kClasses) {
    const auto it = plan.counts.find(info.name);
    if (it == plan.counts.end()) continue;
    const int total = it->second;
    const int left = (total + 1) / 2;
    json per_sensor = json::object();
    for (const char* sid : kSensorIds) {
      const int n = std::string(sid) == "left" ? left : total - left;
      per_sensor[sid] = n;
      if (n == 0) continue;
      const SensorConfig cfg = plan.sensor.for_sensor(sid);
      const DepthMap rest = rest_surface(cfg);
      for (int i = 0; i < n; ++i) {
        Sample s = generate_sample(cfg, info.name, i, plan.seed, rest, plan.ranges);
        write_sample(s, root);
        samples.push_back({{"object_class", info.name}, {"sensor_id", sid}, {"sample_id", s.meta.sample_id}});
      }
    }
    classes[info.name] = per_sensor;
  }
  json manifest{
      {"format", "tacdepth-dataset-1"},
      {"seed", plan.seed},
      {"scale", plan.scale},
      {"sensor", to_json(plan.sensor)},
      {"placement",
       {{"penetration_min", plan.ranges.penetration_min},
        {"penetration_max", plan.ranges.penetration_max},
        {"lateral_fraction", plan.ranges.lateral_fraction}}},
      {"classes", classes},
      {"references", references},
      {"samples", samples},
  };
  write_json(manifest, root / "manifest.json");
}

}  // namespace tacdepth::sim
