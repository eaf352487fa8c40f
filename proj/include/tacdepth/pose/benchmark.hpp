#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/geometry/camera.hpp"
#include "tacdepth/pose/estimate.hpp"
#include "tacdepth/random.hpp"
#include "tacdepth/simulator/dataset.hpp"

namespace tacdepth::pose {

struct Summary {
  double median = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // population
};

inline Summary summarize(std::vector<double> v) {
  if (v.empty()) throw DomainError("summarize: no values");
  Summary s;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(n);
  for (double x : v) s.variance += (x - s.mean) * (x - s.mean);
  s.variance /= static_cast<double>(n);
  return s;
}

/// Fixed-edge histogram; the last bin collects everything >= the top edge.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  static Histogram uniform(double hi, int bins) {
    Histogram h;
    for (int i = 0; i <= bins; ++i) h.edges.push_back(hi * i / bins);
    h.counts.assign(static_cast<std::size_t>(bins) + 1, 0);
    return h;
  }

  void add(double x) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    std::size_t k = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    counts[std::min(k, counts.size() - 1)]++;
  }

  std::string csv(const std::string& quantity) const {
    std::ostringstream os;
    os.precision(10);
    os << "# " << quantity << " histogram, fixed bin edges\n";
    os << "bin_low,bin_high,count\n";
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) os << edges[k] << ',' << edges[k + 1] << ',' << counts[k] << '\n';
    os << edges.back() << ",inf," << counts.back() << '\n';
    return os.str();
  }
};

struct InitPerturbation {
  double translation = 0.005;                      // meters, per axis
  double rotation = 5.0 * std::numbers::pi / 180;  // radians
};

/// True pose perturbed by a uniform per-axis translation offset and a
/// rotation of uniform angle about a uniformly random axis.
inline Pose perturb(const Pose& truth, const InitPerturbation& p, Rng& rng) {
  Eigen::Vector3d dt(rng.uniform(-p.translation, p.translation), rng.uniform(-p.translation, p.translation),
                     rng.uniform(-p.translation, p.translation));
  Eigen::Vector3d axis;
  do {
    axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (axis.norm() < 1e-12);
  const double angle = rng.uniform(-p.rotation, p.rotation);
  return Pose(truth.translation + dt, Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())) * truth.rotation)
      .normalized();
}

struct CloudOptions {
  double contact_threshold = 0.001;  // meters
  std::size_t max_points = 1500;
  std::size_t min_points = 50;
};

/// Contact cloud: unprojected pixels whose depth is more than the threshold
/// in front of the reference, randomly downsampled.
inline PointCloud contact_cloud(const DepthMap& depth, const DepthMap& reference, const CameraIntrinsics& cam,
                                const CloudOptions& opt, std::uint64_t seed) {
  const PixelMask mask = geometry::contact_patch_mask(depth, reference, opt.contact_threshold);
  return geometry::downsample(geometry::unproject_masked(depth, cam, mask), opt.max_points, seed);
}

struct BenchmarkOptions {
  std::string object_class = "mug";
  ShapeKind field_kind = ShapeKind::kCylinder;
  int count = 91;
  std::uint64_t seed = 0;
  CloudOptions cloud;
  InitPerturbation init;
  LmOptions lm;
};

struct BenchmarkSample {
  std::string sample_id;
  PoseError error;
  std::size_t clean_points = 0, predicted_points = 0;
  int clean_iterations = 0, predicted_iterations = 0;
};

struct BenchmarkResult {
  std::vector<BenchmarkSample> samples;
  std::vector<std::string> skipped;  // too few contact points
  Summary e_x, e_theta;
};

using DepthPredictor = std::function<DepthMap(const sim::StoredSample&)>;

/// For each sample of the class, estimates the pose once from the clean
/// depth and once from the predicted depth, starting both from the same
/// perturbed initial pose, and compares the two estimates.
inline BenchmarkResult pose_benchmark(const sim::Dataset& dataset, const DepthPredictor& predict,
                                      const BenchmarkOptions& opt) {
  if (opt.count < 1) throw ConfigError("pose benchmark: count must be >= 1");
  BenchmarkResult out;
  bool any_class = false;
  for (const auto& entry : dataset.entries()) {
    if (static_cast<int>(out.samples.size()) >= opt.count) break;
    if (entry.object_class != opt.object_class) continue;
    any_class = true;
    const sim::StoredSample s = dataset.load(entry);
    if (s.primitives.size() != 1 || s.primitives[0].shape.kind != opt.field_kind)
      throw DomainError("pose benchmark: sample " + entry.sample_id + " is not a single " +
                        to_string(opt.field_kind));
    const ProximityField field(s.primitives[0].shape);
    const Pose truth = s.primitives[0].pose;
    const DepthMap reference = dataset.reference(entry.sensor_id);
    const std::uint64_t seed = derive_seed(opt.seed, "pose:" + entry.sample_id);
    const PointCloud clean = contact_cloud(s.clean_depth, reference, s.meta.camera, opt.cloud, derive_seed(seed, "clean"));
    const PointCloud pred = contact_cloud(predict(s), reference, s.meta.camera, opt.cloud, derive_seed(seed, "pred"));
    if (clean.size() < opt.cloud.min_points || pred.size() < opt.cloud.min_points) {
      out.skipped.push_back(entry.sample_id);
      continue;
    }
    Rng rng(derive_seed(seed, "init"));
    const Pose init = perturb(truth, opt.init, rng);
    const PoseEstimate a = estimate_pose(field, clean, init, opt.lm);
    const PoseEstimate b = estimate_pose(field, pred, init, opt.lm);
    out.samples.push_back({entry.sample_id, pose_errors(a.pose, b.pose), clean.size(), pred.size(), a.iterations,
                           b.iterations});
  }
  if (!any_class) throw DomainError("pose benchmark: dataset has no '" + opt.object_class + "' samples");
  if (out.samples.empty()) throw DomainError("pose benchmark: no sample had enough contact points");
  std::vector<double> ex, et;
  for (const auto& s : out.samples) {
    ex.push_back(s.error.e_x);
    et.push_back(s.error.e_theta);
  }
  out.e_x = summarize(ex);
  out.e_theta = summarize(et);
  return out;
}

inline json to_json(const Summary& s) {
  return json{{"median", s.median}, {"mean", s.mean}, {"variance", s.variance}};
}

inline json to_json(const BenchmarkResult& r, const BenchmarkOptions& opt) {
  json samples = json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"sample_id", s.sample_id},
                       {"e_x", s.error.e_x},
                       {"e_theta", s.error.e_theta},
                       {"clean_points", s.clean_points},
                       {"predicted_points", s.predicted_points},
                       {"clean_iterations", s.clean_iterations},
                       {"predicted_iterations", s.predicted_iterations}});
  return json{{"object_class", opt.object_class},
              {"field", to_string(opt.field_kind)},
              {"n_samples", r.samples.size()},
              {"e_x", to_json(r.e_x)},
              {"e_theta", to_json(r.e_theta)},
              {"units", {{"e_x", "m"}, {"e_theta", "1 - |q1.q2|"}}},
              {"published_reference",
               {{"note", "real-sensor values for side-by-side context only"},
                {"e_x_cm", {{"median", 0.16}, {"mean", 0.19}, {"variance", 1.14e-4}}},
                {"e_theta", {{"median", 0.0005}, {"mean", 0.0010}, {"variance", 2.75e-6}}}}},
              {"skipped", r.skipped},
              {"samples", samples}};
}

inline void write_histograms(const BenchmarkResult& r, const std::filesystem::path& dir) {
  Histogram hx = Histogram::uniform(0.01, 20), ht = Histogram::uniform(0.01, 20);
  for (const auto& s : r.samples) {
    hx.add(s.error.e_x);
    ht.add(s.error.e_theta);
  }
  std::ofstream(dir / "e_x_histogram.csv") << hx.csv("e_x [m]");
  std::ofstream(dir / "e_theta_histogram.csv") << ht.csv("e_theta");
}

}  // namespace tacdepth::pose
