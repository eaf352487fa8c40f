#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tacdepth/core/io.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/depthnet/train.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/experiment/config.hpp"
#include "tacdepth/experiment/protocol.hpp"
#include "tacdepth/experiment/report.hpp"
#include "tacdepth/geometry/camera.hpp"
#include "tacdepth/pose/benchmark.hpp"
#include "tacdepth/simulator/dataset.hpp"

namespace fs = std::filesystem;
using namespace tacdepth;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kIo = 3, kNumeric = 4, kPartial = 5 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::string out;
  bool literal_rmse = false;
};

experiment::ExperimentConfig resolve(const Globals& g) {
  experiment::ExperimentConfig c = g.config.empty() ? experiment::ExperimentConfig{} : experiment::load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.scale) c.scale = *g.scale;
  if (g.literal_rmse) c.literal_rmse = true;
  return c;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw ConfigError("--out is required");
  return g.out;
}

void echo_config(const experiment::ExperimentConfig& c, const fs::path& dir) {
  c.validate();
  fs::create_directories(dir);
  write_json(experiment::to_json(c), dir / "config.json");
}

int cmd_gen_data(const Globals& g) {
  const auto cfg = resolve(g);
  const fs::path out = require_out(g);
  echo_config(cfg, out);
  const auto plan = cfg.generation_plan();
  sim::write_dataset(plan, out);
  std::size_t total = 0;
  for (const auto& [cls, n] : plan.counts) {
    std::cout << cls << ": " << n << '\n';
    total += static_cast<std::size_t>(n);
  }
  std::cout << "wrote " << total << " samples to " << out.string() << '\n';
  return kOk;
}

int cmd_train(const Globals& g, const std::string& dataset, const std::string& protocol) {
  auto cfg = resolve(g);
  if (!dataset.empty()) cfg.dataset = dataset;
  if (!protocol.empty()) cfg.protocol = experiment::protocol_from_string(protocol);
  if (cfg.dataset.empty()) throw ConfigError("train: no dataset given (--dataset or config.dataset)");
  const fs::path out = require_out(g);
  echo_config(cfg, out);
  const auto res = experiment::run_protocol(cfg, out, std::cerr);
  for (const auto& r : res.rows)
    std::printf("%-20s %-18s rmse %.6f  abs_rel %.5f  d1 %.4f\n", r.model.c_str(), r.dataset.c_str(), r.report.rmse,
                r.report.abs_rel, r.report.delta[0]);
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& dataset, const std::string& split) {
  auto cfg = resolve(g);
  if (!dataset.empty()) cfg.dataset = dataset;
  if (cfg.dataset.empty()) throw ConfigError("eval: no dataset given (--dataset or config.dataset)");
  const fs::path out = require_out(g);
  echo_config(cfg, out);
  const net::DepthNet model = net::load_model(checkpoint);
  const sim::Dataset data = sim::Dataset::open(cfg.dataset);
  const auto parts = experiment::split_in_class(data, derive_seed(cfg.seed, "split"), cfg.train_fraction);
  std::vector<sim::DatasetEntry> chosen;
  if (split == "train") chosen = parts.train;
  else if (split == "test") chosen = parts.test;
  else if (split == "all") chosen = data.entries();
  else throw ConfigError("eval: --split must be train, test or all");
  const metrics::MetricOptions mopt{cfg.literal_rmse};
  const std::string name = fs::path(checkpoint).stem().string();
  std::vector<experiment::CellResult> rows;
  std::vector<std::string> classes = experiment::object_classes(data);
  classes.push_back("no_contact");
  std::vector<metrics::MetricReport> all;
  for (const auto& cls : classes) {
    experiment::EvalCell cell{cls, experiment::filter(chosen, [&](const sim::DatasetEntry& e) { return e.object_class == cls; })};
    if (cell.entries.empty()) continue;
    auto rep = experiment::evaluate_cell(
        data, cell, [&](const sim::StoredSample& s) { return net::predict(model, s.image); }, mopt);
    rows.push_back({name, cls, rep});
    all.push_back(rep);
  }
  if (rows.empty()) throw DomainError("eval: split '" + split + "' is empty");
  rows.push_back({name, "all", metrics::aggregate(all, mopt)});
  experiment::write_metrics(out, "metrics", "eval:" + split, rows, mopt);
  for (const auto& r : rows)
    std::printf("%-18s rmse %.6f  abs_rel %.5f  d1 %.4f  n %llu\n", r.dataset.c_str(), r.report.rmse, r.report.abs_rel,
                r.report.delta[0], static_cast<unsigned long long>(r.report.n_pixels));
  return kOk;
}

int cmd_infer(const Globals& g, const std::string& checkpoint, const std::string& image) {
  const fs::path out = require_out(g);
  const net::DepthNet model = net::load_model(checkpoint);
  const GrayImage img = io::read_pgm(image);
  model.spec().check_input(img.height(), img.width());
  const auto r = net::infer(model, img);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_pfm(r.depth, out);
  std::printf("inference %.4f s per frame (%dx%d)\n", r.seconds, img.width(), img.height());
  return kOk;
}

CameraIntrinsics camera_from_file(const fs::path& path) {
  const json j = read_json(path);
  if (j.contains("camera")) return camera_from_json(j.at("camera"));
  if (j.contains("intrinsics")) return camera_from_json(j.at("intrinsics"));
  return camera_from_json(j);
}

int cmd_lift(const Globals& g, const std::string& depth_path, const std::string& camera, const std::string& reference,
             std::optional<double> threshold, const std::string& mask_out, int max_points) {
  const auto cfg = resolve(g);
  const fs::path out = require_out(g);
  const DepthMap depth = io::read_pfm(depth_path);
  const CameraIntrinsics cam = camera_from_file(camera);
  PointCloud cloud;
  if (!reference.empty()) {
    const PixelMask mask =
        geometry::contact_patch_mask(depth, io::read_pfm(reference), threshold.value_or(cfg.pose.contact_threshold));
    if (!mask_out.empty()) io::write_mask_pgm(mask, mask_out);
    cloud = geometry::unproject_masked(depth, cam, mask);
  } else {
    cloud = geometry::unproject(depth, cam);
  }
  if (max_points > 0) cloud = geometry::downsample(cloud, static_cast<std::size_t>(max_points), derive_seed(cfg.seed, "lift"));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_ply(cloud, out);
  std::printf("wrote %zu points\n", cloud.size());
  return kOk;
}

std::array<double, 7> parse_pose(const std::string& s) {
  std::array<double, 7> v{};
  std::istringstream is(s);
  std::string tok;
  std::size_t k = 0;
  while (std::getline(is, tok, ',')) {
    if (k == 7) throw ConfigError("--init expects 7 comma-separated values");
    try {
      v[k++] = std::stod(tok);
    } catch (const std::exception&) {
      throw ConfigError("--init: cannot parse '" + tok + "'");
    }
  }
  if (k != 7) throw ConfigError("--init expects 7 comma-separated values");
  return v;
}

ShapeDims parse_dims(const std::string& kind, const std::vector<double>& dims) {
  ShapeDims s;
  s.kind = shape_kind_from_string(kind);
  if (static_cast<int>(dims.size()) != s.dim_count())
    throw ConfigError("--dims: " + kind + " takes " + std::to_string(s.dim_count()) + " values");
  for (std::size_t i = 0; i < dims.size(); ++i) s.dims[i] = dims[i];
  s.validate();
  return s;
}

struct PoseArgs {
  std::string checkpoint, dataset, primitive, object_class, init;
  std::vector<std::string> clouds;
  std::vector<double> dims;
  std::optional<int> count;
  bool multi_cloud = false;
  bool oracle = false;
};

int cmd_pose(const Globals& g, const PoseArgs& a) {
  auto cfg = resolve(g);
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (!a.primitive.empty()) cfg.pose.primitive = a.primitive;
  if (!a.object_class.empty()) cfg.pose.object_class = a.object_class;
  if (a.count) cfg.pose.count = *a.count;
  if (a.multi_cloud) cfg.pose.multi_cloud = true;
  const fs::path out = require_out(g);
  echo_config(cfg, out);

  if (!a.clouds.empty()) {
    if (a.clouds.size() > 1 && !cfg.pose.multi_cloud)
      throw ConfigError("pose: several --cloud files need --multi-cloud");
    if (a.init.empty()) throw ConfigError("pose: --init is required with --cloud");
    PointCloud cloud;
    for (const auto& f : a.clouds) {
      const PointCloud c = io::read_ply(f);
      cloud.insert(cloud.end(), c.begin(), c.end());
    }
    cloud = geometry::downsample(cloud, static_cast<std::size_t>(cfg.pose.max_points), derive_seed(cfg.seed, "pose-cloud"));
    const pose::ProximityField field(parse_dims(cfg.pose.primitive, a.dims));
    const auto est = pose::estimate_pose(field, cloud, Pose::from_vector(parse_pose(a.init)));
    json pose_json = json::array();
    for (double x : est.pose.to_vector()) pose_json.push_back(x);
    write_json(json{{"pose", pose_json},
                    {"initial_cost", est.initial_cost},
                    {"final_cost", est.final_cost},
                    {"iterations", est.iterations},
                    {"converged", est.converged},
                    {"stop_reason", est.stop_reason},
                    {"points", cloud.size()}},
               out / "estimate.json");
    std::printf("cost %.3e -> %.3e in %d iterations (%s)\n", est.initial_cost, est.final_cost, est.iterations,
                est.stop_reason.c_str());
    return kOk;
  }

  if (cfg.dataset.empty()) throw ConfigError("pose: no dataset given (--dataset or config.dataset)");
  if (a.checkpoint.empty() && !a.oracle) throw ConfigError("pose: --checkpoint is required (or --oracle-depth)");
  const sim::Dataset data = sim::Dataset::open(cfg.dataset);
  std::optional<net::DepthNet> model;
  if (!a.oracle) model.emplace(net::load_model(a.checkpoint));
  const pose::DepthPredictor predict = [&](const sim::StoredSample& s) {
    return a.oracle ? s.clean_depth : net::predict(*model, s.image);
  };
  const auto opt = cfg.benchmark_options();
  const auto res = pose::pose_benchmark(data, predict, opt);
  write_json(pose::to_json(res, opt), out / "benchmark.json");
  pose::write_histograms(res, out);
  std::printf("n=%zu  e_x median %.5f m mean %.5f m  e_theta median %.6f mean %.6f\n", res.samples.size(),
              res.e_x.median, res.e_x.mean, res.e_theta.median, res.e_theta.mean);
  return kOk;
}

int cmd_report(const Globals& g, const std::vector<std::string>& runs) {
  const fs::path out = require_out(g);
  std::vector<fs::path> dirs(runs.begin(), runs.end());
  const auto rep = experiment::build_report(dirs, metrics::MetricOptions{g.literal_rmse});
  experiment::write_report(rep, out);
  std::ifstream txt(out / "tables.txt");
  std::cout << txt.rdbuf();
  if (!rep.complete()) {
    std::cerr << "partial report: " << rep.warnings.size() << " run(s) missing or unreadable\n";
    return kPartial;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile depth estimation toolkit: simulation, training, evaluation and pose estimation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment configuration (JSON)");
  app.add_option("--seed", g.seed, "Root seed; overrides the configuration");
  app.add_option("--scale", g.scale, "Dataset size multiplier; overrides the configuration");
  app.add_option("--out", g.out, "Output directory or file");
  app.add_flag("--paper-literal-rmse", g.literal_rmse, "Use sqrt(mean |e|) for RMSE and RMSElog");

  auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset");
  gen->fallthrough();

  std::string dataset, protocol;
  auto* train = app.add_subcommand("train", "Train and evaluate the models of a protocol");
  train->fallthrough();
  train->add_option("--dataset", dataset, "Dataset root");
  train->add_option("--protocol", protocol, "in_class | leave_one_out | cross_camera");

  std::string checkpoint, split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->fallthrough();
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint (.ckpt)")->required();
  eval->add_option("--dataset", dataset, "Dataset root");
  eval->add_option("--split", split, "train | test | all");

  std::string image;
  auto* infer = app.add_subcommand("infer", "Predict a depth map for one image");
  infer->fallthrough();
  infer->add_option("--checkpoint", checkpoint, "Model checkpoint (.ckpt)")->required();
  infer->add_option("--image", image, "Input PGM")->required();

  std::string depth, camera, reference, mask_out;
  std::optional<double> threshold;
  int max_points = 0;
  auto* lift = app.add_subcommand("lift", "Lift a depth map (optionally its contact patch) to a PLY cloud");
  lift->fallthrough();
  lift->add_option("--depth", depth, "Depth PFM")->required();
  lift->add_option("--camera", camera, "JSON with intrinsics (sample sidecar or camera block)")->required();
  lift->add_option("--reference", reference, "No-contact reference PFM; enables contact masking");
  lift->add_option("--threshold", threshold, "Contact threshold in meters");
  lift->add_option("--mask-out", mask_out, "Write the contact mask as PGM");
  lift->add_option("--max-points", max_points, "Downsample to at most this many points (0 keeps all)");

  PoseArgs pa;
  auto* pose_cmd = app.add_subcommand("pose", "Pose benchmark on a dataset, or a single estimate from clouds");
  pose_cmd->fallthrough();
  pose_cmd->add_option("--checkpoint", pa.checkpoint, "Model checkpoint for predicted depth");
  pose_cmd->add_option("--dataset", pa.dataset, "Dataset root");
  pose_cmd->add_option("--primitive", pa.primitive, "sphere | cylinder | box | capsule");
  pose_cmd->add_option("--class", pa.object_class, "Object class to benchmark");
  pose_cmd->add_option("--count", pa.count, "Number of samples");
  pose_cmd->add_flag("--oracle-depth", pa.oracle, "Use clean depth in place of network predictions");
  pose_cmd->add_option("--cloud", pa.clouds, "PLY cloud(s) in a common frame for a single estimate");
  pose_cmd->add_option("--dims", pa.dims, "Primitive dimensions for --cloud mode")->delimiter(',');
  pose_cmd->add_option("--init", pa.init, "Initial pose tx,ty,tz,qw,qx,qy,qz for --cloud mode");
  pose_cmd->add_flag("--multi-cloud", pa.multi_cloud, "Concatenate several clouds into one estimate");

  std::vector<std::string> runs;
  auto* report = app.add_subcommand("report", "Assemble tables from run directories");
  report->fallthrough();
  report->add_option("runs", runs, "Run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return cmd_gen_data(g);
    if (*train) return cmd_train(g, dataset, protocol);
    if (*eval) return cmd_eval(g, checkpoint, dataset, split);
    if (*infer) return cmd_infer(g, checkpoint, image);
    if (*lift) return cmd_lift(g, depth, camera, reference, threshold, mask_out, max_points);
    if (*pose_cmd) return cmd_pose(g, pa);
    if (*report) return cmd_report(g, runs);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numerical divergence: " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
