#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "tacdepth/core/io.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/depthnet/network.hpp"
#include "tacdepth/depthnet/train.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/experiment/config.hpp"
#include "tacdepth/metrics/metrics.hpp"
#include "tacdepth/random.hpp"
#include "tacdepth/simulator/dataset.hpp"

namespace tacdepth::experiment {

using sim::DatasetEntry;

struct Split {
  std::vector<DatasetEntry> train, test;
};

/// Seeded per-class partition. Within each class the manifest entries (both
/// cameras) are shuffled and the first round(fraction * n) go to training;
/// classes with at least two samples keep one sample on each side.
inline Split split_in_class(const sim::Dataset& data, std::uint64_t seed, double train_fraction) {
  std::map<std::string, std::vector<DatasetEntry>> by_class;
  std::vector<std::string> order;
  for (const auto& e : data.entries()) {
    if (!by_class.count(e.object_class)) order.push_back(e.object_class);
    by_class[e.object_class].push_back(e);
  }
  Split s;
  for (const auto& cls : order) {
    auto items = by_class[cls];
    Rng rng(derive_seed(seed, "split:" + cls));
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
    auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(items.size())));
    if (items.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, items.size() - 1);
    s.train.insert(s.train.end(), items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  }
  return s;
}

template <class Pred>
std::vector<DatasetEntry> filter(const std::vector<DatasetEntry>& in, Pred pred) {
  std::vector<DatasetEntry> out;
  std::copy_if(in.begin(), in.end(), std::back_inserter(out), pred);
  return out;
}

/// Object classes present in the dataset, manifest order, no_contact excluded.
inline std::vector<std::string> object_classes(const sim::Dataset& data) {
  std::vector<std::string> out;
  for (const auto& e : data.entries())
    if (e.object_class != "no_contact" && std::find(out.begin(), out.end(), e.object_class) == out.end())
      out.push_back(e.object_class);
  return out;
}

struct EvalCell {
  std::string dataset;  // row label
  std::vector<DatasetEntry> entries;
};

struct ModelPlan {
  std::string name;
  std::vector<DatasetEntry> train;
  std::vector<EvalCell> cells;
};

/// Models and evaluation cells of a protocol.
inline std::vector<ModelPlan> plan_protocol(const sim::Dataset& data, Protocol protocol, const Split& split) {
  std::vector<ModelPlan> plans;
  const auto classes = object_classes(data);
  const auto of_class = [](const std::string& c) { return [c](const DatasetEntry& e) { return e.object_class == c; }; };
  switch (protocol) {
    case Protocol::kInClass: {
      ModelPlan p{"in_class", split.train, {}};
      std::vector<std::string> rows = classes;
      if (std::any_of(split.test.begin(), split.test.end(), of_class("no_contact"))) rows.push_back("no_contact");
      for (const auto& c : rows) p.cells.push_back({c, filter(split.test, of_class(c))});
      plans.push_back(std::move(p));
      break;
    }
    case Protocol::kLeaveOneOut:
      for (const auto& held : classes) {
        ModelPlan p{"without_" + held, filter(split.train, [&](const DatasetEntry& e) { return e.object_class != held; }), {}};
        p.cells.push_back({held, filter(split.test, of_class(held))});
        plans.push_back(std::move(p));
      }
      break;
    case Protocol::kCrossCamera:
      for (const auto& [from, to] : {std::pair<std::string, std::string>{"left", "right"}, {"right", "left"}}) {
        ModelPlan p{from + "_to_" + to,
                    filter(split.train, [&](const DatasetEntry& e) { return e.sensor_id == from; }), {}};
        for (const auto& c : classes)
          p.cells.push_back({c + "_" + to, filter(split.test, [&](const DatasetEntry& e) {
                               return e.object_class == c && e.sensor_id == to;
                             })});
        plans.push_back(std::move(p));
      }
      break;
  }
  for (const auto& p : plans) {
    if (p.train.empty()) throw DomainError("protocol: model '" + p.name + "' has an empty training split");
    for (const auto& c : p.cells)
      if (c.entries.empty()) throw DomainError("protocol: cell '" + c.dataset + "' has no test samples");
  }
  return plans;
}

inline std::vector<net::TrainingExample> load_examples(const sim::Dataset& data, const std::vector<DatasetEntry>& entries) {
  std::vector<net::TrainingExample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    sim::StoredSample s = data.load(e);
    out.push_back({std::move(s.image), std::move(s.depth)});
  }
  return out;
}

/// Per-pixel statistics of |pred - gt| across a sample set.
struct ErrorMaps {
  DepthMap mean_abs, variance;
};

class ErrorAccumulator {
 public:
  void add(const DepthMap& pred, const DepthMap& gt) {
    if (count_.empty()) {
      w_ = gt.width();
      h_ = gt.height();
      count_.assign(gt.size(), 0);
      sum_.assign(gt.size(), 0.0);
      sq_.assign(gt.size(), 0.0);
    }
    if (gt.width() != w_ || gt.height() != h_ || !pred.same_shape(gt)) throw ShapeError("error maps: size mismatch");
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!gt.valid(i) || !pred.valid(i)) continue;
      const double e = std::abs(pred.depth(i) - gt.depth(i));
      ++count_[i];
      sum_[i] += e;
      sq_[i] += e * e;
    }
  }

  bool empty() const { return count_.empty(); }

  ErrorMaps maps() const {
    ErrorMaps m{DepthMap(w_, h_), DepthMap(w_, h_)};
    for (std::size_t i = 0; i < count_.size(); ++i) {
      if (count_[i] == 0) continue;
      const double n = static_cast<double>(count_[i]);
      const double mean = sum_[i] / n;
      m.mean_abs.set(i, mean);
      m.variance.set(i, std::max(0.0, sq_[i] / n - mean * mean));
    }
    return m;
  }

 private:
  int w_ = 0, h_ = 0;
  std::vector<std::size_t> count_;
  std::vector<double> sum_, sq_;
};

struct CellResult {
  std::string model, dataset;
  metrics::MetricReport report;
};

/// Evaluates a predictor over the cell's samples against the stored
/// (degraded) depth, pixel-aggregated.
template <class Predict>
metrics::MetricReport evaluate_cell(const sim::Dataset& data, const EvalCell& cell, Predict&& predict,
                                    const metrics::MetricOptions& opt, ErrorAccumulator* errors = nullptr) {
  std::vector<metrics::MetricReport> reps;
  for (const auto& e : cell.entries) {
    const sim::StoredSample s = data.load(e);
    if (s.depth.valid_count() == 0) continue;
    const DepthMap pred = predict(s);
    reps.push_back(metrics::evaluate(pred, s.depth, opt));
    if (errors) errors->add(pred, s.depth);
  }
  return metrics::aggregate(reps, opt);
}

inline json metrics_document(const std::string& protocol, const std::vector<CellResult>& rows,
                             const metrics::MetricOptions& opt) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(metrics::to_json(r.report, r.dataset, r.model));
  return json{{"protocol", protocol},
              {"aggregation", "per_pixel"},
              {"rmse_form", opt.literal_rmse ? "literal" : "squared"},
              {"rows", arr}};
}

inline void write_metrics(const std::filesystem::path& dir, const std::string& stem, const std::string& protocol,
                          const std::vector<CellResult>& rows, const metrics::MetricOptions& opt) {
  write_json(metrics_document(protocol, rows, opt), dir / (stem + ".json"));
  std::ofstream csv(dir / (stem + ".csv"));
  csv << metrics::kCsvHeader << '\n';
  for (const auto& r : rows) csv << metrics::csv_row(r.report, r.dataset, r.model) << '\n';
  if (!csv) throw IoError(FormatIssue::kOpenFailed, (dir / (stem + ".csv")).string());
}

struct ProtocolOutputs {
  std::vector<CellResult> rows;      // trained models
  std::vector<CellResult> baseline;  // rest-surface predictor on the same cells
};

/// Trains every model of the configured protocol on the dataset and writes
/// <out>/models/<name>.{ckpt,json,log.json}, metrics.{json,csv},
/// baseline.{json,csv} and no_contact error maps under <out>/error_maps.
inline ProtocolOutputs run_protocol(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  const sim::Dataset data = sim::Dataset::open(cfg.dataset);
  const Split split = split_in_class(data, derive_seed(cfg.seed, "split"), cfg.train_fraction);
  const auto plans = plan_protocol(data, cfg.protocol, split);
  const metrics::MetricOptions mopt{cfg.literal_rmse};
  std::filesystem::create_directories(out / "models");
  std::map<std::string, DepthMap> refs;
  for (const char* sid : sim::kSensorIds) refs.emplace(sid, data.reference(sid));

  ProtocolOutputs result;
  for (const auto& plan : plans) {
    log << "training " << plan.name << " on " << plan.train.size() << " samples\n" << std::flush;
    const auto train_set = load_examples(data, plan.train);
    net::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train:" + plan.name);
    const auto trained = net::train(cfg.network, train_set, {}, tc, [&](const net::EpochLog& e) {
      log << "  epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << '\n' << std::flush;
    });
    net::save_model(trained.net, out / "models" / (plan.name + ".ckpt"));
    write_json(net::to_json(trained.log), out / "models" / (plan.name + ".log.json"));

    for (const auto& cell : plan.cells) {
      ErrorAccumulator acc;
      const bool want_maps = cell.dataset == "no_contact";
      auto rep = evaluate_cell(
          data, cell, [&](const sim::StoredSample& s) { return net::predict(trained.net, s.image); }, mopt,
          want_maps ? &acc : nullptr);
      result.rows.push_back({plan.name, cell.dataset, rep});
      auto base = evaluate_cell(
          data, cell, [&](const sim::StoredSample& s) { return refs.at(s.meta.sensor_id); }, mopt);
      result.baseline.push_back({"rest_baseline", cell.dataset, base});
      if (want_maps && !acc.empty()) {
        std::filesystem::create_directories(out / "error_maps");
        const ErrorMaps m = acc.maps();
        io::write_scalar_pfm(m.mean_abs, out / "error_maps" / (plan.name + ".no_contact.mean_abs.pfm"));
        io::write_scalar_pfm(m.variance, out / "error_maps" / (plan.name + ".no_contact.variance.pfm"));
      }
    }
  }
  write_metrics(out, "metrics", to_string(cfg.protocol), result.rows, mopt);
  write_metrics(out, "baseline", to_string(cfg.protocol), result.baseline, mopt);
  return result;
}

}  // namespace tacdepth::experiment
