#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"

namespace tacdepth::metrics {

/// Accuracy thresholds are 1.05^n for n = 1, 2, 3.
inline constexpr std::array<double, 3> kDeltaThresholds{1.05, 1.05 * 1.05, 1.05 * 1.05 * 1.05};

struct MetricOptions {
  /// Use sqrt(mean |e|) for RMSE and RMSElog instead of sqrt(mean e^2).
  bool literal_rmse = false;
};

/// Per-pixel sums from which every metric is computed. Sums over disjoint
/// pixel sets add, so dataset-level metrics equal the metrics of the
/// concatenated pixel set.
struct MetricSums {
  std::uint64_t n = 0;
  double abs_rel = 0.0;   // sum |p - g| / g
  double sq = 0.0;        // sum (p - g)^2
  double abs = 0.0;       // sum |p - g|
  double log_sq = 0.0;    // sum (log p - log g)^2
  double log_abs = 0.0;   // sum |log p - log g|
  double log_sum = 0.0;   // sum (log p - log g)
  std::array<std::uint64_t, 3> within{};

  MetricSums& operator+=(const MetricSums& o) {
    n += o.n;
    abs_rel += o.abs_rel;
    sq += o.sq;
    abs += o.abs;
    log_sq += o.log_sq;
    log_abs += o.log_abs;
    log_sum += o.log_sum;
    for (std::size_t k = 0; k < within.size(); ++k) within[k] += o.within[k];
    return *this;
  }
};

struct MetricReport {
  double abs_rel = 0.0;
  double rmse = 0.0;  // meters
  double rmse_log = 0.0;
  double silog = 0.0;
  std::array<double, 3> delta{};
  std::uint64_t n_pixels = 0;
  bool literal_rmse = false;
  MetricSums sums;
};

inline MetricReport finalize(const MetricSums& s, const MetricOptions& opt = {}) {
  if (s.n == 0) throw DomainError("metrics: no valid pixels");
  const double n = static_cast<double>(s.n);
  MetricReport r;
  r.n_pixels = s.n;
  r.literal_rmse = opt.literal_rmse;
  r.sums = s;
  r.abs_rel = s.abs_rel / n;
  r.rmse = std::sqrt((opt.literal_rmse ? s.abs : s.sq) / n);
  r.rmse_log = std::sqrt((opt.literal_rmse ? s.log_abs : s.log_sq) / n);
  const double mean_log = s.log_sum / n;
  r.silog = std::max(0.0, s.log_sq / n - mean_log * mean_log);
  for (std::size_t k = 0; k < 3; ++k) r.delta[k] = static_cast<double>(s.within[k]) / n;
  return r;
}

inline MetricSums accumulate(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.same_shape(gt)) throw ShapeError("evaluate: prediction and ground truth shapes differ");
  MetricSums s;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid(i)) continue;
    if (!pred.valid(i))
      throw DomainError("evaluate: prediction invalid at pixel " + std::to_string(i) + " where ground truth is valid");
    const double p = pred.depth(i), g = gt.depth(i);
    if (!(p > 0.0) || !(g > 0.0) || !std::isfinite(p) || !std::isfinite(g))
      throw DomainError("evaluate: non-positive depth at pixel " + std::to_string(i));
    const double e = p - g;
    const double le = std::log(p) - std::log(g);
    ++s.n;
    s.abs_rel += std::abs(e) / g;
    s.sq += e * e;
    s.abs += std::abs(e);
    s.log_sq += le * le;
    s.log_abs += std::abs(le);
    s.log_sum += le;
    const double ratio = std::max(p / g, g / p);
    for (std::size_t k = 0; k < 3; ++k)
      if (ratio < kDeltaThresholds[k]) ++s.within[k];
  }
  return s;
}

/// Depth metrics over the valid pixels of `gt`.
inline MetricReport evaluate(const DepthMap& pred, const DepthMap& gt, const MetricOptions& opt = {}) {
  return finalize(accumulate(pred, gt), opt);
}

/// Pixel-weighted combination, identical to evaluating the union of all
/// pixel sets.
inline MetricReport aggregate(std::span<const MetricReport> reports, const MetricOptions& opt = {}) {
  if (reports.empty()) throw DomainError("aggregate: no reports");
  MetricSums s;
  for (const auto& r : reports) s += r.sums;
  if (s.n == 0) throw DomainError("aggregate: all reports have zero pixels");
  return finalize(s, opt);
}

// ------------------------------------------------------------ export

inline json to_json(const MetricReport& r, const std::string& dataset, const std::string& model) {
  return json{{"dataset", dataset},
              {"model", model},
              {"abs_rel", r.abs_rel},
              {"rmse", r.rmse},
              {"rmse_log", r.rmse_log},
              {"silog", r.silog},
              {"delta_1", r.delta[0]},
              {"delta_2", r.delta[1]},
              {"delta_3", r.delta[2]},
              {"n_pixels", r.n_pixels},
              {"rmse_form", r.literal_rmse ? "literal" : "squared"},
              {"aggregation", "per_pixel"},
              {"sums",
               {{"n", r.sums.n},
                {"abs_rel", r.sums.abs_rel},
                {"sq", r.sums.sq},
                {"abs", r.sums.abs},
                {"log_sq", r.sums.log_sq},
                {"log_abs", r.sums.log_abs},
                {"log_sum", r.sums.log_sum},
                {"within", r.sums.within}}}};
}

/// Recovers the exact per-pixel sums stored by to_json.
inline MetricSums sums_from_json(const json& row) {
  try {
    const json& j = row.at("sums");
    MetricSums s;
    s.n = j.at("n").get<std::uint64_t>();
    s.abs_rel = j.at("abs_rel").get<double>();
    s.sq = j.at("sq").get<double>();
    s.abs = j.at("abs").get<double>();
    s.log_sq = j.at("log_sq").get<double>();
    s.log_abs = j.at("log_abs").get<double>();
    s.log_sum = j.at("log_sum").get<double>();
    s.within = j.at("within").get<std::array<std::uint64_t, 3>>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("metric row: ") + e.what());
  }
}

inline const char* kCsvHeader = "dataset,model,abs_rel,rmse,rmse_log,silog,delta_1,delta_2,delta_3,n_pixels";

inline std::string csv_row(const MetricReport& r, const std::string& dataset, const std::string& model) {
  std::ostringstream os;
  os.precision(10);
  os << dataset << ',' << model << ',' << r.abs_rel << ',' << r.rmse << ',' << r.rmse_log << ',' << r.silog << ','
     << r.delta[0] << ',' << r.delta[1] << ',' << r.delta[2] << ',' << r.n_pixels;
  return os.str();
}

}  // namespace tacdepth::metrics
