#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "tacdepth/core/image.hpp"
#include "tacdepth/random.hpp"

namespace tacdepth::testing {

/// Straightforward per-pixel evaluation, written independently of the
/// library: collect pixel pairs first, then apply each formula directly.
struct OracleMetrics {
  double abs_rel, rmse, rmse_log, silog;
  std::array<double, 3> delta;
};

inline OracleMetrics brute_force_metrics(const DepthMap& pred, const DepthMap& gt) {
  std::vector<double> p, g;
  for (int v = 0; v < gt.height(); ++v)
    for (int u = 0; u < gt.width(); ++u)
      if (gt.valid(u, v)) {
        p.push_back(pred.depth(u, v));
        g.push_back(gt.depth(u, v));
      }
  const double n = static_cast<double>(p.size());
  OracleMetrics m{};
  double sq = 0.0, lsq = 0.0;
  std::vector<double> logratio;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.abs_rel += std::fabs(g[i] - p[i]) / g[i];
    sq += std::pow(g[i] - p[i], 2);
    const double l = std::log(p[i] / g[i]);
    lsq += l * l;
    logratio.push_back(l);
    const double worst = std::max(g[i] / p[i], p[i] / g[i]);
    for (int k = 0; k < 3; ++k)
      if (worst < std::pow(1.05, k + 1)) m.delta[k] += 1.0;
  }
  m.abs_rel /= n;
  m.rmse = std::sqrt(sq / n);
  m.rmse_log = std::sqrt(lsq / n);
  // SILog as a two-pass variance of the log ratios.
  double mean = 0.0;
  for (double l : logratio) mean += l;
  mean /= n;
  for (double l : logratio) m.silog += (l - mean) * (l - mean);
  m.silog /= n;
  for (double& d : m.delta) d /= n;
  return m;
}

/// Random map pair: prediction everywhere, ground truth on about 75% of
/// the pixels within -10%/+12% of the prediction.
inline std::pair<DepthMap, DepthMap> random_pair(Rng& rng, int w = 8, int h = 8) {
  DepthMap pred(w, h), gt(w, h);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    pred.set(i, rng.uniform(0.015, 0.06));
    if (rng.uniform() < 0.75) gt.set(i, pred.depth(i) * rng.uniform(0.9, 1.12));
  }
  gt.set(0, 0.03);
  return {pred, gt};
}

inline DepthMap scaled(const DepthMap& d, double c) {
  DepthMap out(d.width(), d.height());
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.valid(i)) out.set(i, c * d.depth(i));
  return out;
}

}  // namespace tacdepth::testing
