#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tacdepth/autodiff/checkpoint.hpp"
#include "tacdepth/autodiff/ops.hpp"
#include "tacdepth/core/image.hpp"
#include "tacdepth/core/io.hpp"
#include "tacdepth/core/json_reader.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/depthnet/network.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/random.hpp"

namespace tacdepth::net {

// ------------------------------------------------------------ loss

/// Mean |pred - gt| over pixels where gt is valid. Values at invalid gt
/// pixels are never read.
inline double masked_l1_loss(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.same_shape(gt)) throw ShapeError("masked_l1_loss: shape mismatch");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.valid(i)) continue;
    total += std::abs(pred.depth(i) - gt.depth(i));
    ++n;
  }
  if (n == 0) throw DomainError("masked_l1_loss: ground truth has no valid pixels");
  return total / static_cast<double>(n);
}

// ------------------------------------------------------------ optimiser

struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  double lr = 2e-4;
  int lr_halving_period = 40;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  int validate_every = 1;  // epochs; 0 disables validation

  void validate() const {
    if (epochs < 1 || batch_size < 1 || lr_halving_period < 1)
      throw ConfigError("train: epochs, batch_size and lr_halving_period must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and non-negative");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
      throw ConfigError("train: Adam betas must lie in (0,1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("train: adam_epsilon must be positive");
    if (validate_every < 0) throw ConfigError("train: validate_every must be >= 0");
  }
};

inline json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},         {"batch_size", c.batch_size},
              {"lr", c.lr},                 {"lr_halving_period", c.lr_halving_period},
              {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
              {"adam_epsilon", c.adam_epsilon}, {"seed", c.seed},
              {"validate_every", c.validate_every}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
  JsonReader r(j, "train");
  c.epochs = r.get("epochs", c.epochs);
  c.batch_size = r.get("batch_size", c.batch_size);
  c.lr = r.get("lr", c.lr);
  c.lr_halving_period = r.get("lr_halving_period", c.lr_halving_period);
  c.adam_beta1 = r.get("adam_beta1", c.adam_beta1);
  c.adam_beta2 = r.get("adam_beta2", c.adam_beta2);
  c.adam_epsilon = r.get("adam_epsilon", c.adam_epsilon);
  c.seed = r.get("seed", c.seed);
  c.validate_every = r.get("validate_every", c.validate_every);
  r.finish();
  c.validate();
  return c;
}

/// Step-decayed learning rate for 0-based epoch index `epoch`:
/// lr * 2^-floor(epoch / lr_halving_period).
inline double learning_rate(const TrainConfig& c, int epoch) {
  return c.lr * std::ldexp(1.0, -(epoch / c.lr_halving_period));
}

struct AdamState {
  std::vector<Tensor> m, v;
};

/// One bias-corrected Adam update at step t (1-based).
inline void adam_step(ad::ParameterSet& params, std::span<const Tensor> grads, AdamState& state,
                      long t, double lr, const TrainConfig& c) {
  if (t < 1) throw DomainError("adam_step: t must be >= 1");
  if (grads.size() != params.size()) throw ShapeError("adam_step: gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimiser state mismatch");
  const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k].value;
    const Tensor& g = grads[k];
    if (g.shape() != p.shape()) throw ShapeError("adam_step: gradient shape mismatch for " + params[k].name);
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.adam_beta1 * m[i] + (1.0 - c.adam_beta1) * g[i];
      v[i] = c.adam_beta2 * v[i] + (1.0 - c.adam_beta2) * g[i] * g[i];
      const double mh = m[i] / bc1, vh = v[i] / bc2;
      p[i] -= lr * mh / (std::sqrt(vh) + c.adam_epsilon);
    }
  }
}

// ------------------------------------------------------------ training loop

struct TrainingExample {
  GrayImage image;
  DepthMap depth;  // supervision; invalid pixels are masked out
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  double wall_seconds = 0.0;
};

struct TrainResult {
  DepthNet net;
  std::vector<EpochLog> log;
};

namespace detail {

struct Batch {
  Tensor input, target;
  std::vector<std::uint8_t> mask;
  std::size_t valid = 0;
};

inline Batch make_batch(std::span<const TrainingExample> data, std::span<const std::size_t> idx) {
  std::vector<const GrayImage*> imgs;
  for (auto i : idx) imgs.push_back(&data[i].image);
  Batch b;
  b.input = images_to_tensor(imgs);
  b.target = Tensor(b.input.shape());
  b.mask.assign(b.input.size(), 0);
  const std::size_t plane = static_cast<std::size_t>(b.input.h()) * b.input.w();
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const DepthMap& d = data[idx[n]].depth;
    if (d.width() != b.input.w() || d.height() != b.input.h())
      throw ShapeError("train: depth map and image sizes differ");
    for (std::size_t i = 0; i < plane; ++i) {
      if (!d.valid(i)) continue;
      b.target[n * plane + i] = d.depth(i);
      b.mask[n * plane + i] = 1;
      ++b.valid;
    }
  }
  return b;
}

}  // namespace detail

/// Pixel-weighted masked L1 of the network over a dataset.
inline double dataset_loss(const DepthNet& net, std::span<const TrainingExample> data, int batch_size = 8) {
  double total = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    detail::Batch b = detail::make_batch(data, idx);
    if (b.valid == 0) continue;
    Tape tape;
    Var out = net.forward_constant(tape, tape.constant(b.input));
    total += ad::masked_l1(out, b.target, b.mask).value()[0] * static_cast<double>(b.valid);
    count += b.valid;
  }
  if (count == 0) throw DomainError("dataset_loss: no valid pixels");
  return total / static_cast<double>(count);
}

using EpochCallback = std::function<void(const EpochLog&)>;

/// Minibatch Adam on the masked L1 objective. Deterministic given
/// config.seed (initialisation and per-epoch shuffles derive from it).
/// The epoch loss is the pixel-weighted mean over the epoch's batches.
inline TrainResult train(const NetworkSpec& spec, std::span<const TrainingExample> train_set,
                         std::span<const TrainingExample> val_set, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (train_set.empty()) throw DomainError("train: empty training split");
  TrainResult result{DepthNet(spec, config.seed), {}};
  DepthNet& net = result.net;
  AdamState state;
  long step = 0;
  std::vector<std::size_t> order(train_set.size());
  std::vector<Var> pvars;
  std::vector<Tensor> grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const double lr = learning_rate(config, epoch);

    double weighted = 0.0;
    std::size_t pixels = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      detail::Batch b = detail::make_batch(train_set, idx);
      if (b.valid == 0) continue;
      Tape tape;
      Var out = net.forward(tape, tape.constant(b.input), pvars);
      Var loss = ad::masked_l1(out, b.target, b.mask);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv))
        throw NumericError("train: loss became non-finite in epoch " + std::to_string(epoch + 1), epoch + 1);
      tape.backward(loss);
      grads.clear();
      for (const Var& v : pvars) grads.push_back(tape.grad(v));
      adam_step(net.params(), grads, state, ++step, lr, config);
      weighted += lv * static_cast<double>(b.valid);
      pixels += b.valid;
    }
    if (pixels == 0) throw DomainError("train: training split has no valid pixels");
    EpochLog log;
    log.epoch = epoch + 1;
    log.lr = lr;
    log.train_loss = weighted / static_cast<double>(pixels);
    if (!std::isfinite(log.train_loss))
      throw NumericError("train: loss became non-finite in epoch " + std::to_string(epoch + 1), epoch + 1);
    if (!val_set.empty() && config.validate_every > 0 &&
        ((epoch + 1) % config.validate_every == 0 || epoch + 1 == config.epochs))
      log.val_loss = dataset_loss(net, val_set);
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

// ------------------------------------------------------------ persistence

inline json to_json(const std::vector<EpochLog>& log) {
  json arr = json::array();
  for (const auto& e : log) {
    arr.push_back({{"epoch", e.epoch},
                   {"lr", e.lr},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss ? json(*e.val_loss) : json(nullptr)},
                   {"wall_seconds", e.wall_seconds}});
  }
  return arr;
}

/// Writes <stem>.ckpt (parameters) and <stem>.json (architecture).
inline void save_model(const DepthNet& net, const std::filesystem::path& ckpt_path) {
  ad::save_checkpoint(net.params(), ckpt_path);
  auto manifest_path = ckpt_path;
  manifest_path.replace_extension(".json");
  write_json(json{{"format", "tacdepth-checkpoint-1"},
                  {"network", to_json(net.spec())},
                  {"parameters", net.params().scalar_count()}},
             manifest_path);
}

inline DepthNet load_model(const std::filesystem::path& ckpt_path) {
  auto manifest_path = ckpt_path;
  manifest_path.replace_extension(".json");
  const json manifest = read_json(manifest_path);
  if (!manifest.contains("network")) throw ConfigError(manifest_path.string() + ": missing network spec");
  return DepthNet(network_from_json(manifest.at("network")), ad::load_checkpoint(ckpt_path));
}

// ------------------------------------------------------------ inference

struct Inference {
  DepthMap depth;
  double seconds = 0.0;
};

inline Inference infer(const DepthNet& net, const GrayImage& image) {
  const auto t0 = std::chrono::steady_clock::now();
  Inference r{predict(net, image), 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace tacdepth::net
