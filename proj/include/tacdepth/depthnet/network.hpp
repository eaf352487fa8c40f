#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tacdepth/autodiff/checkpoint.hpp"
#include "tacdepth/autodiff/ops.hpp"
#include "tacdepth/autodiff/tape.hpp"
#include "tacdepth/core/image.hpp"
#include "tacdepth/core/json_reader.hpp"
#include "tacdepth/core/sidecar.hpp"
#include "tacdepth/error.hpp"
#include "tacdepth/random.hpp"

namespace tacdepth::net {

using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Variant { kSkipNet, kPackNetMini };

inline const char* to_string(Variant v) { return v == Variant::kSkipNet ? "skipnet" : "packnet_mini"; }

inline Variant variant_from_string(const std::string& s) {
  if (s == "skipnet") return Variant::kSkipNet;
  if (s == "packnet_mini") return Variant::kPackNetMini;
  throw ConfigError("network: unknown variant '" + s + "'");
}

struct NetworkSpec {
  Variant variant = Variant::kSkipNet;
  int base_channels = 16;
  int depth_levels = 3;
  std::array<double, 2> output_range{0.015, 0.06};  // meters

  /// Feature channels at encoder level l (0 = full resolution).
  int channels(int level) const { return base_channels * (level + 1); }

  void validate() const {
    if (depth_levels < 1) throw ConfigError("network: depth_levels must be >= 1");
    if (base_channels < 1) throw ConfigError("network: base_channels must be >= 1");
    if (!(output_range[0] > 0.0 && output_range[0] < output_range[1]))
      throw ConfigError("network: output_range needs 0 < d_min < d_max");
  }

  void check_input(int height, int width) const {
    const int m = 1 << depth_levels;
    if (height % m != 0 || width % m != 0)
      throw ShapeError("network: input " + std::to_string(height) + "x" + std::to_string(width) +
                       " not divisible by 2^depth_levels = " + std::to_string(m));
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline json to_json(const NetworkSpec& s) {
  return json{{"variant", to_string(s.variant)},
              {"base_channels", s.base_channels},
              {"depth_levels", s.depth_levels},
              {"output_range", {s.output_range[0], s.output_range[1]}}};
}

inline NetworkSpec network_from_json(const json& j, NetworkSpec base = {}) {
  JsonReader r(j, "network");
  NetworkSpec s = base;
  s.variant = variant_from_string(r.get<std::string>("variant", to_string(s.variant)));
  s.base_channels = r.get("base_channels", s.base_channels);
  s.depth_levels = r.get("depth_levels", s.depth_levels);
  s.output_range = r.get("output_range", s.output_range);
  r.finish();
  s.validate();
  return s;
}

/// Compact encoder-decoder regressing sigmoid-squashed inverse depth.
///
/// skipnet:      strided 3x3 conv downsampling, nearest-neighbour upsampling.
/// packnet_mini: space_to_depth + conv ("packing") down, conv +
///               depth_to_space ("unpacking") up.
/// Both concatenate the encoder feature of matching resolution before each
/// decoder conv.
class DepthNet {
 public:
  /// Fan-in scaled uniform initialisation, U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
  /// zero biases.
  DepthNet(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(derive_seed(seed, "init"));
    auto conv = [&](const std::string& name, int out, int in, double gain = 1.0) {
      const double bound = gain * std::sqrt(6.0 / (in * 9.0));
      Tensor w({out, in, 3, 3});
      for (double& x : w.storage()) x = rng.uniform(-bound, bound);
      params_.add(name + ".w", std::move(w));
      params_.add(name + ".b", Tensor({1, 1, 1, out}));
    };
    const int L = spec_.depth_levels;
    const bool pack = spec_.variant == Variant::kPackNetMini;
    conv("stem", spec_.channels(0), 1);
    for (int l = 1; l <= L; ++l) {
      const std::string p = "enc" + std::to_string(l);
      conv(p + ".down", spec_.channels(l), pack ? 4 * spec_.channels(l - 1) : spec_.channels(l - 1));
      conv(p + ".conv", spec_.channels(l), spec_.channels(l));
    }
    for (int l = L; l >= 1; --l) {
      const std::string p = "dec" + std::to_string(l);
      if (pack) {
        conv(p + ".unpack", 4 * spec_.channels(l - 1), spec_.channels(l));
        conv(p + ".fuse", spec_.channels(l - 1), 2 * spec_.channels(l - 1));
      } else {
        conv(p + ".fuse", spec_.channels(l - 1), spec_.channels(l) + spec_.channels(l - 1));
      }
    }
    conv("head", 1, spec_.channels(0), 0.1);
  }

  DepthNet(const NetworkSpec& spec, ad::ParameterSet params) : spec_(spec), params_(std::move(params)) {
    spec_.validate();
    const DepthNet reference(spec_, 0);
    if (reference.params_.size() != params_.size())
      throw ShapeError("DepthNet: parameter count does not match the network spec");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (reference.params_[i].name != params_[i].name ||
          reference.params_[i].value.shape() != params_[i].value.shape())
        throw ShapeError("DepthNet: parameter '" + params_[i].name + "' does not match the spec");
    }
  }

  const NetworkSpec& spec() const { return spec_; }
  const ad::ParameterSet& params() const { return params_; }
  ad::ParameterSet& params() { return params_; }

  /// Binds every parameter as a tape leaf (gradients collected) and records
  /// the forward pass. Input is N x 1 x H x W intensities; output is
  /// N x 1 x H x W depth in meters.
  Var forward(Tape& tape, Var input, std::vector<Var>& param_vars) const {
    param_vars.clear();
    for (const auto& p : params_) param_vars.push_back(tape.parameter(p.value));
    return run(input, param_vars);
  }

  /// Forward pass without gradient bookkeeping.
  Var forward_constant(Tape& tape, Var input) const {
    std::vector<Var> vars;
    for (const auto& p : params_) vars.push_back(tape.constant(p.value));
    return run(input, vars);
  }

  /// Records the forward pass with caller-bound parameters, one Var per
  /// entry of params() in order.
  Var run(Var input, const std::vector<Var>& vars) const {
    if (vars.size() != params_.size()) throw ShapeError("network: wrong number of parameter variables");
    const Tensor& x = input.value();
    if (x.c() != 1) throw ShapeError("network: expected a single-channel input");
    spec_.check_input(x.h(), x.w());
    std::size_t k = 0;
    auto conv = [&](Var in, int stride) {
      Var w = vars.at(k++), b = vars.at(k++);
      return ad::conv2d(in, w, b, stride, 1);
    };
    const int L = spec_.depth_levels;
    const bool pack = spec_.variant == Variant::kPackNetMini;
    std::vector<Var> skips;
    Var h = ad::relu(conv(input, 1));
    skips.push_back(h);
    for (int l = 1; l <= L; ++l) {
      h = pack ? ad::relu(conv(ad::space_to_depth(h, 2), 1)) : ad::relu(conv(h, 2));
      h = ad::relu(conv(h, 1));
      skips.push_back(h);
    }
    for (int l = L; l >= 1; --l) {
      if (pack) {
        h = ad::depth_to_space(conv(h, 1), 2);
      } else {
        h = ad::upsample_nearest(h, 2);
      }
      h = ad::relu(conv(ad::concat_channels(h, skips[static_cast<std::size_t>(l - 1)]), 1));
    }
    Var logits = conv(h, 1);
    return ad::inverse_depth_squash(logits, spec_.output_range[0], spec_.output_range[1]);
  }

 private:
  NetworkSpec spec_;
  ad::ParameterSet params_;
};

/// Packs images into an N x 1 x H x W tensor.
inline Tensor images_to_tensor(std::span<const GrayImage* const> images) {
  if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
  const int W = images[0]->width(), H = images[0]->height();
  Tensor t({static_cast<int>(images.size()), 1, H, W});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->width() != W || images[n]->height() != H)
      throw ShapeError("images_to_tensor: mixed image sizes in batch");
    std::copy(images[n]->data().begin(), images[n]->data().end(), t.data() + n * images[n]->size());
  }
  return t;
}

inline std::vector<DepthMap> tensor_to_depth(const Tensor& t) {
  std::vector<DepthMap> out;
  const std::size_t plane = static_cast<std::size_t>(t.h()) * t.w();
  for (int n = 0; n < t.n(); ++n) {
    std::vector<double> d(t.data() + n * plane, t.data() + (n + 1) * plane);
    out.emplace_back(t.w(), t.h(), std::move(d), std::vector<std::uint8_t>(plane, 1));
  }
  return out;
}

/// Dense prediction for a batch of images (every output pixel valid).
inline std::vector<DepthMap> predict(const DepthNet& net, std::span<const GrayImage* const> images) {
  Tape tape;
  Var in = tape.constant(images_to_tensor(images));
  return tensor_to_depth(net.forward_constant(tape, in).value());
}

inline DepthMap predict(const DepthNet& net, const GrayImage& image) {
  const GrayImage* one[] = {&image};
  return std::move(predict(net, one).front());
}

}  // namespace tacdepth::net
