#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "tacdepth/autodiff/ops.hpp"
#include "tacdepth/depthnet/network.hpp"

namespace tacdepth::testing {

/// A differentiable scalar function plus a generator of random inputs.
struct GradientCase {
  std::string name;
  LossFn loss;
  std::function<std::vector<Tensor>(Rng&)> inputs;
};

namespace detail {

// Contracting with fixed random weights turns any tensor op into a scalar
// whose gradient exercises every output element.
inline Var weighted_sum(Tape& t, Var y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(y, t.constant(random_tensor(y.shape(), rng))));
}

}  // namespace detail

inline std::vector<GradientCase> primitive_cases() {
  using detail::weighted_sum;
  std::vector<GradientCase> cases;
  const ad::Shape s{2, 3, 4, 5};
  auto two = [s](Rng& r) { return std::vector<Tensor>{random_tensor(s, r), random_tensor(s, r)}; };
  auto one = [](ad::Shape shape) { return [shape](Rng& r) { return std::vector<Tensor>{random_tensor(shape, r)}; }; };

  cases.push_back({"add", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::add(v[0], v[1]), 1); }, two});
  cases.push_back({"mul", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::mul(v[0], v[1]), 2); }, two});
  cases.push_back({"scale", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::scale(v[0], -2.5), 3); }, one(s)});
  cases.push_back({"relu", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::relu(v[0]), 4); },
                   [s](Rng& r) { return std::vector<Tensor>{random_tensor_away_from_zero(s, r)}; }});
  cases.push_back({"sigmoid", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::sigmoid(v[0]), 5); },
                   [s](Rng& r) { return std::vector<Tensor>{random_tensor(s, r, -4, 4)}; }});
  cases.push_back({"sum", [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::mul(v[0], v[0])); }, one(s)});
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      cases.push_back({"conv2d_s" + std::to_string(stride) + "_p" + std::to_string(pad),
                       [stride, pad](Tape& t, const std::vector<Var>& v) {
                         return weighted_sum(t, ad::conv2d(v[0], v[1], v[2], stride, pad), 6);
                       },
                       [](Rng& r) {
                         return std::vector<Tensor>{random_tensor({2, 2, 6, 5}, r), random_tensor({3, 2, 3, 3}, r),
                                                    random_tensor({1, 1, 1, 3}, r)};
                       }});
    }
  cases.push_back({"conv2d_no_bias",
                   [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::conv2d(v[0], v[1], Var{}, 1, 1), 7); },
                   [](Rng& r) { return std::vector<Tensor>{random_tensor({1, 3, 4, 4}, r), random_tensor({2, 3, 3, 3}, r)}; }});
  cases.push_back({"space_to_depth", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::space_to_depth(v[0], 2), 8); },
                   one({1, 1, 4, 4})});
  cases.push_back({"depth_to_space", [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::depth_to_space(v[0], 2), 9); },
                   one({2, 8, 3, 2})});
  cases.push_back({"upsample_nearest",
                   [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::upsample_nearest(v[0], 3), 10); },
                   one({1, 2, 3, 2})});
  cases.push_back({"concat_channels",
                   [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, ad::concat_channels(v[0], v[1]), 11); },
                   [](Rng& r) { return std::vector<Tensor>{random_tensor({2, 2, 3, 3}, r), random_tensor({2, 3, 3, 3}, r)}; }});
  cases.push_back({"inverse_depth_squash",
                   [](Tape& t, const std::vector<Var>& v) {
                     return weighted_sum(t, ad::inverse_depth_squash(v[0], 0.015, 0.06), 12);
                   },
                   [s](Rng& r) { return std::vector<Tensor>{random_tensor(s, r, -4, 4)}; }});
  cases.push_back({"masked_l1",
                   [](Tape&, const std::vector<Var>& v) {
                     // Inputs lie in [-1, 1], so no residual comes near the kink.
                     Tensor target(v[0].shape());
                     std::vector<std::uint8_t> mask(target.size());
                     for (std::size_t i = 0; i < target.size(); ++i) {
                       target[i] = i % 2 ? 2.0 : -2.0;
                       mask[i] = i % 3 != 0;
                     }
                     return ad::masked_l1(v[0], target, mask);
                   },
                   one(s)});
  return cases;
}

/// Two-level networks of both variants on 16 x 16 inputs. Weights come
/// from the network's own seeded initialisation and biases are drawn in
/// +-0.2, which keeps the output head away from saturation where central
/// differences drown in roundoff.
inline std::vector<GradientCase> network_cases() {
  std::vector<GradientCase> cases;
  for (auto variant : {net::Variant::kSkipNet, net::Variant::kPackNetMini}) {
    net::NetworkSpec spec;
    spec.variant = variant;
    spec.base_channels = 2;
    spec.depth_levels = 2;
    const net::DepthNet shape_source(spec, 0);
    cases.push_back({std::string("network_") + net::to_string(variant),
                     [spec, shape_source](Tape& t, const std::vector<Var>& v) {
                       const Var image = v[0];
                       const std::vector<Var> params(v.begin() + 1, v.end());
                       return detail::weighted_sum(t, shape_source.run(image, params), 13);
                     },
                     [spec](Rng& r) {
                       std::vector<Tensor> in{random_tensor({1, 1, 16, 16}, r, 0.0, 1.0)};
                       const net::DepthNet init(spec, r.next());
                       for (const auto& p : init.params())
                         in.push_back(p.name.ends_with(".b") ? random_tensor(p.value.shape(), r, -0.2, 0.2) : p.value);
                       return in;
                     }});
  }
  return cases;
}

}  // namespace tacdepth::testing
