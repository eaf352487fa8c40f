#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "gradient_cases.hpp"
#include "tacdepth/autodiff/ops.hpp"
#include "tacdepth/depthnet/network.hpp"
#include "tacdepth/depthnet/train.hpp"
#include "temp_dir.hpp"

using namespace tacdepth;
using namespace tacdepth::net;

namespace {

NetworkSpec tiny(Variant v = Variant::kSkipNet) {
  NetworkSpec s;
  s.variant = v;
  s.base_channels = 4;
  s.depth_levels = 2;
  return s;
}

GrayImage random_image(int size, Rng& rng) {
  GrayImage g(size, size);
  for (auto& x : g.data()) x = rng.uniform();
  return g;
}

std::vector<TrainingExample> toy_set(int count, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> out;
  for (int k = 0; k < count; ++k) {
    TrainingExample e{random_image(size, rng), DepthMap(size, size)};
    for (std::size_t i = 0; i < e.depth.size(); ++i)
      if (rng.uniform() < 0.8) e.depth.set(i, 0.02 + 0.02 * e.image[i]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

TEST(Forward, ZeroPreActivationGivesHarmonicMidpoint) {
  const NetworkSpec spec = tiny();
  DepthNet net(spec, 1);
  for (auto& p : net.params()) p.value.fill(0.0);
  Rng rng(1);
  const DepthMap d = predict(net, random_image(16, rng));
  const double expected = 2.0 / (1.0 / spec.output_range[0] + 1.0 / spec.output_range[1]);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d.depth(i), expected, 1e-15);
}

TEST(Forward, OutputShapeAndRange) {
  Rng rng(2);
  for (auto v : {Variant::kSkipNet, Variant::kPackNetMini}) {
    DepthNet net(tiny(v), 3);
    // Blow up every weight so the logits saturate.
    for (auto& p : net.params())
      for (double& x : p.value.storage()) x *= 1e3;
    const DepthMap d = predict(net, random_image(32, rng));
    EXPECT_EQ(d.width(), 32);
    EXPECT_EQ(d.height(), 32);
    EXPECT_EQ(d.valid_count(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_GE(d.depth(i), 0.015);
      EXPECT_LE(d.depth(i), 0.06);
    }
  }
}

TEST(Forward, DivisibilityViolationFailsFast) {
  Rng rng(3);
  EXPECT_THROW(predict(DepthNet(tiny(Variant::kPackNetMini), 1), random_image(18, rng)), ShapeError);
  EXPECT_THROW(predict(DepthNet(tiny(Variant::kSkipNet), 1), random_image(18, rng)), ShapeError);
}

class NetworkGradients : public ::testing::TestWithParam<std::size_t> {};

TEST_P(NetworkGradients, MatchFiniteDifferences) {
  const auto c = tacdepth::testing::network_cases()[GetParam()];
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, c.name));
    const auto r = tacdepth::testing::check_gradients(c.loss, c.inputs(rng));
    EXPECT_LE(r.worst_relative_error, 1e-5) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(BothVariants, NetworkGradients, ::testing::Values(0, 1),
                         [](const auto& info) { return tacdepth::testing::network_cases()[info.param].name; });

TEST(MaskedL1, Examples) {
  DepthMap pred(2, 1), gt(2, 1);
  pred.set(0, 0, 2.0);
  pred.set(1, 0, 5.0);
  gt.set(0, 0, 3.0);
  EXPECT_EQ(masked_l1_loss(pred, gt), 1.0);
  EXPECT_EQ(masked_l1_loss(pred, pred), 0.0);
  EXPECT_THROW(masked_l1_loss(pred, DepthMap(2, 1)), DomainError);
  EXPECT_THROW(masked_l1_loss(pred, DepthMap(1, 2)), ShapeError);
}

TEST(MaskedL1, InvalidPixelsNeverMatter) {
  Rng rng(4);
  ad::Tensor target({1, 1, 4, 4});
  std::vector<std::uint8_t> mask(16);
  for (std::size_t i = 0; i < 16; ++i) {
    target[i] = rng.uniform(0.02, 0.04);
    mask[i] = i % 3 == 0;
  }
  const ad::Tensor x = tacdepth::testing::random_tensor({1, 1, 4, 4}, rng, 0.02, 0.04);
  auto run = [&](const ad::Tensor& t) {
    ad::Tape tape;
    const ad::Var p = tape.parameter(x);
    const ad::Var l = ad::masked_l1(p, t, mask);
    tape.backward(l);
    return std::pair{l.value()[0], tape.grad(p).to_vector()};
  };
  ad::Tensor perturbed = target;
  for (std::size_t i = 0; i < 16; ++i)
    if (!mask[i]) perturbed[i] = i % 2 ? std::numeric_limits<double>::quiet_NaN() : 1e6;
  EXPECT_EQ(run(target), run(perturbed));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ad::ParameterSet p;
  p.add("x", ad::Tensor::scalar(1.0));
  TrainConfig c;
  AdamState s;
  const std::vector<ad::Tensor> g{ad::Tensor::scalar(1.0)};
  adam_step(p, g, s, 1, 2e-4, c);
  EXPECT_NEAR(1.0 - p[0].value[0], 2e-4 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ad::ParameterSet p;
  p.add("x", ad::Tensor({1, 1, 2, 2}, std::vector<double>{1, -2, 3, 0.5}));
  const ad::ParameterSet before = p;
  TrainConfig c;
  AdamState s;
  const std::vector<ad::Tensor> g{ad::Tensor({1, 1, 2, 2})};
  for (long t = 1; t <= 100; ++t) adam_step(p, g, s, t, 1e-2, c);
  EXPECT_EQ(p, before);
  const std::vector<ad::Tensor> wrong{ad::Tensor({1, 1, 2, 1})};
  EXPECT_THROW(adam_step(p, wrong, s, 101, 1e-2, c), ShapeError);
}

TEST(Adam, LearningRateSchedule) {
  TrainConfig c;
  EXPECT_EQ(learning_rate(c, 0), 2e-4);
  EXPECT_EQ(learning_rate(c, 39), 2e-4);
  EXPECT_EQ(learning_rate(c, 40), 1e-4);
  EXPECT_EQ(learning_rate(c, 80), 5e-5);
}

TEST(Train, DeterministicPerSeed) {
  const auto data = toy_set(6, 16, 5);
  TrainConfig c;
  c.epochs = 4;
  c.lr = 1e-3;
  c.seed = 42;
  const auto a = train(tiny(), data, {}, c), b = train(tiny(), data, {}, c);
  ASSERT_EQ(a.log.size(), 4u);
  for (std::size_t e = 0; e < a.log.size(); ++e) EXPECT_EQ(a.log[e].train_loss, b.log[e].train_loss);
  EXPECT_EQ(a.net.params(), b.net.params());
  c.seed = 43;
  EXPECT_NE(train(tiny(), data, {}, c).log.back().train_loss, a.log.back().train_loss);
}

TEST(Train, ZeroLearningRateGivesConstantCurve) {
  const auto data = toy_set(5, 16, 6);
  TrainConfig c;
  c.epochs = 3;
  c.lr = 0.0;
  const auto r = train(tiny(), data, data, c);
  for (const auto& e : r.log) {
    EXPECT_NEAR(e.train_loss, r.log[0].train_loss, 1e-15);
    ASSERT_TRUE(e.val_loss.has_value());
    EXPECT_NEAR(*e.val_loss, r.log[0].train_loss, 1e-15);
  }
}

TEST(Train, ErrorsAreReported) {
  TrainConfig c;
  c.epochs = 2;
  EXPECT_THROW(train(tiny(), {}, {}, c), DomainError);
  auto data = toy_set(2, 16, 7);
  data[1].image[5] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(tiny(), data, {}, c);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.index(), 1);
  }
  TrainConfig bad;
  bad.adam_beta1 = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Checkpoint, ModelRoundTrip) {
  tacdepth::testing::TempDir dir;
  const DepthNet net(tiny(Variant::kPackNetMini), 8);
  save_model(net, dir / "m.ckpt");
  const DepthNet back = load_model(dir / "m.ckpt");
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(back.params(), net.params());
  Rng rng(9);
  const GrayImage img = random_image(16, rng);
  EXPECT_EQ(predict(back, img), predict(net, img));
  EXPECT_THROW(DepthNet(tiny(Variant::kSkipNet), net.params()), ShapeError);
}

TEST(Infer, FullResolutionIsDenseDeterministicAndFast) {
  const DepthNet net(NetworkSpec{}, 10);
  Rng rng(10);
  const GrayImage img = random_image(224, rng);
  const Inference a = infer(net, img), b = infer(net, img);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.depth.valid_count(), 224u * 224u);
  EXPECT_LE(a.seconds, 2.0);
}
