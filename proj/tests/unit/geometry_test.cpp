#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tacdepth/core/image.hpp"
#include "tacdepth/geometry/camera.hpp"
#include "tacdepth/geometry/pose.hpp"
#include "tacdepth/random.hpp"
#include "tacdepth/simulator/membrane.hpp"

using namespace tacdepth;
using geometry::contact_patch_mask;
using geometry::downsample;
using geometry::project;
using geometry::unproject;

namespace {

CameraIntrinsics cam224() { return {100.0, 100.0, 112.0, 112.0, 224, 224}; }

DepthMap random_map(int w, int h, std::uint64_t seed, double valid_rate = 0.7) {
  Rng rng(seed);
  DepthMap d(w, h);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (rng.uniform() < valid_rate) d.set(i, rng.uniform(0.015, 0.06));
  return d;
}

// Multi-source 4-neighbour distance from the set pixels of `seed`.
std::vector<int> manhattan_distance(const PixelMask& seed) {
  const int W = seed.width, H = seed.height;
  std::vector<int> dist(seed.bits.size(), 1 << 29);
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      if (!seed(u, v)) continue;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          auto& d = dist[static_cast<std::size_t>(y) * W + x];
          d = std::min(d, std::abs(x - u) + std::abs(y - v));
        }
    }
  return dist;
}

}  // namespace

TEST(Unproject, PrincipalPointMapsToOpticalAxis) {
  DepthMap d(224, 224);
  d.set(112, 112, 0.05);
  const PointCloud c = unproject(d, cam224());
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], Eigen::Vector3d(0, 0, 0.05));
}

TEST(Unproject, OffAxisPixel) {
  DepthMap d(224, 224);
  d.set(212, 112, 0.1);
  const PointCloud c = unproject(d, cam224());
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].x(), 0.1, 1e-15);
  EXPECT_EQ(c[0].y(), 0.0);
  EXPECT_EQ(c[0].z(), 0.1);
}

TEST(Unproject, AllInvalidGivesEmptyCloud) { EXPECT_TRUE(unproject(DepthMap(224, 224), cam224()).empty()); }

TEST(Unproject, DimensionMismatchIsAnError) { EXPECT_THROW(unproject(DepthMap(10, 10), cam224()), ShapeError); }

TEST(Unproject, ScalesLinearlyWithDepth) {
  const DepthMap d = random_map(224, 224, 3);
  DepthMap scaled(224, 224);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.valid(i)) scaled.set(i, 2.5 * d.depth(i));
  const PointCloud a = unproject(d, cam224()), b = unproject(scaled, cam224());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE((2.5 * a[i] - b[i]).norm(), 1e-15);
}

TEST(Project, RoundTripOnPixelCenters) {
  const auto cam = cam224();
  const DepthMap d = random_map(224, 224, 5);
  double worst = 0.0;
  for (int v = 0; v < 224; ++v)
    for (int u = 0; u < 224; ++u) {
      if (!d.valid(u, v)) continue;
      const double z = d.depth(u, v);
      const auto px = project({(u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z}, cam);
      worst = std::max({worst, std::abs(px.u - u), std::abs(px.v - v)});
    }
  EXPECT_LE(worst, 1e-9);
}

TEST(Project, OpticalAxisAndDegenerateDepth) {
  const auto px = project({0, 0, 0.04}, cam224());
  EXPECT_EQ(px.u, 112.0);
  EXPECT_EQ(px.v, 112.0);
  EXPECT_THROW(project({0.01, 0, 0}, cam224()), DomainError);
}

TEST(ContactMask, IdenticalMapsGiveEmptyMask) {
  const DepthMap d = random_map(32, 32, 8);
  EXPECT_TRUE(contact_patch_mask(d, d, 0.001).empty());
}

TEST(ContactMask, ShapeMismatchIsAnError) {
  EXPECT_THROW(contact_patch_mask(DepthMap(3, 3), DepthMap(3, 4), 0.001), ShapeError);
}

TEST(ContactMask, SphereIndentLiesNearTrueContact) {
  sim::SensorConfig cfg;
  const DepthMap rest = sim::rest_surface(cfg);
  const double r = 0.01;
  const ShapePrimitive sphere{ShapeDims::sphere(r),
                              Pose(Eigen::Vector3d(0, 0, cfg.membrane.apex_depth - 0.005 + r), Eigen::Quaterniond::Identity())};
  const auto ind = sim::indent_with_contact(rest, std::span<const ShapePrimitive>(&sphere, 1), cfg);
  const PixelMask mask = contact_patch_mask(ind.depth, rest, 0.001);
  ASSERT_FALSE(mask.empty());
  ASSERT_FALSE(ind.contact.empty());
  const auto dist = manhattan_distance(ind.contact);
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (mask.bits[i]) {
      EXPECT_LE(dist[i], cfg.relaxation_iterations) << "pixel " << i;
    }

  // Masked points stay on the membrane footprint.
  for (const auto& p : geometry::unproject_masked(ind.depth, cfg.intrinsics, mask)) {
    EXPECT_GE(p.z(), cfg.rest_depth_range[0]);
    EXPECT_LE(p.z(), cfg.rest_depth_range[1]);
  }

  EXPECT_TRUE(contact_patch_mask(ind.depth, rest, 0.0051).empty());
}

TEST(ContactMask, MonotoneInThreshold) {
  const DepthMap ref = random_map(40, 40, 1, 1.0);
  const DepthMap cur = random_map(40, 40, 2, 0.9);
  const PixelMask lo = contact_patch_mask(cur, ref, 0.001), hi = contact_patch_mask(cur, ref, 0.01);
  for (std::size_t i = 0; i < lo.bits.size(); ++i)
    if (hi.bits[i]) {
      EXPECT_TRUE(lo.bits[i]);
    }
  EXPECT_GT(lo.count(), hi.count());
}

TEST(Downsample, ExactCountAndMembership) {
  Rng rng(2);
  PointCloud cloud;
  for (int i = 0; i < 3000; ++i) cloud.emplace_back(i, rng.uniform(), rng.uniform());
  const PointCloud out = downsample(cloud, 1500, 99);
  ASSERT_EQ(out.size(), 1500u);
  std::set<int> ids;
  for (const auto& p : out) {
    const int i = static_cast<int>(p.x());
    ASSERT_EQ(cloud[i], p);
    ids.insert(i);
  }
  EXPECT_EQ(ids.size(), 1500u);
  EXPECT_EQ(downsample(cloud, 1500, 99), out);
  EXPECT_NE(downsample(cloud, 1500, 100), out);
}

TEST(Downsample, SmallCloudUnchanged) {
  const PointCloud c{{0, 0, 1}, {1, 2, 3}};
  EXPECT_EQ(downsample(c, 1500, 1), c);
  EXPECT_THROW(downsample(c, 0, 1), DomainError);
}

TEST(Pose, GroupLaws) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector3d axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Pose a = Pose::from_axis_angle({rng.uniform(), rng.uniform(), rng.uniform()}, axis, rng.uniform(-3, 3));
    const Pose b = Pose::from_axis_angle({rng.uniform(), rng.uniform(), rng.uniform()}, axis.unitOrthogonal(), 0.7);
    const Eigen::Vector3d p(rng.uniform(), rng.uniform(), rng.uniform());
    EXPECT_LE(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 1e-14);
    EXPECT_LE((a.inverse().apply(a.apply(p)) - p).norm(), 1e-14);
    EXPECT_LE((a.apply_inverse(a.apply(p)) - p).norm(), 1e-14);
    EXPECT_TRUE(a.is_unit());
    const Pose c = Pose::from_vector(a.to_vector());
    EXPECT_EQ(c.to_vector(), a.to_vector());
  }
}
