// SPDX-License-Identifier: BSD-3-Clause
#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dynvio/reloc/relocalise.hpp"
#include "sim_helpers.hpp"

using namespace dynvio;

namespace {

CameraIntrinsics camera(int w = 160, int h = 120) {
  CameraIntrinsics K;
  K.fx = K.fy = 150.0;
  K.cx = (w - 1) / 2.0;
  K.cy = (h - 1) / 2.0;
  K.width = w;
  K.height = h;
  K.baseline = 0.1;
  K.sigma_xy = 0.5;
  K.sigma_z = 0.05;
  return K;
}

Descriptor randomDescriptor(std::mt19937_64& rng) { return {rng(), rng(), rng(), rng()}; }

Pose randomPose(std::mt19937_64& rng, double t_scale, double r_scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Pose(expSO3(r_scale * Eigen::Vector3d(n(rng), n(rng), n(rng))),
              t_scale * Eigen::Vector3d(n(rng), n(rng), n(rng)));
}

}  // namespace

TEST(Features, HammingDistance) {
  Descriptor a{}, b{};
  EXPECT_EQ(hammingDistance(a, b), 0);
  b[0] = 0b1011;
  b[3] = 1ull << 63;
  EXPECT_EQ(hammingDistance(a, b), 4);
}

TEST(Features, UniformRegionHasNone) {
  const auto K = camera();
  const ImageF img(K.width, K.height, 0.5f), depth(K.width, K.height, 1.0f);
  EXPECT_TRUE(detectFeatures(img, depth, Mask(K.width, K.height, 1), K).empty());
}

// 10 px squares starting at (40, 30): pixel i covers [i - 0.5, i + 0.5], so
// interior corners sit at (39.5 + 10 a, 29.5 + 10 b).
TEST(Features, CheckerboardCornersNearAnalyticLocations) {
  const auto K = camera();
  ImageF img(K.width, K.height, 0.5f);
  for (int y = 30; y < 90; ++y)
    for (int x = 40; x < 120; ++x) img(x, y) = ((x - 40) / 10 + (y - 30) / 10) % 2 ? 0.9f : 0.1f;
  const ImageF depth(K.width, K.height, 1.0f);
  const auto f = detectFeatures(img, depth, Mask(K.width, K.height, 1), K);
  int near_corner = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double best = 1e9;
    for (int a = 1; a < 8; ++a)
      for (int b = 1; b < 6; ++b)
        best = std::min(best, (f.keypoints[i] - Eigen::Vector2d(39.5 + 10 * a, 29.5 + 10 * b)).norm());
    near_corner += best < 1.0;
  }
  EXPECT_GE(near_corner, 4);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_GT(f.points[i].z(), 0.0);
    EXPECT_NEAR(f.points[i].z(), 1.0, 1e-6);
  }
}

TEST(Features, InvalidDepthExcluded) {
  const auto K = camera();
  ImageF img(K.width, K.height, 0.5f);
  for (int y = 30; y < 90; ++y)
    for (int x = 40; x < 120; ++x) img(x, y) = ((x - 40) / 10 + (y - 30) / 10) % 2 ? 0.9f : 0.1f;
  ImageF depth(K.width, K.height, 1.0f);
  for (int y = 0; y < K.height; ++y)
    for (int x = 0; x < 80; ++x) depth(x, y) = 0.0f;
  const auto f = detectFeatures(img, depth, Mask(K.width, K.height, 1), K);
  EXPECT_FALSE(f.empty());
  for (const auto& z : f.keypoints) EXPECT_GE(std::lround(z.x()), 80);
}

TEST(Features, RotatedImageStillMatches) {
  const auto K = sim::defaultCalibration().camera;
  const Pose T_WO(Quaternion::Identity(), {0.0, 0.0, 1.2});
  const auto f = sim::renderFrame(dynvio::testing::objectScene(T_WO), 0.0, Pose(), K);
  const Mask m = dynvio::testing::labelMask(f.instance, 1);
  const auto a = detectFeatures(f.intensity, f.depth, m, K);
  // in-plane rotation of the camera by 30 degrees about its axis
  const Pose T_WC(Quaternion(Eigen::AngleAxisd(30.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ())),
                  Eigen::Vector3d::Zero());
  const auto g = sim::renderFrame(dynvio::testing::objectScene(T_WO), 0.0, T_WC, K);
  const auto b = detectFeatures(g.intensity, g.depth, dynvio::testing::labelMask(g.instance, 1), K);
  ASSERT_GE(a.size(), 20u);
  const MatchSet ms = matchFeatures(a, b);
  int correct = 0;
  for (const auto& [i, j] : ms.pairs) {
    const Eigen::Vector3d p = T_WC.inverse() * a.points[i];
    correct += (*K.project(p) - b.keypoints[j]).norm() < 2.0;
  }
  EXPECT_GE(correct, 12);
  EXPECT_GE(correct, static_cast<int>(0.8 * ms.size()));
}

TEST(Matching, IdenticalSetsMatchFully) {
  std::mt19937_64 rng(1);
  FeatureSet s;
  for (int i = 0; i < 30; ++i) {
    s.keypoints.emplace_back(i, i);
    s.descriptors.push_back(randomDescriptor(rng));
    s.points.emplace_back(0, 0, 1);
  }
  const auto m = matchFeatures(s, s);
  ASSERT_EQ(m.size(), 30u);
  for (std::size_t k = 0; k < m.size(); ++k) {
    EXPECT_EQ(m.pairs[k].first, m.pairs[k].second);
    EXPECT_EQ(m.distances[k], 0);
  }
  const auto km = matchAgainstKeyframes({{Pose(), s}}, s);
  ASSERT_TRUE(km.has_value());
  EXPECT_EQ(km->matches.size(), 30u);
}

TEST(Matching, RandomDescriptorsGiveNoCandidate) {
  std::mt19937_64 rng(2);
  int candidates = 0;
  for (int trial = 0; trial < 200; ++trial) {
    FeatureSet a, b;
    for (int i = 0; i < 50; ++i) {
      a.keypoints.emplace_back(0, 0);
      a.descriptors.push_back(randomDescriptor(rng));
      a.points.emplace_back(0, 0, 1);
      b.keypoints.emplace_back(0, 0);
      b.descriptors.push_back(randomDescriptor(rng));
      b.points.emplace_back(0, 0, 1);
    }
    candidates += matchAgainstKeyframes({{Pose(), a}}, b).has_value();
  }
  EXPECT_EQ(candidates, 0);
}

TEST(Matching, BestKeyframeByCount) {
  std::mt19937_64 rng(3);
  FeatureSet live;
  for (int i = 0; i < 40; ++i) {
    live.keypoints.emplace_back(i, 0);
    live.descriptors.push_back(randomDescriptor(rng));
    live.points.emplace_back(0, 0, 1);
  }
  auto keyframeSharing = [&](int shared) {
    FeatureSet kf;
    for (int i = 0; i < 25; ++i) {
      kf.keypoints.emplace_back(i, 0);
      kf.descriptors.push_back(i < shared ? live.descriptors[i] : randomDescriptor(rng));
      kf.points.emplace_back(0, 0, 1);
    }
    return kf;
  };
  const std::vector<ObjectKeyframe> kfs{{Pose(), keyframeSharing(5)}, {Pose(), keyframeSharing(20)}};
  const auto km = matchAgainstKeyframes(kfs, live);
  ASSERT_TRUE(km.has_value());
  EXPECT_EQ(km->keyframe, 1);
  EXPECT_EQ(km->matches.size(), 20u);
  MatchParams strict;
  strict.min_matches = 21;
  EXPECT_FALSE(matchAgainstKeyframes(kfs, live, strict).has_value());
}

TEST(ShouldAttempt, RatioAndBorder) {
  const auto K = camera(320, 240);
  ObjectModel m;
  m.S_max = 100;
  Detection d;
  d.centroid = Eigen::Vector2d(160, 120);
  d.size = 80;
  EXPECT_TRUE(shouldAttempt(d, m, K, RelocParams{}));
  d.size = 50;
  EXPECT_FALSE(shouldAttempt(d, m, K, RelocParams{}));
  d.size = 70;
  EXPECT_FALSE(shouldAttempt(d, m, K, RelocParams{}));  // strictly greater
  d.size = 100;
  d.centroid = Eigen::Vector2d(5, 120);
  EXPECT_FALSE(shouldAttempt(d, m, K, RelocParams{}));
  d.centroid = Eigen::Vector2d(160, 236);
  EXPECT_FALSE(shouldAttempt(d, m, K, RelocParams{}));
  d.centroid = Eigen::Vector2d(20, 20);
  EXPECT_TRUE(shouldAttempt(d, m, K, RelocParams{}));
  m.S_max = 0;
  EXPECT_FALSE(shouldAttempt(d, m, K, RelocParams{}));
}

TEST(ShouldAttempt, MonotoneInSize) {
  const auto K = camera(320, 240);
  ObjectModel m;
  m.S_max = 500;
  Detection d;
  d.centroid = Eigen::Vector2d(100, 100);
  bool prev = false;
  for (int s = 0; s <= 1000; ++s) {
    d.size = s;
    const bool now = shouldAttempt(d, m, K, RelocParams{});
    EXPECT_TRUE(!prev || now) << s;
    prev = now;
  }
  EXPECT_TRUE(prev);
}

namespace {

struct PnpCase {
  std::vector<Eigen::Vector3d> p;
  std::vector<Eigen::Vector2d> z;
};

PnpCase syntheticPnp(const Pose& T_CR_CL, const CameraIntrinsics& K, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.2 * K.width, 0.8 * K.width), uy(0.2 * K.height, 0.8 * K.height),
      ud(0.8, 1.6);
  PnpCase c;
  const Pose T_CL_CR = T_CR_CL.inverse();
  while (static_cast<int>(c.p.size()) < n) {
    const Eigen::Vector3d p = *K.backproject(Eigen::Vector2d(ux(rng), uy(rng)), ud(rng));
    const auto z = K.project(T_CL_CR * p);
    if (!z || !K.inImage(*z)) continue;
    c.p.push_back(p);
    c.z.push_back(*z);
  }
  return c;
}

}  // namespace

TEST(Pnp, ZeroMotionGivesIdentity) {
  const auto K = camera(320, 240);
  std::mt19937_64 rng(4);
  const auto c = syntheticPnp(Pose(), K, 30, rng);
  const auto r = solvePnp(c.p, c.z, K, 99);
  ASSERT_TRUE(r.has_value());
  const auto e = poseError(r->T_CR_CL, Pose());
  EXPECT_LT(e.translation, 1e-9);
  EXPECT_LT(e.rotation, 1e-9);
  EXPECT_EQ(r->inliers.size(), 30u);
}

TEST(Pnp, RecoversTenCentimetreTenDegreeOffset) {
  const auto K = camera(320, 240);
  std::mt19937_64 rng(5);
  const Pose truth(Quaternion(Eigen::AngleAxisd(10.0 * M_PI / 180.0,
                                                Eigen::Vector3d(0.3, 1.0, 0.2).normalized())),
                   Eigen::Vector3d(0.1, 0.0, 0.0));
  const auto c = syntheticPnp(truth, K, 40, rng);
  const auto r = solvePnp(c.p, c.z, K, 7);
  ASSERT_TRUE(r.has_value());
  const auto e = poseError(r->T_CR_CL, truth);
  EXPECT_LT(e.translation, 1e-6);
  EXPECT_LT(e.rotation, 1e-6);
}

TEST(Pnp, HalfGrossOutliers) {
  const auto K = camera(320, 240);
  std::mt19937_64 rng(6);
  const Pose truth = randomPose(rng, 0.05, 0.1);
  auto c = syntheticPnp(truth, K, 60, rng);
  std::uniform_real_distribution<double> ux(0, K.width - 1), uy(0, K.height - 1);
  for (int i = 1; i < 60; i += 2) c.z[i] = Eigen::Vector2d(ux(rng), uy(rng));
  const auto r = solvePnp(c.p, c.z, K, 8);
  ASSERT_TRUE(r.has_value());
  const auto e = poseError(r->T_CR_CL, truth);
  EXPECT_LT(e.translation, 1e-3);
  EXPECT_LT(e.rotation, 1e-3);
  EXPECT_GE(r->inliers.size(), 28u);
}

TEST(Pnp, PermutationInvariant) {
  const auto K = camera(320, 240);
  std::mt19937_64 rng(9);
  const Pose truth = randomPose(rng, 0.1, 0.15);
  auto c = syntheticPnp(truth, K, 40, rng);
  std::uniform_real_distribution<double> ux(0, K.width - 1), uy(0, K.height - 1);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int i = 0; i < 40; ++i) {
    if (i % 3 == 0) c.z[i] = Eigen::Vector2d(ux(rng), uy(rng));
    else c.z[i] += Eigen::Vector2d(noise(rng), noise(rng));
  }
  const auto base = solvePnp(c.p, c.z, K, 1234);
  ASSERT_TRUE(base.has_value());
  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[i] = i;
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    PnpCase q;
    for (int i : perm) {
      q.p.push_back(c.p[i]);
      q.z.push_back(c.z[i]);
    }
    const auto r = solvePnp(q.p, q.z, K, 1234);
    ASSERT_TRUE(r.has_value());
    EXPECT_LT((r->T_CR_CL.matrix() - base->T_CR_CL.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    std::vector<int> mapped;
    for (int i : r->inliers) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, base->inliers);
  }
}

TEST(Pnp, TooFewInliersFails) {
  const auto K = camera(320, 240);
  std::mt19937_64 rng(10);
  auto c = syntheticPnp(Pose(), K, 20, rng);
  std::uniform_real_distribution<double> ux(0, K.width - 1), uy(0, K.height - 1);
  for (int i = 5; i < 20; ++i) c.z[i] = Eigen::Vector2d(ux(rng), uy(rng));
  EXPECT_FALSE(solvePnp(c.p, c.z, K, 3).has_value());
}

namespace {

// Object model fused from exact renderings around the first pose.
struct RelocFixture {
  CameraIntrinsics K = sim::defaultCalibration().camera;
  Pose T_WO0 = Pose(Quaternion::Identity(), {0.0, 0.0, 1.3});
  ObjectModel model;

  RelocFixture() {
    model.id = 1;
    model.T_WO = T_WO0;
    const auto scene = dynvio::testing::objectScene(T_WO0);
    for (double a : {-0.15, -0.05, 0.05, 0.15}) {
      const Pose T_WC(Quaternion(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY())),
                      {-1.3 * std::sin(a), 0.0, 1.3 - 1.3 * std::cos(a)});
      const auto f = sim::renderFrame(scene, 0.0, T_WC, K);
      const Mask m = dynvio::testing::labelMask(f.instance, 1);
      IntegrationInput in;
      in.camera = &K;
      in.depth = &f.depth;
      in.intensity = &f.intensity;
      in.mask = &m;
      integrateFrame(model.volume, T_WO0.inverse() * T_WC, in);
      if (a == -0.05) {
        maybeAddKeyframe(model, T_WC.inverse() * T_WO0, detectFeatures(f.intensity, f.depth, m, K),
                         10.0);
      }
    }
  }
};

}  // namespace

TEST(Verify, GroundTruthAcceptedOffsetRejected) {
  RelocFixture fx;
  // the object has moved; camera at the origin
  const Pose T_WO1(Quaternion(Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitZ())), {0.1, 0.05, 1.25});
  const auto f = sim::renderFrame(dynvio::testing::objectScene(T_WO1), 0.0, Pose(), fx.K);
  const LivePyramid live = buildLivePyramid(fx.K, dynvio::testing::toFrame(f), 3);
  const auto masks = maskPyramid(dynvio::testing::labelMask(f.instance, 1), 3);
  const TrackingParams tp;
  const RelocParams rp;

  const auto good = verifyCandidate(fx.model, T_WO1, live, masks, Pose(), fx.K, tp, rp);
  EXPECT_TRUE(good.accepted);
  EXPECT_LT(good.stats.mean_abs, 2e-3);
  EXPECT_GT(good.stats.validRatio(), 0.8);
  EXPECT_LT(poseError(good.T_CLO, T_WO1).translation, 5e-3);

  const Pose off(T_WO1.rotation(), T_WO1.translation() + Eigen::Vector3d(0.2, 0.0, 0.0));
  const auto bad = verifyCandidate(fx.model, off, live, masks, Pose(), fx.K, tp, rp);
  EXPECT_FALSE(bad.accepted);
}

TEST(Relocalise, EndToEndFromKeyframe) {
  RelocFixture fx;
  ASSERT_EQ(fx.model.keyframes.size(), 1u);
  ASSERT_GE(fx.model.keyframes[0].features.size(), 20u);
  const Pose T_WO1(Quaternion(Eigen::AngleAxisd(0.2, Eigen::Vector3d::UnitZ())), {0.1, 0.05, 1.25});
  const auto f = sim::renderFrame(dynvio::testing::objectScene(T_WO1), 0.0, Pose(), fx.K);
  const Mask m = dynvio::testing::labelMask(f.instance, 1);
  const auto feats = detectFeatures(f.intensity, f.depth, m, fx.K);
  const auto cand = proposeRelocalisation(fx.model, feats, fx.K, 42, RelocParams{});
  ASSERT_TRUE(cand.has_value());
  // a near-planar keyframe leaves PnP loosely conditioned; the dense
  // verification step pulls the candidate in
  const auto e0 = poseError(cand->T_CLO, T_WO1);
  EXPECT_LT(e0.translation, 0.05);
  EXPECT_LT(e0.rotation, 15.0 * M_PI / 180.0);
  const LivePyramid live = buildLivePyramid(fx.K, dynvio::testing::toFrame(f), 3);
  const auto v = verifyCandidate(fx.model, cand->T_CLO, live, maskPyramid(m, 3), Pose(), fx.K,
                                 TrackingParams{}, RelocParams{});
  ASSERT_TRUE(v.accepted);
  const auto e = poseError(v.T_CLO, T_WO1);
  EXPECT_LT(e.translation, 5e-3);
  EXPECT_LT(e.rotation, 0.5 * M_PI / 180.0);
}
