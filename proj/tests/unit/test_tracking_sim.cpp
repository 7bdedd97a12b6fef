// SPDX-License-Identifier: BSD-3-Clause
// Camera tracking on simulator frames with an exact (rendered) reference.
#include <cmath>

#include <gtest/gtest.h>

#include "dynvio/manifold/so3.hpp"
#include "dynvio/sim/scenarios.hpp"
#include "dynvio/tracking/tracker.hpp"
#include "sim_helpers.hpp"

using namespace dynvio;
using dynvio::testing::exactView;

namespace {

struct TrackingCase {
  CameraIntrinsics K;
  ReferencePyramid ref;
  LivePyramid live;
  std::vector<Mask> masks;
  PreintegratedBatch batch;
  ImuNoiseParams imu;
  StateVector x_R, x_L;
  MarginalizationPrior prior;
};

TrackingCase makeCase(const std::string& scenario, int frame, const sim::ScenarioOptions& opt = {}) {
  const auto s = sim::makeScenario(scenario, opt);
  TrackingCase c;
  c.K = s.calib.camera;
  const double t0 = s.frameTime(frame - 1), t1 = s.frameTime(frame);
  const Pose T0 = s.camera->pose(t0), T1 = s.camera->pose(t1);
  const auto f0 = sim::renderFrame(s.scene, t0, T0, c.K);
  const auto f1 = sim::renderFrame(s.scene, t1, T1, c.K);
  const Mask all(c.K.width, c.K.height, 1);
  c.ref = buildReferencePyramid(c.K, f0.intensity, exactView(f0, c.K, T0), all, T0, Pose(), 3);
  Frame live{std::llround(t1 * 1e9), f1.intensity, f1.depth, Mask(c.K.width, c.K.height, 0)};
  for (std::size_t i = 0; i < live.mask.size(); ++i) live.mask[i] = live.depth[i] > 0.0f;
  c.live = buildLivePyramid(c.K, live, 3);
  c.masks = maskPyramid(live.mask, 3);
  const auto stream = sim::synthesizeImu(*s.camera, s.calib.T_SC, 200.0, 0.0, s.duration, s.scene.g_W);
  c.batch = makeBatch(stream, std::llround(t0 * 1e9), std::llround(t1 * 1e9), s.calib.T_SC);
  c.imu.g_W = s.scene.g_W;
  c.x_R = sim::trueState(*s.camera, s.calib.T_SC, t0);
  c.x_L = sim::trueState(*s.camera, s.calib.T_SC, t1);
  c.prior = initialPrior(c.x_R);
  return c;
}

double rotationError(const Quaternion& a, const Quaternion& b) {
  return logSO3(a * b.conjugate()).norm();
}

}  // namespace

// The first 0.5 s of static-room are at rest, so every residual is exactly
// zero at the ground truth.
TEST(CameraTracking, GroundTruthIsFixedPoint) {
  auto c = makeCase("static-room", 4);
  const auto r = solveTracking(c.x_R, c.x_L, c.ref, c.live, c.masks, c.batch, c.imu, c.prior, c.K,
                               TrackingParams{});
  EXPECT_FALSE(r.degenerate);
  EXPECT_LT((r.x_L.r_WC - c.x_L.r_WC).norm(), 1e-6);
  EXPECT_LT(rotationError(r.x_L.q_WC, c.x_L.q_WC), 1e-6);
  EXPECT_LT((r.x_R.r_WC - c.x_R.r_WC).norm(), 1e-6);
}

TEST(CameraTracking, RecoversPerturbedInitialisation) {
  for (int frame : {3, 6}) {
    auto c = makeCase("static-room", frame);
    Perturbation d = Perturbation::Zero();
    d.segment<3>(idx::kPos) = Eigen::Vector3d(0.02, -0.01, 0.01).normalized() * 0.02;
    d.segment<3>(idx::kRot) = Eigen::Vector3d(-0.3, 1.0, 0.5).normalized() * (2.0 * M_PI / 180.0);
    const StateVector init = boxplus(c.x_L, d);
    const auto r = solveTracking(c.x_R, init, c.ref, c.live, c.masks, c.batch, c.imu, c.prior,
                                 c.K, TrackingParams{});
    EXPECT_LT((r.x_L.r_WC - c.x_L.r_WC).norm(), 1e-4) << frame;
    EXPECT_LT(rotationError(r.x_L.q_WC, c.x_L.q_WC), 1e-4) << frame;
  }
}

// While moving, bilinear resampling of the live image and intensity creases
// leave small residuals at the ground truth, so the optimum sits slightly off.
TEST(CameraTracking, RecoversPerturbedInitialisationWhileMoving) {
  for (int frame : {20, 45, 80}) {
    auto c = makeCase("static-room", frame);
    Perturbation d = Perturbation::Zero();
    d.segment<3>(idx::kPos) = Eigen::Vector3d(-0.01, 0.015, 0.005).normalized() * 0.02;
    d.segment<3>(idx::kRot) = Eigen::Vector3d(0.6, -0.2, 1.0).normalized() * (2.0 * M_PI / 180.0);
    const auto r = solveTracking(c.x_R, boxplus(c.x_L, d), c.ref, c.live, c.masks, c.batch, c.imu,
                                 c.prior, c.K, TrackingParams{});
    EXPECT_LT((r.x_L.r_WC - c.x_L.r_WC).norm(), 1e-3) << frame;
    EXPECT_LT(rotationError(r.x_L.q_WC, c.x_L.q_WC), 1e-3) << frame;
  }
}

TEST(CameraTracking, CostNonIncreasingWithinLevel) {
  auto c = makeCase("static-room", 60);
  Perturbation d = Perturbation::Zero();
  d.segment<3>(idx::kPos) = Eigen::Vector3d(0.015, 0.0, -0.01);
  d.segment<3>(idx::kRot) = Eigen::Vector3d(0.0, 0.02, 0.01);
  const auto r = solveTracking(c.x_R, boxplus(c.x_L, d), c.ref, c.live, c.masks, c.batch, c.imu,
                               c.prior, c.K, TrackingParams{});
  ASSERT_GT(r.costs.size(), 3u);
  for (std::size_t i = 1; i < r.costs.size(); ++i) {
    if (r.level_of_cost[i] == r.level_of_cost[i - 1]) EXPECT_LE(r.costs[i], r.costs[i - 1]);
  }
}

TEST(CameraTracking, FullyMaskedFallsBackToImu) {
  auto c = makeCase("static-room", 40);
  for (auto& m : c.masks) m.fill(0);
  Perturbation d = Perturbation::Zero();
  d[0] = 0.05;
  const auto r = solveTracking(c.x_R, boxplus(c.x_L, d), c.ref, c.live, c.masks, c.batch, c.imu,
                               c.prior, c.K, TrackingParams{});
  EXPECT_TRUE(r.degenerate);
  const auto pred = propagate(c.x_R, c.batch, c.imu).state;
  EXPECT_LT(boxminus(r.x_L, pred).norm(), 1e-12);
}

TEST(CameraTracking, TextureFreeStillTracksWithGeometry) {
  sim::ScenarioOptions opt;
  opt.texture_free = true;
  auto c = makeCase("static-room", 45, opt);
  Perturbation d = Perturbation::Zero();
  d.segment<3>(idx::kPos) = Eigen::Vector3d(0.01, 0.01, 0.0);
  const auto r = solveTracking(c.x_R, boxplus(c.x_L, d), c.ref, c.live, c.masks, c.batch, c.imu,
                               c.prior, c.K, TrackingParams{});
  EXPECT_FALSE(r.degenerate);
  EXPECT_LT((r.x_L.r_WC - c.x_L.r_WC).norm(), 1e-3);
}
