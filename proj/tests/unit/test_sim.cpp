// SPDX-License-Identifier: BSD-3-Clause
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include <gtest/gtest.h>

#include "dynvio/core/io.hpp"
#include "dynvio/imu/imu.hpp"
#include "dynvio/manifold/so3.hpp"
#include "dynvio/sim/scenarios.hpp"

using namespace dynvio;
using namespace dynvio::sim;

namespace fs = std::filesystem;

namespace {

// odd image size so that the centre pixel lies on the optical axis
CameraIntrinsics oddCamera() {
  CameraIntrinsics K;
  K.width = 161;
  K.height = 121;
  K.fx = K.fy = 150.0;
  K.cx = 80.0;
  K.cy = 60.0;
  K.baseline = 0.1;
  K.sigma_xy = 0.5;
  K.sigma_z = 0.05;
  return K;
}

Primitive at(Shape shape, const Eigen::Vector3d& size, const Pose& T, int instance = 0) {
  Primitive p;
  p.shape = shape;
  p.size = size;
  p.texture = Texture::noise(3, 0.1);
  p.trajectory = TrajectorySpec::constant(T);
  p.instance = instance;
  return p;
}

Pose translation(double x, double y, double z) {
  return Pose(Quaternion::Identity(), Eigen::Vector3d(x, y, z));
}

std::string readAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path tempDir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dynvio_sim_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Render, SphereCentralDepth) {
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Sphere, {0.5, 0, 0}, translation(0, 0, 2)));
  const auto K = oddCamera();
  const auto f = renderFrame(scene, 0.0, Pose::Identity(), K);
  EXPECT_EQ(f.depth(80, 60), 1.5f);
  EXPECT_EQ(f.depth(0, 0), 0.0f);  // the sphere subtends less than the corner ray
}

TEST(Render, FrontoParallelPlaneUniformDepth) {
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Plane, {0, 0, 0}, translation(0, 0, 2)));
  const auto K = oddCamera();
  const auto f = renderFrame(scene, 0.0, Pose::Identity(), K);
  for (std::size_t i = 0; i < f.depth.size(); ++i) ASSERT_NEAR(f.depth[i], 2.0f, 1e-6f);
}

TEST(Render, NoHitIsInvalid) {
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Sphere, {0.3, 0, 0}, translation(0, 0, -3)));
  const auto f = renderFrame(scene, 0.0, Pose::Identity(), oddCamera());
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    ASSERT_EQ(f.depth[i], 0.0f);
    ASSERT_EQ(f.instance[i], 0);
  }
}

// closed-form sphere intersection written independently of the renderer
TEST(Render, DepthMatchesAnalyticIntersection) {
  const Eigen::Vector3d c(0.2, -0.1, 1.8);
  const double r = 0.6;
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Sphere, {r, 0, 0}, translation(c.x(), c.y(), c.z())));
  const auto K = oddCamera();
  const Pose T_WC(Quaternion(Eigen::AngleAxisd(0.1, Eigen::Vector3d::UnitY())),
                  Eigen::Vector3d(0.05, 0.0, -0.1));
  const auto f = renderFrame(scene, 0.0, T_WC, K);
  const Eigen::Vector3d c_C = T_WC.inverse() * c;
  int hits = 0;
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      // depth z along ray (u, v, 1): |z m - c|^2 = r^2
      const Eigen::Vector3d m((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const double a = m.squaredNorm(), b = -2.0 * m.dot(c_C), cc = c_C.squaredNorm() - r * r;
      const double disc = b * b - 4 * a * cc;
      if (disc < 0) {
        ASSERT_EQ(f.depth(x, y), 0.0f);
        continue;
      }
      const double z = (-b - std::sqrt(disc)) / (2 * a);
      ++hits;
      // stored as float; the renderer itself works in double
      ASSERT_NEAR(f.depth(x, y), z, 1e-6 * z) << x << "," << y;
    }
  }
  EXPECT_GT(hits, 1000);
}

TEST(Render, MaskPartitionsHits) {
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Plane, {0, 0, 0}, translation(0, 0, 3)));
  scene.primitives.push_back(at(Shape::Sphere, {0.4, 0, 0}, translation(0.3, 0, 2), 7));
  scene.primitives.push_back(at(Shape::Box, {0.2, 0.2, 0.2}, translation(-0.4, 0.1, 1.5), 9));
  const auto K = oddCamera();
  const auto f = renderFrame(scene, 0.0, Pose::Identity(), K);
  int counts[10] = {};
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const int id = f.instance(x, y);
      ASSERT_TRUE(id == 0 || id == 7 || id == 9);
      ASSERT_GT(f.depth(x, y), 0.0f);  // the plane fills the view
      ++counts[id];
      // id follows the nearest surface: sphere/box pixels are nearer than the plane
      if (id != 0) ASSERT_LT(f.depth(x, y), 3.0f - 1e-6f);
      if (id == 0) ASSERT_NEAR(f.depth(x, y), 3.0f, 1e-5f);
    }
  }
  EXPECT_GT(counts[7], 100);
  EXPECT_GT(counts[9], 100);
  EXPECT_EQ(counts[0] + counts[7] + counts[9], K.width * K.height);
}

TEST(Render, BoxSeenFromInside) {
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Box, {2, 2, 2}, translation(0, 0, 0)));
  const auto f = renderFrame(scene, 0.0, Pose::Identity(), oddCamera());
  EXPECT_NEAR(f.depth(80, 60), 2.0f, 1e-6f);
}

TEST(Render, NoiseIsSeededAndBounded) {
  SceneSpec scene;
  scene.primitives.push_back(at(Shape::Plane, {0, 0, 0}, translation(0, 0, 2)));
  const auto K = oddCamera();
  RenderNoise noise{true, 0.01};
  std::mt19937_64 a(5), b(5);
  const auto fa = renderFrame(scene, 0.0, Pose::Identity(), K, noise, &a);
  const auto fb = renderFrame(scene, 0.0, Pose::Identity(), K, noise, &b);
  EXPECT_TRUE(fa.depth == fb.depth);
  EXPECT_TRUE(fa.intensity == fb.intensity);
  // axial stddev at 2 m: 4 / (150 * 0.1) * 0.05
  const double sigma = 4.0 / 15.0 * 0.05;
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < fa.depth.size(); ++i) {
    sum += fa.depth[i] - 2.0;
    sq += (fa.depth[i] - 2.0) * (fa.depth[i] - 2.0);
  }
  const double n = static_cast<double>(fa.depth.size());
  EXPECT_NEAR(sum / n, 0.0, 5.0 * sigma / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(sq / n), sigma, 0.05 * sigma);
}

TEST(Trajectory, PiecewiseSmoothAtKeys) {
  const auto p = PiecewisePoly::smoothThrough({0, 1, 2.5, 3}, {0, 2, -1, 0.5});
  EXPECT_DOUBLE_EQ(p.value(1.0), 2.0);
  EXPECT_DOUBLE_EQ(p.value(2.5), -1.0);
  for (double tk : {1.0, 2.5}) {
    const double h = 1e-7;
    EXPECT_NEAR(p.value(tk - h), p.value(tk + h), 1e-5);
    EXPECT_NEAR(p.d1(tk - h), p.d1(tk + h), 1e-5);
    EXPECT_NEAR(p.d2(tk - h), p.d2(tk + h), 1e-4);
  }
  EXPECT_DOUBLE_EQ(p.d1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(p.value(5.0), 0.5);
  EXPECT_DOUBLE_EQ(p.d1(5.0), 0.0);
}

TEST(Trajectory, DerivativesMatchFiniteDifferences) {
  const auto cam = makeScenario("static-room").camera;
  const double h = 1e-5;
  for (double t : {0.7, 1.3, 2.9, 4.4, 7.1}) {
    const Pose T0 = cam->pose(t - h), T1 = cam->pose(t + h);
    const Eigen::Vector3d v_fd = (T1.translation() - T0.translation()) / (2 * h);
    EXPECT_LT((v_fd - cam->velocity(t)).norm(), 1e-6);
    const Eigen::Vector3d a_fd =
        (cam->velocity(t + h) - cam->velocity(t - h)) / (2 * h);
    EXPECT_LT((a_fd - cam->acceleration(t)).norm(), 1e-5);
    // body rate from R(t)^T R(t + h) ~ Exp(w h)
    const Quaternion dq = T0.rotation().conjugate() * T1.rotation();
    const Eigen::Vector3d w_fd = logSO3(dq) / (2 * h);
    EXPECT_LT((w_fd - cam->omegaBody(t)).norm(), 1e-6);
    const Eigen::Vector3d wd_fd = (cam->omegaBody(t + h) - cam->omegaBody(t - h)) / (2 * h);
    EXPECT_LT((wd_fd - cam->omegaDotBody(t)).norm(), 1e-5);
  }
}

TEST(Imu, StationaryMeasuresGravityOnly) {
  const Pose T_WC(Quaternion(Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, 2, 3).normalized())),
                  Eigen::Vector3d(1, 2, 3));
  const auto traj = TrajectorySpec::constant(T_WC);
  const auto calib = defaultCalibration();
  const Eigen::Vector3d g(0, 0, -9.81);
  const auto imu = synthesizeImu(traj, calib.T_SC, 200.0, 0.0, 1.0, g);
  ASSERT_EQ(imu.size(), 201u);
  const Eigen::Matrix3d R_WS = T_WC.rotationMatrix() * calib.T_SC.rotationMatrix().transpose();
  for (const auto& m : imu) {
    EXPECT_LT(m.gyro.norm(), 1e-15);
    EXPECT_LT((m.accel - (-R_WS.transpose() * g)).norm(), 1e-12);
  }
}

TEST(Imu, ConstantRateAboutZ) {
  TrajectorySpec traj;
  traj.ypr[0] = PiecewisePoly::velocityStep(0.0, 0.0, 0.7);
  const auto imu = synthesizeImu(traj, Pose::Identity(), 200.0, 0.0, 1.0, {0, 0, -9.81});
  for (const auto& m : imu) {
    EXPECT_NEAR(m.gyro.x(), 0.0, 1e-15);
    EXPECT_NEAR(m.gyro.y(), 0.0, 1e-15);
    EXPECT_NEAR(m.gyro.z(), 0.7, 1e-15);
  }
}

namespace {

double worstClosedLoopError(const TrajectorySpec& traj, const Pose& T_SC, double duration,
                            double rate) {
  const Eigen::Vector3d g(0, 0, -9.81);
  const auto imu = synthesizeImu(traj, T_SC, rate, 0.0, duration, g);
  ImuNoiseParams params;
  params.g_W = g;
  double worst = 0.0;
  for (double t0 = 0.0; t0 + 0.5 <= duration; t0 += 0.25) {
    const auto batch = makeBatch(imu, std::llround(t0 * 1e9), std::llround((t0 + 0.5) * 1e9), T_SC);
    const auto p = propagate(trueState(traj, T_SC, t0), batch, params);
    worst = std::max(worst, (p.state.r_WC - trueState(traj, T_SC, t0 + 0.5).r_WC).norm());
  }
  return worst;
}

}  // namespace

// slow hand-held sway: keys 3 s apart
TEST(Imu, ClosedLoopWithPropagation) {
  TrajectorySpec traj;
  const std::vector<double> t = {0, 3, 6, 9, 12};
  traj.position[0] = PiecewisePoly::smoothThrough(t, {0, 0.15, -0.05, 0.1, 0});
  traj.position[1] = PiecewisePoly::smoothThrough(t, {0, -0.1, 0.12, 0.0, 0.05});
  traj.position[2] = PiecewisePoly::smoothThrough(t, {1.2, 1.3, 1.15, 1.25, 1.2});
  traj.ypr[0] = PiecewisePoly::smoothThrough(t, {0, 0.2, -0.15, 0.1, 0});
  traj.ypr[1] = PiecewisePoly::smoothThrough(t, {0, -0.1, 0.1, 0.05, 0});
  traj.ypr[2] = PiecewisePoly::smoothThrough(t, {0, 0.05, -0.08, 0.0, 0.02});
  EXPECT_LT(worstClosedLoopError(traj, defaultCalibration().T_SC, 12.0, 200.0), 1e-6);
}

// The integrator is second order: on the faster scenario trajectories the
// closed-loop error exceeds 1e-6 m at 200 Hz but shrinks 4x per rate doubling.
class ClosedLoop : public ::testing::TestWithParam<std::string> {};

TEST_P(ClosedLoop, SecondOrderConvergence) {
  const auto s = makeScenario(GetParam());
  const double e200 = worstClosedLoopError(*s.camera, s.calib.T_SC, s.duration, 200.0);
  const double e400 = worstClosedLoopError(*s.camera, s.calib.T_SC, s.duration, 400.0);
  EXPECT_LT(e200, 5e-5);
  EXPECT_GT(e200 / e400, 3.5);
  EXPECT_LT(e200 / e400, 4.5);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, ClosedLoop, ::testing::ValuesIn(scenarioNames()),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (auto& c : n) c = c == '-' ? '_' : c;
                           return n;
                         });

TEST(Dataset, OneSecondCounts) {
  ScenarioOptions opt;
  opt.duration = 1.0;
  const auto s = makeScenario("moving-chair", opt);
  const auto dir = tempDir("count");
  const auto r = generateDataset(s, 1, dir.string());
  EXPECT_EQ(r.frames, 15);
  EXPECT_EQ(r.imu_rows, 200);
  EXPECT_EQ(readImuCsv((dir / "imu.csv").string()).size(), 200u);
  EXPECT_EQ(readTum((dir / "groundtruth_cam.txt").string()).size(), 15u);
  EXPECT_EQ(readTum((dir / "groundtruth_obj_1.txt").string()).size(), 15u);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dir / "depth")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 15);
  const auto classes = readClassMap((dir / "classmap.txt").string());
  ASSERT_EQ(classes.size(), 1u);
  EXPECT_EQ(classes[0].argmaxClass(), 62);
  const auto calib = readCalibration((dir / "calib.txt").string());
  EXPECT_EQ(calib.camera.width, 320);
  fs::remove_all(dir);
}

TEST(Dataset, SameSeedIsBitIdentical) {
  ScenarioOptions opt;
  opt.duration = 0.4;
  opt.noise = true;
  const auto s = makeScenario("lost-and-found", opt);
  const auto a = tempDir("det_a"), b = tempDir("det_b");
  generateDataset(s, 42, a.string());
  generateDataset(s, 42, b.string());
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    ASSERT_EQ(readAll(e.path()), readAll(b / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 6 * 3 + 6);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Dataset, PngRoundTrip) {
  const auto s = makeScenario("moving-chair");
  const auto f = renderFrame(s.scene, 0.0, s.camera->pose(0.0), s.calib.camera);
  const auto dir = tempDir("png");
  fs::create_directories(dir);
  writeDepthPng((dir / "d.png").string(), f.depth);
  writeIntensityPng((dir / "i.png").string(), f.intensity);
  writeMaskPng((dir / "m.png").string(), f.instance);
  const auto d = readDepthPng((dir / "d.png").string());
  const auto i = readIntensityPng((dir / "i.png").string());
  EXPECT_TRUE(readMaskPng((dir / "m.png").string()) == f.instance);
  for (std::size_t k = 0; k < d.size(); ++k) {
    ASSERT_LE(std::abs(d[k] - f.depth[k]), 0.5e-3f + 1e-6f);
    ASSERT_LE(std::abs(i[k] - f.intensity[k]), 0.5f / 255.0f + 1e-6f);
  }
  EXPECT_THROW(readDepthPng((dir / "i.png").string()), std::runtime_error);
  EXPECT_THROW(readDepthPng((dir / "missing.png").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Dataset, TumRoundTrip) {
  std::vector<StampedPose> poses;
  std::mt19937 rng(3);
  std::normal_distribution<double> n;
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector3d w(n(rng), n(rng), n(rng));
    poses.push_back({1234567890123LL + k * 66666667LL,
                     Pose(expSO3(w), Eigen::Vector3d(n(rng), n(rng), n(rng)))});
  }
  const auto dir = tempDir("tum");
  fs::create_directories(dir);
  writeTum((dir / "t.txt").string(), poses);
  const auto back = readTum((dir / "t.txt").string());
  ASSERT_EQ(back.size(), poses.size());
  for (std::size_t k = 0; k < poses.size(); ++k) {
    EXPECT_EQ(back[k].timestamp_ns, poses[k].timestamp_ns);
    EXPECT_LT((back[k].pose.translation() - poses[k].pose.translation()).norm(), 1e-8);
    EXPECT_LT(back[k].pose.rotation().angularDistance(poses[k].pose.rotation()), 1e-8);
  }
  std::ofstream(dir / "bad.txt") << "0.0 1 2 3\n";
  EXPECT_THROW(readTum((dir / "bad.txt").string()), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Scenarios, NamesAndUnknown) {
  for (const auto& n : scenarioNames()) EXPECT_EQ(makeScenario(n).name, n);
  EXPECT_THROW(makeScenario("nope"), std::invalid_argument);
  const auto flat = makeScenario("static-room", {false, true, 0.0});
  for (const auto& p : flat.scene.primitives) EXPECT_EQ(p.texture.kind, Texture::Kind::Flat);
}
