// SPDX-License-Identifier: BSD-3-Clause
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dynvio/pipeline/config.hpp"
#include "dynvio/pipeline/dataset.hpp"
#include "dynvio/pipeline/evaluation.hpp"
#include "dynvio/pipeline/session.hpp"
#include "dynvio/sim/scenarios.hpp"

namespace fs = std::filesystem;
using namespace dynvio;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dynvio_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

// Short datasets shared by the session tests.
class SessionTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    sim::ScenarioOptions o;
    o.duration = 0.4;
    root_ = scratch("sessions");
    sim::generateDataset(sim::makeScenario("static-room", o), 3, (root_ / "static").string());
  }
  static fs::path root_;
};
fs::path SessionTest::root_;

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, DefaultsAndOverride) {
  const SessionConfig d = parseConfig("");
  EXPECT_EQ(d.tracking.levels, 3);
  const SessionConfig c = parseConfig("[tracking]\nlevels = 2\n[session]\nseed = 42\n");
  EXPECT_EQ(c.tracking.levels, 2);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Config, UnknownKeyNamesTheKey) {
  try {
    parseConfig("[tracking]\nlevelz = 2\n");
    FAIL() << "no throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("tracking.levelz"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parseConfig("[nosuch]\na = 1\n"), std::runtime_error);
}

TEST(Config, RangeAndFormatErrors) {
  EXPECT_THROW(parseConfig("[tracking]\nlevels = 0\n"), std::runtime_error);
  EXPECT_THROW(parseConfig("[tracking]\nlevels = two\n"), std::runtime_error);
  EXPECT_THROW(parseConfig("[objects]\niou_threshold = 1.5\n"), std::runtime_error);
  EXPECT_THROW(parseConfig("[tracking]\nuse_icp = maybe\n"), std::runtime_error);
  EXPECT_THROW(parseConfig("[map]\nobject_voxel = 0.05\nobject_truncation = 0.01\n"),
               std::runtime_error);
  EXPECT_THROW(parseConfig("levels = 2\n"), std::runtime_error);
}

TEST(Config, DegreesAreConvertedOnce) {
  const SessionConfig c = parseConfig("[tracking]\nicp_max_angle_deg = 30\n");
  EXPECT_NEAR(c.tracking.gate.max_angle, M_PI / 6.0, 1e-12);
}

TEST(Config, FormatRoundTrip) {
  SessionConfig c = parseConfig("[objects]\nsigma_photo = 0.07\nreference_erosion = 3\n");
  const std::string text = formatConfig(c);
  const SessionConfig back = parseConfig(text);
  EXPECT_EQ(formatConfig(back), text);
  EXPECT_DOUBLE_EQ(back.objects.sigma_photo, 0.07);
  EXPECT_EQ(back.objects.reference_erosion, 3);
}

// ---------------------------------------------------------------- dataset

TEST_F(SessionTest, DatasetOpens) {
  const Dataset ds((root_ / "static").string());
  EXPECT_EQ(ds.frames().size(), 6u);
  const FrameData f = ds.load(0);
  EXPECT_EQ(f.intensity.width(), ds.calibration().camera.width);
  EXPECT_THROW(ds.load(99), std::runtime_error);
}

TEST_F(SessionTest, DatasetRejectsImuGap) {
  const fs::path d = root_ / "gap";
  fs::remove_all(d);
  fs::copy(root_ / "static", d, fs::copy_options::recursive);
  std::istringstream in(slurp(d / "imu.csv"));
  std::ostringstream out;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    // 0.1 s hole
    if (row < 21 || row > 40) out << line << '\n';
    ++row;
  }
  spit(d / "imu.csv", out.str());
  EXPECT_THROW(Dataset(d.string(), 0.05), std::runtime_error);
  EXPECT_NO_THROW(Dataset(d.string(), 0.2));
}

TEST_F(SessionTest, DatasetRejectsMissingFrame) {
  const fs::path d = root_ / "missing";
  fs::remove_all(d);
  fs::copy(root_ / "static", d, fs::copy_options::recursive);
  fs::remove(d / "depth" / "000002.png");
  const Dataset ds(d.string());
  EXPECT_NO_THROW(ds.load(1));
  EXPECT_THROW(ds.load(2), std::runtime_error);
}

TEST(Dataset, MissingDirectory) {
  EXPECT_THROW(Dataset("/nonexistent/dynvio"), std::runtime_error);
}

// ---------------------------------------------------------------- evaluation

namespace {

std::vector<StampedPose> randomWalk(int n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<StampedPose> out;
  Pose T;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d w(g(rng), g(rng), g(rng));
    const Eigen::Vector3d v(g(rng), g(rng), g(rng));
    T = T * Pose(Quaternion(Eigen::AngleAxisd(w.norm(), w.normalized())), v);
    out.push_back({std::int64_t(i) * 50'000'000, T});
  }
  return out;
}

}  // namespace

TEST(Evaluation, SelfIsZero) {
  const auto gt = randomWalk(40, 1);
  for (Alignment a : {Alignment::None, Alignment::Rigid}) {
    const auto r = evaluateTrajectory(gt, gt, a);
    EXPECT_EQ(r.pairs, 40);
    EXPECT_LT(r.ate_rmse_m, 1e-12);
    ASSERT_EQ(r.series.size(), 40u);
    for (const auto& s : r.series) EXPECT_LT(s.err_rot_deg, 1e-6);
  }
}

TEST(Evaluation, ConstantOffset) {
  const auto gt = randomWalk(40, 2);
  auto est = gt;
  for (auto& s : est) s.pose = Pose(Quaternion::Identity(), Eigen::Vector3d(0.1, 0, 0)) * s.pose;
  EXPECT_NEAR(evaluateTrajectory(est, gt, Alignment::None).ate_rmse_m, 0.1, 1e-12);
  EXPECT_LT(evaluateTrajectory(est, gt, Alignment::Rigid).ate_rmse_m, 1e-9);
}

TEST(Evaluation, RigidRemovesRotationAndTranslation) {
  const auto gt = randomWalk(60, 3);
  const Pose G(Quaternion(Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized())),
               Eigen::Vector3d(1.0, -2.0, 0.5));
  auto est = gt;
  for (auto& s : est) s.pose = G * s.pose;
  const auto r = evaluateTrajectory(est, gt, Alignment::Rigid);
  EXPECT_LT(r.ate_rmse_m, 1e-9);
  // the recovered alignment is G^-1
  EXPECT_LT(((r.T_gt_est * G).translation()).norm(), 1e-9);
  EXPECT_GT(evaluateTrajectory(est, gt, Alignment::None).ate_rmse_m, 0.5);
}

TEST(Evaluation, TooFewPairsThrows) {
  const auto gt = randomWalk(5, 4);
  std::vector<StampedPose> est{gt[0]};
  EXPECT_THROW(evaluateTrajectory(est, gt, Alignment::Rigid), std::runtime_error);
  // timestamps 20 ms off never associate
  auto shifted = gt;
  for (auto& s : shifted) s.timestamp_ns += 20'000'000;
  EXPECT_THROW(evaluateTrajectory(shifted, gt, Alignment::None), std::runtime_error);
}

TEST(Evaluation, AssociationTolerance) {
  const auto gt = randomWalk(5, 5);
  auto est = gt;
  est[1].timestamp_ns += 9'000'000;
  est[2].timestamp_ns += 11'000'000;
  const auto pairs = associateTimestamps(est, gt);
  ASSERT_EQ(pairs.size(), 4u);
  for (const auto& [e, g] : pairs) EXPECT_NE(e, 2);
}

TEST(Evaluation, JsonAndCsvRoundTripExactly) {
  const auto gt = randomWalk(30, 6);
  auto est = randomWalk(30, 7);
  const auto r = evaluateTrajectory(est, gt, Alignment::Rigid);
  const auto back = evaluationFromJson(toJson(r));
  ASSERT_EQ(back.series.size(), r.series.size());
  EXPECT_EQ(back.ate_rmse_m, r.ate_rmse_m);

  const fs::path dir = scratch("csv");
  writeErrorCsv((dir / "e.csv").string(), back.series);
  std::ifstream is(dir / "e.csv");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,err_trans_m,err_rot_deg");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    double t, a, b;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &a, &b), 3);
    ASSERT_LT(rows, r.series.size());
    EXPECT_EQ(t, r.series[rows].t);
    EXPECT_EQ(a, r.series[rows].err_trans_m);
    EXPECT_EQ(b, r.series[rows].err_rot_deg);
    ++rows;
  }
  EXPECT_EQ(rows, r.series.size());
}

TEST(Evaluation, ObjectErrorIgnoresWorldAndFrameOffsets) {
  const auto cam = randomWalk(20, 8);
  const auto obj = randomWalk(20, 9);
  const Pose W(Quaternion(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitZ())), {0.2, 0.1, 0});
  const Pose O(Quaternion(Eigen::AngleAxisd(0.5, Eigen::Vector3d::UnitY())), {0.05, 0, 0});
  auto cam_est = cam, obj_est = obj;
  for (auto& s : cam_est) s.pose = W * s.pose;
  for (auto& s : obj_est) s.pose = W * s.pose * O;
  const auto e = objectPoseErrors(obj_est, cam_est, obj, cam);
  ASSERT_EQ(e.size(), 20u);
  for (const auto& s : e) {
    EXPECT_LT(s.err_trans_m, 1e-9);
    EXPECT_LT(s.err_rot_deg, 1e-6);
  }
}

// ---------------------------------------------------------------- session

TEST_F(SessionTest, ZeroObjectRuntimeRows) {
  const Dataset ds((root_ / "static").string());
  Session s(ds, SessionConfig{});
  s.runToEnd();
  EXPECT_TRUE(s.objects().empty());
  const auto& rt = s.runtime();
  EXPECT_EQ(rt.frames, 6);
  EXPECT_EQ(rt[TimingCategory::ObjectTracking].samples, 0);
  EXPECT_EQ(rt[TimingCategory::Relocalisation].samples, 0);
  EXPECT_EQ(rt[TimingCategory::ObjectTracking].total_ms, 0.0);
  EXPECT_EQ(rt[TimingCategory::CameraTracking].samples, 6);
  EXPECT_EQ(rt[TimingCategory::Raycasting].samples, 6);
  double sum = 0.0;
  for (const auto& r : rt.rows) sum += r.total_ms;
  EXPECT_LE(sum, rt.frame_total_ms);
}

TEST_F(SessionTest, RuntimeGrowsWithImageArea) {
  sim::ScenarioOptions o;
  o.duration = 0.2;
  sim::Scenario small = sim::makeScenario("static-room", o);
  sim::Scenario large = small;
  auto& K = large.calib.camera;
  const double s = std::sqrt(2.0);
  K.width = static_cast<int>(std::lround(K.width * s));
  K.height = static_cast<int>(std::lround(K.height * s));
  K.fx *= s;
  K.fy *= s;
  K.cx = (K.width - 1) / 2.0;
  K.cy = (K.height - 1) / 2.0;
  sim::generateDataset(small, 1, (root_ / "small").string());
  sim::generateDataset(large, 1, (root_ / "large").string());

  auto timed = [](const fs::path& d) {
    const Dataset ds(d.string());
    Session sess(ds, SessionConfig{});
    sess.runToEnd();
    return sess.runtime();
  };
  const RuntimeReport a = timed(root_ / "small");
  const RuntimeReport b = timed(root_ / "large");
  EXPECT_GT(b[TimingCategory::Integration].total_ms, a[TimingCategory::Integration].total_ms);
  EXPECT_GT(b[TimingCategory::Raycasting].total_ms, a[TimingCategory::Raycasting].total_ms);
}

TEST_F(SessionTest, OutputsAreDeterministic) {
  const Dataset ds((root_ / "static").string());
  for (const char* name : {"a", "b"}) {
    Session s(ds, SessionConfig{});
    s.runToEnd();
    s.writeOutputs((root_ / "out" / name).string(), true);
  }
  const std::string a = slurp(root_ / "out" / "a" / "trajectory_camera.txt");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(root_ / "out" / "b" / "trajectory_camera.txt"));
  EXPECT_EQ(slurp(root_ / "out" / "a" / "background.ply"),
            slurp(root_ / "out" / "b" / "background.ply"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "a" / "report.json"));
  EXPECT_TRUE(fs::exists(root_ / "out" / "a" / "snapshot.bin"));
}

TEST_F(SessionTest, SnapshotResumes) {
  const Dataset ds((root_ / "static").string());
  Session full(ds, SessionConfig{});
  full.runToEnd();

  Session first(ds, SessionConfig{});
  for (int i = 0; i < 3; ++i) first.step();
  const std::string snap = (root_ / "snap.bin").string();
  first.saveSnapshot(snap);

  Session resumed(ds, SessionConfig{});
  resumed.loadSnapshot(snap);
  EXPECT_EQ(resumed.nextFrame(), 3u);
  resumed.runToEnd();
  const auto& x = full.cameraTrajectory();
  const auto& y = resumed.cameraTrajectory();
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].timestamp_ns, y[i].timestamp_ns);
    EXPECT_LT((x[i].pose.translation() - y[i].pose.translation()).norm(), 1e-6);
  }
}

TEST_F(SessionTest, SnapshotRejectsGarbage) {
  const Dataset ds((root_ / "static").string());
  Session s(ds, SessionConfig{});
  const fs::path bad = root_ / "bad.bin";
  spit(bad, "not a snapshot");
  EXPECT_THROW(s.loadSnapshot(bad.string()), std::runtime_error);
  EXPECT_THROW(s.loadSnapshot((root_ / "absent.bin").string()), std::runtime_error);

  Session t(ds, SessionConfig{});
  t.step();
  t.saveSnapshot((root_ / "t.bin").string());
  std::string bytes = slurp(root_ / "t.bin");
  spit(bad, bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(s.loadSnapshot(bad.string()), std::runtime_error);
  EXPECT_EQ(s.nextFrame(), 0u);
}
