// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/sim/scenarios.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

#include "dynvio/core/io.hpp"

namespace dynvio::sim {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Key {
  double t, x, y, z, yaw, pitch, roll;  // degrees; positive yaw turns left, positive pitch looks down
};

TrajectorySpec keyed(const std::vector<Key>& keys, const Quaternion& mount) {
  std::vector<double> t, c[6];
  for (const auto& k : keys) {
    t.push_back(k.t);
    const double v[6] = {k.x, k.y, k.z, k.yaw * kDeg, k.pitch * kDeg, k.roll * kDeg};
    for (int i = 0; i < 6; ++i) c[i].push_back(v[i]);
  }
  TrajectorySpec s;
  s.mount = mount;
  for (int i = 0; i < 3; ++i) {
    s.position[i] = PiecewisePoly::smoothThrough(t, c[i]);
    s.ypr[i] = PiecewisePoly::smoothThrough(t, c[3 + i]);
  }
  return s;
}

// camera axes (right, down, forward) on a forward-left-up body
Quaternion cameraMount() {
  Eigen::Matrix3d R;
  R.col(0) = Eigen::Vector3d(0, -1, 0);
  R.col(1) = Eigen::Vector3d(0, 0, -1);
  R.col(2) = Eigen::Vector3d(1, 0, 0);
  return Quaternion(R);
}

Primitive box(const Eigen::Vector3d& centre, const Eigen::Vector3d& half, const Texture& tex,
              int instance = 0) {
  Primitive p;
  p.shape = Shape::Box;
  p.size = half;
  p.texture = tex;
  p.trajectory = TrajectorySpec::constant(Pose(Quaternion::Identity(), centre));
  p.instance = instance;
  return p;
}

Primitive sphere(const Eigen::Vector3d& centre, double r, const Texture& tex) {
  Primitive p = box(centre, Eigen::Vector3d::Constant(r), tex);
  p.shape = Shape::Sphere;
  return p;
}

// room 6.4 x 5.2 x 3 m with a table, a cabinet and a ball; floor at z = 0
void addRoom(SceneSpec& scene) {
  scene.primitives.push_back(box({0, 0, 1.5}, {3.2, 2.6, 1.5}, Texture::noise(11, 0.25, 0.3)));
  scene.primitives.push_back(box({1.8, 0.2, 0.375}, {0.5, 0.7, 0.375}, Texture::noise(12, 0.12)));
  scene.primitives.push_back(box({2.4, -1.6, 0.9}, {0.4, 0.5, 0.9}, Texture::noise(13, 0.15)));
  scene.primitives.push_back(sphere({2.0, 1.7, 0.4}, 0.4, Texture::noise(14, 0.1)));
}

Scenario base(const std::string& name, double duration) {
  Scenario s;
  s.name = name;
  s.calib = defaultCalibration();
  s.duration = duration;
  addRoom(s.scene);
  return s;
}

Scenario staticRoom() {
  Scenario s = base("static-room", 10.0);
  s.camera = std::make_shared<TrajectorySpec>(keyed({{0.0, 0.0, 0.0, 1.2, 0, 0, 0},
                                                     {0.5, 0.0, 0.0, 1.2, 0, 0, 0},
                                                     {2.0, 0.3, 0.2, 1.3, 20, -5, 2},
                                                     {4.0, 0.5, -0.2, 1.25, -15, 5, -3},
                                                     {6.0, 0.2, -0.4, 1.15, -35, -8, 0},
                                                     {8.0, -0.1, 0.1, 1.3, 10, 3, 3},
                                                     {10.0, 0.0, 0.3, 1.2, 25, -3, 0}},
                                                    cameraMount()));
  return s;
}

Scenario movingChair() {
  Scenario s = base("moving-chair", 4.0);
  s.camera = std::make_shared<TrajectorySpec>(keyed({{0.0, 0.0, 0.0, 1.2, -20, 12, 0},
                                                     {1.0, 0.0, 0.0, 1.2, -20, 12, 0},
                                                     {2.5, -0.45, 0.1, 1.25, -15, 14, 2},
                                                     {4.0, -0.9, 0.0, 1.2, -18, 16, 0}},
                                                    cameraMount()));
  Primitive chair = box({0, 0, 0}, {0.25, 0.25, 0.45}, Texture::noise(21, 0.06, 0.4), 1);
  chair.trajectory.position[0] = PiecewisePoly::velocityStep(1.2, 1.0, -0.3);
  chair.trajectory.position[1] = PiecewisePoly::velocityStep(-0.8, 1.0, 0.15);
  chair.trajectory.position[2] = PiecewisePoly(0.45);
  chair.trajectory.ypr[0] = PiecewisePoly::velocityStep(0.0, 1.0, 15.0 * kDeg);
  s.scene.primitives.push_back(chair);
  s.objects.push_back({1, {{62, 0.92}, {57, 0.08}}});
  return s;
}

Scenario lostAndFound() {
  Scenario s = base("lost-and-found", 8.0);
  s.camera = std::make_shared<TrajectorySpec>(keyed({{0.0, 0.4, 0.0, 1.3, 0, 15, 0},
                                                     {0.5, 0.4, 0.0, 1.3, 0, 15, 0},
                                                     {1.4, 0.45, 0.1, 1.3, 8, 15, 0},
                                                     {2.2, 0.4, 0.0, 1.3, 0, 15, 0},
                                                     {3.8, 0.4, 0.0, 1.3, 100, 5, 0},
                                                     {4.8, 0.4, 0.0, 1.3, 100, 5, 0},
                                                     {6.4, 0.4, 0.0, 1.3, 0, 15, 0},
                                                     {7.2, 0.45, -0.1, 1.3, -6, 14, 0},
                                                     {8.0, 0.4, 0.0, 1.3, 0, 15, 0}},
                                                    cameraMount()));
  Primitive bottle = box({0, 0, 0}, {0.15, 0.12, 0.18}, Texture::noise(31, 0.04, 0.45), 1);
  bottle.trajectory = keyed({{0.0, 1.6, 0.35, 0.93, 0, 0, 0},
                             {3.9, 1.6, 0.35, 0.93, 0, 0, 0},
                             {4.7, 1.6, -0.15, 0.93, -30, 0, 0}},
                            Quaternion::Identity());
  s.scene.primitives.push_back(bottle);
  s.objects.push_back({1, {{44, 0.85}, {46, 0.15}}});
  return s;
}

Scenario fastDynamic() {
  Scenario s = base("fast-dynamic", 8.0);
  auto cam = std::make_shared<TrajectorySpec>(keyed({{0.0, 0.0, 0.0, 1.2, 0, 0, 0},
                                                     {0.5, 0.0, 0.0, 1.2, 0, 0, 0},
                                                     {1.5, 0.2, 0.25, 1.3, 35, -6, 4},
                                                     {2.6, 0.3, -0.2, 1.15, -30, 6, -4},
                                                     {3.7, 0.0, -0.4, 1.25, 25, -8, 3},
                                                     {4.8, -0.3, 0.1, 1.35, -35, 4, -3},
                                                     {5.9, 0.1, 0.3, 1.2, 30, -5, 2},
                                                     {7.0, 0.2, 0.0, 1.25, -20, 3, 0},
                                                     {8.0, 0.0, 0.0, 1.2, 0, 0, 0}},
                                                    cameraMount()));
  s.camera = cam;
  Primitive crate = box({0, 0, 0}, {0.35, 0.45, 0.3}, Texture::noise(41, 0.06, 0.4), 1);
  // carried in front of the camera, covering the left part of the view, with a small wobble
  crate.trajectory = keyed({{0.0, 0, 0, 0, 0, 0, 0},
                            {0.5, 0, 0, 0, 0, 0, 0},
                            {2.0, 0.03, -0.02, 0.02, 3, -2, 2},
                            {4.0, -0.02, 0.03, -0.03, -2, 3, -3},
                            {6.0, 0.02, 0.0, 0.03, 2, -3, 2},
                            {8.0, 0, 0, 0, 0, 0, 0}},
                           Quaternion::Identity());
  crate.trajectory.parent = cam;
  crate.trajectory.offset = Pose(Quaternion::Identity(), Eigen::Vector3d(-0.25, 0.0, 1.1));
  s.scene.primitives.push_back(crate);
  s.objects.push_back({1, {{33, 0.8}, {31, 0.2}}});
  return s;
}

}  // namespace

int Scenario::frameCount() const {
  return static_cast<int>(std::floor(duration * frame_rate + 1e-9));
}

int Scenario::imuCount() const { return static_cast<int>(std::floor(duration * imu_rate + 1e-9)); }

Calibration defaultCalibration() {
  Calibration c;
  auto& k = c.camera;
  k.width = 320;
  k.height = 240;
  k.fx = k.fy = 260.0;
  k.cx = 159.5;
  k.cy = 119.5;
  k.baseline = 0.095;
  k.sigma_xy = 0.5;
  k.sigma_z = 0.05;
  c.T_SC = Pose(cameraMount().conjugate(), Eigen::Vector3d(0.01, -0.02, 0.005));
  return c;
}

std::vector<std::string> scenarioNames() {
  return {"static-room", "moving-chair", "lost-and-found", "fast-dynamic"};
}

Scenario makeScenario(const std::string& name, const ScenarioOptions& options) {
  Scenario s;
  if (name == "static-room") {
    s = staticRoom();
  } else if (name == "moving-chair") {
    s = movingChair();
  } else if (name == "lost-and-found") {
    s = lostAndFound();
  } else if (name == "fast-dynamic") {
    s = fastDynamic();
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "'");
  }
  if (options.duration > 0.0) s.duration = options.duration;
  if (options.texture_free) {
    double albedo = 0.45;
    for (auto& p : s.scene.primitives) {
      p.texture = Texture::flat(albedo);
      albedo += 0.07;
    }
  }
  if (options.noise) {
    s.render_noise.depth = true;
    s.render_noise.sigma_intensity = 0.01;
    s.imu_noise.enabled = true;
    s.imu_noise.params.g_W = s.scene.g_W;
  }
  return s;
}

DatasetSummary generateDataset(const Scenario& s, std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  std::error_code ec;
  for (const char* sub : {"intensity", "depth", "mask"}) {
    fs::create_directories(root / sub, ec);
    if (ec) throw std::runtime_error("cannot create " + (root / sub).string() + ": " + ec.message());
  }
  writeCalibration((root / "calib.txt").string(), s.calib);
  writeClassMap((root / "classmap.txt").string(), s.objects);

  DatasetSummary summary;
  summary.frames = s.frameCount();
  summary.imu_rows = s.imuCount();

  std::mt19937_64 imu_rng(seed);
  const auto imu = synthesizeImu(*s.camera, s.calib.T_SC, s.imu_rate, 0.0,
                                 (summary.imu_rows - 1) / s.imu_rate, s.scene.g_W, s.imu_noise,
                                 &imu_rng);
  writeImuCsv((root / "imu.csv").string(), imu);

  std::vector<StampedPose> gt_cam;
  std::vector<std::vector<StampedPose>> gt_obj(s.objects.size());
  std::ofstream index(root / "frames.csv");
  if (!index) throw std::runtime_error("cannot write frames.csv");
  index << "frame_id,timestamp_ns\n";
  char name[32];
  for (int k = 0; k < summary.frames; ++k) {
    const double t = s.frameTime(k);
    const std::int64_t ts = std::llround(t * 1e9);
    const Pose T_WC = s.camera->pose(t);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k), 0x5eedu};
    std::mt19937_64 rng(seq);
    const RenderedFrame f = renderFrame(s.scene, t, T_WC, s.calib.camera, s.render_noise, &rng);
    std::snprintf(name, sizeof(name), "%06d.png", k);
    writeIntensityPng((root / "intensity" / name).string(), f.intensity);
    writeDepthPng((root / "depth" / name).string(), f.depth);
    writeMaskPng((root / "mask" / name).string(), f.instance);
    index << k << ',' << ts << '\n';
    gt_cam.push_back({ts, T_WC});
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      for (const auto& p : s.scene.primitives) {
        if (p.instance == s.objects[i].instance) {
          gt_obj[i].push_back({ts, p.trajectory.pose(t)});
          break;
        }
      }
    }
  }
  if (!index) throw std::runtime_error("error writing frames.csv");
  writeTum((root / "groundtruth_cam.txt").string(), gt_cam);
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    writeTum((root / ("groundtruth_obj_" + std::to_string(s.objects[i].instance) + ".txt")).string(),
             gt_obj[i]);
  }
  return summary;
}

}  // namespace dynvio::sim
