// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dynvio/manifold/camera.hpp"
#include "dynvio/objects/detection.hpp"
#include "dynvio/sim/scene.hpp"

namespace dynvio::sim {

struct Scenario {
  std::string name;
  SceneSpec scene;
  std::shared_ptr<const TrajectorySpec> camera;
  Calibration calib;
  double duration = 0.0;     ///< [s]
  double frame_rate = 15.0;  ///< [Hz]
  double imu_rate = 200.0;   ///< [Hz]
  std::vector<ClassMapEntry> objects;
  RenderNoise render_noise;
  ImuSynthesisNoise imu_noise;

  int frameCount() const;
  int imuCount() const;
  double frameTime(int k) const { return k / frame_rate; }
};

struct ScenarioOptions {
  bool noise = false;         ///< depth model noise, intensity noise, IMU noise and biases
  bool texture_free = false;  ///< flat albedo everywhere
  double duration = 0.0;      ///< 0 = scenario default
};

/// Built-in scenarios: static-room, moving-chair, lost-and-found, fast-dynamic.
/// Throws std::invalid_argument for unknown names.
Scenario makeScenario(const std::string& name, const ScenarioOptions& options = {});
std::vector<std::string> scenarioNames();

/// Default simulated sensor: 320x240 RGB-D with stereo noise parameters and
/// an IMU mounted with a forward-left-up axis convention.
Calibration defaultCalibration();

struct DatasetSummary {
  int frames = 0;
  int imu_rows = 0;
};

/// Renders every frame and writes the dataset directory (created if missing).
/// Noise draws are seeded from `seed` and the frame index only.
/// Throws std::runtime_error on I/O failure.
DatasetSummary generateDataset(const Scenario& scenario, std::uint64_t seed,
                               const std::string& out_dir);

}  // namespace dynvio::sim
