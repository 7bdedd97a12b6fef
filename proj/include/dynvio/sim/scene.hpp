// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynvio/core/image.hpp"
#include "dynvio/imu/imu.hpp"
#include "dynvio/manifold/camera.hpp"
#include "dynvio/sim/trajectory.hpp"

namespace dynvio::sim {

/// Procedural solid texture evaluated at primitive-local points.
struct Texture {
  enum class Kind { Checker, Noise, Flat };
  struct Wave {
    Eigen::Vector3d k;  ///< wave vector [rad/m]
    double phase, amplitude;
  };
  Kind kind = Kind::Flat;
  double scale = 0.25;  ///< checker square size [m]
  double contrast = 0.35;
  double base = 0.5;
  std::vector<Wave> waves;  ///< Noise only

  static Texture flat(double base);
  static Texture checker(double scale, double contrast = 0.35);
  /// Twelve random plane waves with wavelengths in [0.6, 2] x scale.
  static Texture noise(std::uint32_t seed, double scale, double contrast = 0.35);

  double albedo(const Eigen::Vector3d& p_local) const;
};

enum class Shape { Plane, Sphere, Box };

/// Shapes in their local frame: plane z = 0 with normal +z (size.xy are
/// half extents, 0 = unbounded), sphere of radius size.x, box of half
/// extents size. A ray starting inside a box hits its inner faces (rooms).
struct Primitive {
  Shape shape = Shape::Box;
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  Texture texture;
  TrajectorySpec trajectory;
  int instance = 0;  ///< 0 = background
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  Eigen::Vector3d g_W{0.0, 0.0, -9.81};
  Eigen::Vector3d light_dir = Eigen::Vector3d(0.3, -0.4, -1.0).normalized();  ///< direction light travels
  double ambient = 0.4;
};

/// Nearest hit of a world ray: distance along the (unit) direction, world
/// normal and intensity.
struct Hit {
  double t;
  Eigen::Vector3d normal;
  double intensity;
  int instance;
};
/// T_PW holds each primitive's inverse pose at the render time.
std::optional<Hit> castRay(const SceneSpec& scene, const std::vector<Pose>& T_PW,
                           const Eigen::Vector3d& o_W, const Eigen::Vector3d& d_W);

struct RenderNoise {
  bool depth = false;         ///< stereo model: lateral jitter sigma_xy, axial d^2/(f b) sigma_z
  double sigma_intensity = 0.0;
};

struct RenderedFrame {
  ImageF intensity;
  ImageF depth;       ///< camera z [m], 0 no hit
  ImageU16 instance;  ///< 0 background or no hit
};

RenderedFrame renderFrame(const SceneSpec& scene, double t, const Pose& T_WC,
                          const CameraIntrinsics& K, const RenderNoise& noise = {},
                          std::mt19937_64* rng = nullptr);

struct ImuSynthesisNoise {
  bool enabled = false;
  ImuNoiseParams params;
};

/// IMU samples at t0 + k / rate for t in [t0, t1], sensor rigidly attached
/// to the camera with extrinsic T_SC.
std::vector<ImuMeasurement> synthesizeImu(const TrajectorySpec& camera, const Pose& T_SC,
                                          double rate_hz, double t0, double t1,
                                          const Eigen::Vector3d& g_W,
                                          const ImuSynthesisNoise& noise = {},
                                          std::mt19937_64* rng = nullptr);

/// Ground-truth estimator state (velocity in the sensor frame) at time t.
StateVector trueState(const TrajectorySpec& camera, const Pose& T_SC, double t);

}  // namespace dynvio::sim
