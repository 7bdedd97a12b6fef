// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "dynvio/manifold/pose.hpp"

namespace dynvio {

/// Pinhole RGB-D camera together with the stereo depth noise model parameters.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  ///< focal lengths [px]
  double cx = 0.0, cy = 0.0;  ///< principal point [px]
  int width = 0, height = 0;  ///< image size [px]
  double baseline = 0.0;      ///< depth sensor baseline [m]
  double sigma_xy = 0.0;      ///< lateral pixel noise [px]
  double sigma_z = 0.0;       ///< disparity noise [px]

  bool isValid() const;

  /// Intrinsics of the next pyramid level (2x2 averaging, pixel centres at integers).
  CameraIntrinsics downsampled() const;

  /// Pinhole projection; nullopt for non-positive depth.
  std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& p_C) const;

  /// Projection Jacobian d(u,v)/d(p_C) (depth must be positive).
  Eigen::Matrix<double, 2, 3> projectJacobian(const Eigen::Vector3d& p_C) const;

  /// Back-projection of pixel u at depth d [m]; nullopt for d <= 0.
  std::optional<Eigen::Vector3d> backproject(const Eigen::Vector2d& u, double depth) const;

  bool inImage(const Eigen::Vector2d& u, double border = 0.0) const {
    return u.x() >= border && u.y() >= border && u.x() <= width - 1 - border &&
           u.y() <= height - 1 - border;
  }
};

/// Sensor calibration: intrinsics plus the camera-to-IMU extrinsic T_SC.
struct Calibration {
  CameraIntrinsics camera;
  Pose T_SC;
};

/// Reads/writes the calibration text file (`key = value` per line).
/// Throws std::runtime_error on I/O failure or missing/invalid keys.
Calibration readCalibration(const std::string& path);
void writeCalibration(const std::string& path, const Calibration& calib);

}  // namespace dynvio
