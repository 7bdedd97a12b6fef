// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <Eigen/Core>

#include "dynvio/manifold/so3.hpp"

namespace dynvio {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Rigid transformation T_AB mapping points expressed in B into A.
///
/// Frames used throughout: W world (gravity aligned, origin at the first
/// camera), C camera, S IMU sensor, O object. Poses are named by frame pair,
/// e.g. T_WC is the camera pose in the world.
class Pose {
 public:
  Pose() : q_(Quaternion::Identity()), t_(Eigen::Vector3d::Zero()) {}
  Pose(const Quaternion& q, const Eigen::Vector3d& t) : q_(q.normalized()), t_(t) {}
  explicit Pose(const Eigen::Matrix4d& m);

  static Pose Identity() { return Pose(); }

  const Quaternion& rotation() const { return q_; }
  const Eigen::Vector3d& translation() const { return t_; }
  Eigen::Matrix3d rotationMatrix() const { return q_.toRotationMatrix(); }
  Eigen::Matrix4d matrix() const;

  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return q_ * p + t_; }

  /// Left perturbation: delta = [dr, dalpha], result (Exp(dalpha) q, t + dr).
  Pose oplus(const Vector6d& delta) const;

 private:
  Quaternion q_;
  Eigen::Vector3d t_;
};

/// Translation distance and rotation angle (rad) between two poses.
struct PoseError {
  double translation;
  double rotation;
};
PoseError poseError(const Pose& a, const Pose& b);

}  // namespace dynvio
