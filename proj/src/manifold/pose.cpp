// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/manifold/pose.hpp"

namespace dynvio {

Pose::Pose(const Eigen::Matrix4d& m) {
  q_ = Quaternion(Eigen::Matrix3d(m.topLeftCorner<3, 3>())).normalized();
  t_ = m.topRightCorner<3, 1>();
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotationMatrix();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Pose Pose::inverse() const {
  const Quaternion qi = q_.conjugate();
  return Pose(qi, -(qi * t_));
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose(q_ * rhs.q_, q_ * rhs.t_ + t_);
}

Pose Pose::oplus(const Vector6d& delta) const {
  return Pose(expSO3(delta.tail<3>()) * q_, t_ + delta.head<3>());
}

PoseError poseError(const Pose& a, const Pose& b) {
  return {(a.translation() - b.translation()).norm(), angleBetween(a.rotation(), b.rotation())};
}

}  // namespace dynvio
