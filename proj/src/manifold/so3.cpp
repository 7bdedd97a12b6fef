// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/manifold/so3.hpp"

#include <cmath>

namespace dynvio {

namespace {
constexpr double kSmallAngle = 1e-8;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Quaternion expSO3(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  if (theta < kSmallAngle) {
    // q ~= (1 - theta^2/8, phi/2 (1 - theta^2/24))
    const double t2 = theta * theta;
    Quaternion q(1.0 - t2 / 8.0, 0.0, 0.0, 0.0);
    q.vec() = 0.5 * (1.0 - t2 / 24.0) * phi;
    q.normalize();
    return q;
  }
  const double half = 0.5 * theta;
  Quaternion q;
  q.w() = std::cos(half);
  q.vec() = (std::sin(half) / theta) * phi;
  return q;
}

Eigen::Vector3d logSO3(const Quaternion& qin) {
  Quaternion q = qin.normalized();
  if (q.w() < 0.0) {
    q.coeffs() = -q.coeffs();
  }
  const double vnorm = q.vec().norm();
  if (vnorm < kSmallAngle) {
    // 2 atan(|v|/w)/|v| ~= 2/w (1 - |v|^2 / (3 w^2))
    const double w = q.w();
    return (2.0 / w) * (1.0 - vnorm * vnorm / (3.0 * w * w)) * q.vec();
  }
  const double theta = 2.0 * std::atan2(vnorm, q.w());
  Eigen::Vector3d axis = q.vec() / vnorm;
  if (q.w() == 0.0) {
    for (int i = 0; i < 3; ++i) {
      if (axis[i] != 0.0) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

Eigen::Matrix3d leftJacobianSO3(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d K = skew(phi);
  if (theta < 1e-5) {
    return Eigen::Matrix3d::Identity() + 0.5 * K + K * K / 6.0;
  }
  const double t2 = theta * theta;
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * K +
         (theta - std::sin(theta)) / (t2 * theta) * K * K;
}

Eigen::Matrix3d rightJacobianSO3(const Eigen::Vector3d& phi) { return leftJacobianSO3(-phi); }

Eigen::Matrix3d leftJacobianInvSO3(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d K = skew(phi);
  if (theta < 1e-5) {
    return Eigen::Matrix3d::Identity() - 0.5 * K + K * K / 12.0;
  }
  const double t2 = theta * theta;
  const double coeff = 1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() - 0.5 * K + coeff * K * K;
}

Eigen::Matrix3d rightJacobianInvSO3(const Eigen::Vector3d& phi) { return leftJacobianInvSO3(-phi); }

double angleBetween(const Quaternion& a, const Quaternion& b) {
  return logSO3(a * b.inverse()).norm();
}

}  // namespace dynvio
