// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <Eigen/Core>

#include "dynvio/manifold/pose.hpp"

namespace dynvio {

using Vector15d = Eigen::Matrix<double, 15, 1>;
using Matrix15d = Eigen::Matrix<double, 15, 15>;

/// Minimal tangent coordinates of a StateVector, ordered
/// [dr, dalpha, dv, dbg, dba]. Pure vector space.
using Perturbation = Vector15d;

/// Offsets of each 3-block inside a Perturbation.
namespace idx {
constexpr int kPos = 0;
constexpr int kRot = 3;
constexpr int kVel = 6;
constexpr int kBg = 9;
constexpr int kBa = 12;
}  // namespace idx

/// Estimator state at one time instant.
struct StateVector {
  Eigen::Vector3d r_WC = Eigen::Vector3d::Zero();  ///< camera position in world [m]
  Quaternion q_WC = Quaternion::Identity();        ///< camera orientation
  Eigen::Vector3d v_S = Eigen::Vector3d::Zero();   ///< IMU velocity, sensor frame [m/s]
  Eigen::Vector3d b_g = Eigen::Vector3d::Zero();   ///< gyro bias [rad/s]
  Eigen::Vector3d b_a = Eigen::Vector3d::Zero();   ///< accelerometer bias [m/s^2]

  Pose T_WC() const { return Pose(q_WC, r_WC); }
  void setPose(const Pose& T) {
    r_WC = T.translation();
    q_WC = T.rotation();
  }
  bool isFinite() const;
};

/// x [+] d: vector parts added, q <- Exp(dalpha) * q, renormalised.
StateVector boxplus(const StateVector& x, const Perturbation& delta);

/// x1 [-] x0, the inverse of boxplus: boxplus(x0, boxminus(x1, x0)) == x1.
Perturbation boxminus(const StateVector& x1, const StateVector& x0);

/// d(x1 [-] x0) / d(delta) with x1 replaced by boxplus(x1, delta), at delta = 0.
Matrix15d boxminusJacobianFirst(const StateVector& x1, const StateVector& x0);
/// d(x1 [-] x0) / d(delta) with x0 replaced by boxplus(x0, delta), at delta = 0.
Matrix15d boxminusJacobianSecond(const StateVector& x1, const StateVector& x0);

}  // namespace dynvio
