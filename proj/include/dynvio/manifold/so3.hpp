// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dynvio {

/// Quaternions are Hamiltonian (i*j = k) and use Eigen's storage order
/// (x, y, z, w). A quaternion q_AB rotates vectors from frame B into frame A.
using Quaternion = Eigen::Quaterniond;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Exponential map R^3 -> S^3. Falls back to a Taylor expansion for tiny angles.
Quaternion expSO3(const Eigen::Vector3d& phi);

/// Logarithm with the minimal angle (|phi| <= pi). At exactly pi the axis is
/// chosen so that its first nonzero component is non-negative.
Eigen::Vector3d logSO3(const Quaternion& q);

/// SO(3) Jacobians: Exp(phi + d) ~= Exp(phi) Exp(Jr(phi) d) ~= Exp(Jl(phi) d) Exp(phi).
Eigen::Matrix3d rightJacobianSO3(const Eigen::Vector3d& phi);
Eigen::Matrix3d leftJacobianSO3(const Eigen::Vector3d& phi);
Eigen::Matrix3d rightJacobianInvSO3(const Eigen::Vector3d& phi);
Eigen::Matrix3d leftJacobianInvSO3(const Eigen::Vector3d& phi);

/// Rotation angle in radians between two orientations.
double angleBetween(const Quaternion& a, const Quaternion& b);

}  // namespace dynvio
