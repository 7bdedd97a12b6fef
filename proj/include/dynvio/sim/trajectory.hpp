// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "dynvio/manifold/pose.hpp"

namespace dynvio::sim {

/// Scalar piecewise polynomial (degree <= 5) in local time tau = t - t_i.
/// Outside the breaks the end pieces are extrapolated with their value and
/// zero derivatives (the curve holds still).
class PiecewisePoly {
 public:
  using Coeffs = std::array<double, 6>;

  PiecewisePoly() = default;
  explicit PiecewisePoly(double constant);

  /// Quintic Hermite through (t_i, x_i) with zero acceleration at every key.
  /// Key velocities are Catmull-Rom, except zero at the ends and at keys
  /// adjacent to an equal value (so repeated keys hold still).
  static PiecewisePoly smoothThrough(const std::vector<double>& t, const std::vector<double>& x);

  /// x0 until t0, then x0 + v (t - t0): a velocity step.
  static PiecewisePoly velocityStep(double x0, double t0, double v);

  void addPiece(double t_start, const Coeffs& c);

  double value(double t) const { return eval(t, 0); }
  double d1(double t) const { return eval(t, 1); }
  double d2(double t) const { return eval(t, 2); }
  double d3(double t) const { return eval(t, 3); }

 private:
  double eval(double t, int order) const;
  std::vector<double> starts_;
  std::vector<Coeffs> coeffs_;
};

/// Rigid pose curve T(t) = parent(t) * offset * (Rz(yaw) Ry(pitch) Rx(roll) mount, p(t)).
/// Angles are about the fixed axes of the parent frame; `mount` is a
/// constant body-to-frame rotation (e.g. camera axes on a forward-x rig).
struct TrajectorySpec {
  Quaternion mount = Quaternion::Identity();
  std::array<PiecewisePoly, 3> position{PiecewisePoly(0.0), PiecewisePoly(0.0), PiecewisePoly(0.0)};
  std::array<PiecewisePoly, 3> ypr{PiecewisePoly(0.0), PiecewisePoly(0.0), PiecewisePoly(0.0)};
  std::shared_ptr<const TrajectorySpec> parent;  ///< pose only; derivatives ignore it
  Pose offset;

  static TrajectorySpec constant(const Pose& T);

  Pose pose(double t) const;
  Eigen::Vector3d velocity(double t) const;      ///< world frame
  Eigen::Vector3d acceleration(double t) const;  ///< world frame
  Eigen::Vector3d omegaBody(double t) const;     ///< angular velocity in the body frame
  Eigen::Vector3d omegaDotBody(double t) const;
};

}  // namespace dynvio::sim
