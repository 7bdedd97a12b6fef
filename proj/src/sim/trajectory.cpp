// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/sim/trajectory.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Geometry>

#include "dynvio/manifold/so3.hpp"

namespace dynvio::sim {

PiecewisePoly::PiecewisePoly(double constant) { addPiece(0.0, {constant, 0, 0, 0, 0, 0}); }

void PiecewisePoly::addPiece(double t_start, const Coeffs& c) {
  if (!starts_.empty() && t_start <= starts_.back()) {
    throw std::invalid_argument("PiecewisePoly: pieces must be added in time order");
  }
  starts_.push_back(t_start);
  coeffs_.push_back(c);
}

double PiecewisePoly::eval(double t, int order) const {
  if (coeffs_.empty()) return 0.0;
  // Before the first piece: hold its starting value.
  if (t < starts_.front()) return order == 0 ? coeffs_.front()[0] : 0.0;
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - starts_.begin()) - 1;
  const double tau = t - starts_[i];
  const Coeffs& c = coeffs_[i];
  double r = 0.0;
  for (int k = 5; k >= order; --k) {
    double f = 1.0;
    for (int j = 0; j < order; ++j) f *= (k - j);
    r = r * tau + f * c[k];
  }
  return r;
}

PiecewisePoly PiecewisePoly::smoothThrough(const std::vector<double>& t,
                                           const std::vector<double>& x) {
  if (t.size() != x.size() || t.size() < 2) {
    throw std::invalid_argument("smoothThrough: need at least two keys of matching size");
  }
  const std::size_t n = t.size();
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (x[i] == x[i - 1] || x[i] == x[i + 1]) continue;
    v[i] = (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]);
  }
  PiecewisePoly p;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = t[i + 1] - t[i];
    if (!(h > 0.0)) throw std::invalid_argument("smoothThrough: key times must increase");
    // quintic Hermite with zero end accelerations
    const double x0 = x[i], x1 = x[i + 1];
    const double v0 = v[i] * h, v1 = v[i + 1] * h;  // in normalised time s = tau / h
    const double a3 = 10 * (x1 - x0) - 6 * v0 - 4 * v1;
    const double a4 = -15 * (x1 - x0) + 8 * v0 + 7 * v1;
    const double a5 = 6 * (x1 - x0) - 3 * v0 - 3 * v1;
    p.addPiece(t[i], {x0, v0 / h, 0.0, a3 / (h * h * h), a4 / (h * h * h * h),
                      a5 / (h * h * h * h * h)});
  }
  p.addPiece(t.back(), {x.back(), 0, 0, 0, 0, 0});
  return p;
}

PiecewisePoly PiecewisePoly::velocityStep(double x0, double t0, double v) {
  PiecewisePoly p;  // holds x0 before t0
  p.addPiece(t0, {x0, v, 0, 0, 0, 0});
  return p;
}

TrajectorySpec TrajectorySpec::constant(const Pose& T) {
  TrajectorySpec s;
  s.mount = T.rotation();
  for (int k = 0; k < 3; ++k) s.position[k] = PiecewisePoly(T.translation()[k]);
  return s;
}

namespace {

Eigen::Matrix3d axisRot(int axis, double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::Unit(axis)).toRotationMatrix();
}

/// Angular velocity and its derivative of A(t) = Rz(y) Ry(p) Rx(r), in the
/// frame of A: w = Rx^T (Ry^T y' e_z + p' e_y) + r' e_x.
std::pair<Eigen::Vector3d, Eigen::Vector3d> yprRates(const std::array<PiecewisePoly, 3>& ypr,
                                                     double t) {
  const Eigen::Matrix3d Ry = axisRot(1, ypr[1].value(t));
  const Eigen::Matrix3d Rx = axisRot(0, ypr[2].value(t));
  const Eigen::Vector3d ez(0, 0, ypr[0].d1(t)), ey(0, ypr[1].d1(t), 0), ex(ypr[2].d1(t), 0, 0);
  const Eigen::Vector3d u = Ry.transpose() * ez + ey;
  const Eigen::Vector3d u_dot = -skew(ey) * Ry.transpose() * ez +
                                Ry.transpose() * Eigen::Vector3d(0, 0, ypr[0].d2(t)) +
                                Eigen::Vector3d(0, ypr[1].d2(t), 0);
  const Eigen::Vector3d w = Rx.transpose() * u + ex;
  const Eigen::Vector3d w_dot = -skew(ex) * Rx.transpose() * u + Rx.transpose() * u_dot +
                                Eigen::Vector3d(ypr[2].d2(t), 0, 0);
  return {w, w_dot};
}

}  // namespace

Pose TrajectorySpec::pose(double t) const {
  const Eigen::Matrix3d R = axisRot(2, ypr[0].value(t)) * axisRot(1, ypr[1].value(t)) *
                            axisRot(0, ypr[2].value(t)) * mount.toRotationMatrix();
  const Pose local(Quaternion(R), Eigen::Vector3d(position[0].value(t), position[1].value(t),
                                                  position[2].value(t)));
  return parent ? parent->pose(t) * offset * local : offset * local;
}

Eigen::Vector3d TrajectorySpec::velocity(double t) const {
  return {position[0].d1(t), position[1].d1(t), position[2].d1(t)};
}

Eigen::Vector3d TrajectorySpec::acceleration(double t) const {
  return {position[0].d2(t), position[1].d2(t), position[2].d2(t)};
}

Eigen::Vector3d TrajectorySpec::omegaBody(double t) const {
  return mount.conjugate() * yprRates(ypr, t).first;
}

Eigen::Vector3d TrajectorySpec::omegaDotBody(double t) const {
  return mount.conjugate() * yprRates(ypr, t).second;
}

}  // namespace dynvio::sim
