// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/tracking/residuals.hpp"

#include <cmath>

#include "dynvio/manifold/so3.hpp"

namespace dynvio {

CauchyResult cauchy(double e, double c) {
  const double r = (e / c) * (e / c);
  return {0.5 * c * c * std::log1p(r), 1.0 / (1.0 + r)};
}

std::optional<Eigen::Vector3d> depthStddev(const CameraIntrinsics& K, double d) {
  if (!(d > 0.0)) return std::nullopt;
  const double f = K.fx;
  const double s_xy = d / f * K.sigma_xy;
  return Eigen::Vector3d(s_xy, s_xy, d * d / (f * K.baseline) * K.sigma_z);
}

double icpWeight(const Eigen::Vector3d& n, const Eigen::Vector3d& sigma, double w_max) {
  const double denom = n.squaredNorm() * sigma.squaredNorm();
  if (!(denom > 1.0 / w_max)) return w_max;
  return 1.0 / denom;
}

std::optional<ScalarResidual> photometricResidual(const Pose& T_FC, const CameraIntrinsics& K,
                                                  const ImageF& I_live, const Eigen::Vector3d& p_F,
                                                  double I_ref) {
  const Eigen::Matrix3d Rt = T_FC.rotationMatrix().transpose();
  const Eigen::Vector3d d = p_F - T_FC.translation();
  const Eigen::Vector3d p_C = Rt * d;
  if (!(p_C.z() > 1e-6)) return std::nullopt;
  const double u = K.fx * p_C.x() / p_C.z() + K.cx;
  const double v = K.fy * p_C.y() / p_C.z() + K.cy;
  const auto s = bilinearWithGradient(I_live, u, v);
  if (!s) return std::nullopt;
  Eigen::Matrix<double, 3, 6> dp;
  dp.leftCols<3>() = -Rt;
  dp.rightCols<3>() = Rt * skew(d);
  ScalarResidual r;
  r.error = I_ref - s->value;
  r.jacobian = -s->gradient.transpose() * K.projectJacobian(p_C) * dp;
  return r;
}

std::optional<ScalarResidual> photometricResidual(const Pose& T_WC_live, const Pose& T_WC_ref,
                                                  const CameraIntrinsics& K, const ImageF& I_ref,
                                                  const ImageF& I_live, const ImageF& D_ref,
                                                  const Eigen::Vector2i& u_ref) {
  if (!D_ref.inside(u_ref.x(), u_ref.y())) return std::nullopt;
  const auto p = K.backproject(u_ref.cast<double>(), D_ref(u_ref.x(), u_ref.y()));
  if (!p) return std::nullopt;
  return photometricResidual(T_WC_live, K, I_live, T_WC_ref * *p, I_ref(u_ref.x(), u_ref.y()));
}

std::optional<Eigen::Vector2d> icpCorrespondence(const Pose& T_WC_live, const Pose& T_WC_ref,
                                                 const CameraIntrinsics& K,
                                                 const Eigen::Vector3d& v_L) {
  const Eigen::Vector3d p_R = T_WC_ref.inverse() * (T_WC_live * v_L);
  const auto u = K.project(p_R);
  // pixel footprints extend half a pixel past the outer centres
  if (!u || !K.inImage(*u, -0.5) || u->x() >= K.width - 0.5 || u->y() >= K.height - 0.5) {
    return std::nullopt;
  }
  return u;
}

std::optional<Eigen::Vector2d> icpCorrespondence(const Pose& T_WC_live, const Pose& T_WC_ref,
                                                 const CameraIntrinsics& K,
                                                 const Eigen::Vector2i& u_L, const ImageF& D_live) {
  if (!D_live.inside(u_L.x(), u_L.y())) return std::nullopt;
  const auto v = K.backproject(u_L.cast<double>(), D_live(u_L.x(), u_L.y()));
  if (!v) return std::nullopt;
  return icpCorrespondence(T_WC_live, T_WC_ref, K, *v);
}

ScalarResidual icpResidual(const Pose& T_FC, const Eigen::Vector3d& v_L,
                           const Eigen::Vector3d& v_r, const Eigen::Vector3d& n_r) {
  const Eigen::Vector3d Rv = T_FC.rotation() * v_L;
  ScalarResidual r;
  r.error = n_r.dot(Rv + T_FC.translation() - v_r);
  r.jacobian.leftCols<3>() = n_r.transpose();
  r.jacobian.rightCols<3>() = -n_r.transpose() * skew(Rv);
  return r;
}

bool icpAccept(const Pose& T_FC, const Eigen::Vector3d& v_L, const Eigen::Vector3d& n_L,
               const Eigen::Vector3d& v_r, const Eigen::Vector3d& n_r, const IcpGate& gate) {
  if ((T_FC * v_L - v_r).norm() > gate.max_distance) return false;
  if (n_L.squaredNorm() == 0.0) return true;
  const double c = (T_FC.rotation() * n_L).dot(n_r) / (n_L.norm() * n_r.norm());
  return c >= std::cos(gate.max_angle);
}

}  // namespace dynvio
