// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/tracking/tracker.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

namespace dynvio {

VisualSystem assembleVisual(const ReferencePyramid& ref, const LivePyramid& live,
                            const std::vector<Mask>& live_mask, int level, const Pose& T_FC,
                            const CameraIntrinsics& K0, const TrackingParams& params) {
  VisualSystem sys;
  const CameraIntrinsics& K = live.K[level];
  const ImageF& I_L = live.intensity[level];
  const VertexMap& V_L = live.vertex[level];
  const VertexMap& N_L = live.normal[level];
  const Mask& M_L = live_mask[level];
  const Mask& M_R = ref.valid[level];
  const VertexMap& P_R = ref.point[level];
  const VertexMap& N_R = ref.normal[level];
  const ImageF& I_R = ref.intensity[level];

  if (params.use_photometric) {
    const double w_p = 1.0 / (params.sigma_photo * params.sigma_photo);
    const Pose T_CF = T_FC.inverse();
    for (int y = 0; y < M_R.height(); ++y) {
      for (int x = 0; x < M_R.width(); ++x) {
        if (!M_R(x, y)) continue;
        const Eigen::Vector3d p_F = P_R(x, y).cast<double>();
        const Eigen::Vector3d p_C = T_CF * p_F;
        if (!(p_C.z() > 1e-6)) continue;
        // all four interpolation taps must be trackable live pixels on the
        // same surface (no occlusion, no mixing across depth edges)
        const double u = K.fx * p_C.x() / p_C.z() + K.cx;
        const double v = K.fy * p_C.y() / p_C.z() + K.cy;
        const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
        if (!M_L.inside(x0, y0) || !M_L.inside(x0 + 1, y0 + 1)) continue;
        bool taps_ok = true;
        for (int t = 0; t < 4 && taps_ok; ++t) {
          const int tx = x0 + (t & 1), ty = y0 + (t >> 1);
          const float z_L = V_L(tx, ty).z();
          taps_ok = M_L(tx, ty) && z_L > 0.0f &&
                    std::abs(z_L - p_C.z()) <= params.gate.max_distance;
        }
        if (!taps_ok) continue;
        const auto r = photometricResidual(T_FC, K, I_L, p_F, I_R(x, y));
        if (!r) continue;
        const auto k = cauchy(r->error, params.c_photo);
        sys.H.noalias() += (w_p * k.weight) * r->jacobian.transpose() * r->jacobian;
        sys.b.noalias() -= (w_p * k.weight * r->error) * r->jacobian.transpose();
        sys.cost += w_p * k.rho;
        ++sys.photometric;
      }
    }
  }

  if (params.use_icp) {
    const Pose T_RF = ref.T_FC.inverse();
    const CameraIntrinsics& KR = ref.K[level];
    for (int y = 0; y < V_L.height(); ++y) {
      for (int x = 0; x < V_L.width(); ++x) {
        if (!M_L(x, y)) continue;
        const Eigen::Vector3d v_L = V_L(x, y).cast<double>();
        if (!(v_L.z() > 0.0)) continue;
        const Eigen::Vector3d v_F = T_FC * v_L;
        const auto u = KR.project(T_RF * v_F);
        if (!u) continue;
        const int ux = static_cast<int>(std::lround(u->x()));
        const int uy = static_cast<int>(std::lround(u->y()));
        if (!M_R.inside(ux, uy) || !M_R(ux, uy)) continue;
        const Eigen::Vector3d v_r = P_R(ux, uy).cast<double>();
        const Eigen::Vector3d n_r = N_R(ux, uy).cast<double>();
        if (!icpAccept(T_FC, v_L, N_L(x, y).cast<double>(), v_r, n_r, params.gate)) continue;
        const auto sigma = depthStddev(K0, v_L.z());
        if (!sigma) continue;
        const double w_g = icpWeight(n_r, *sigma, params.w_max);
        const auto r = icpResidual(T_FC, v_L, v_r, n_r);
        const auto k = cauchy(r.error, params.c_icp);
        sys.H.noalias() += (w_g * k.weight) * r.jacobian.transpose() * r.jacobian;
        sys.b.noalias() -= (w_g * k.weight * r.error) * r.jacobian.transpose();
        sys.cost += w_g * k.rho;
        ++sys.icp;
      }
    }
  }
  return sys;
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> solveNormal(const Eigen::Matrix<double, N, N>& H,
                                        const Eigen::Matrix<double, N, 1>& b) {
  Eigen::LDLT<Eigen::Matrix<double, N, N>> ldlt(H);
  Eigen::Matrix<double, N, 1> x = ldlt.solve(b);
  if (ldlt.info() == Eigen::Success && x.allFinite() && ldlt.isPositive()) return x;
  // Rank-deficient system: small isotropic damping.
  const double lambda = 1e-9 * std::max(H.diagonal().maxCoeff(), 1e-12);
  Eigen::Matrix<double, N, N> Hd = H;
  Hd.diagonal().array() += lambda;
  x = Hd.ldlt().solve(b);
  return x.allFinite() ? x : Eigen::Matrix<double, N, 1>::Zero();
}

}  // namespace

PoseSolveResult solvePose(const ReferencePyramid& ref, const LivePyramid& live,
                          const std::vector<Mask>& live_mask, const Pose& T_FC_init,
                          const CameraIntrinsics& K0, const TrackingParams& params) {
  PoseSolveResult out;
  out.T_FC = T_FC_init;
  const VisualSystem first = assembleVisual(ref, live, live_mask, 0, T_FC_init, K0, params);
  out.valid_residuals = first.count();
  if (first.count() < params.min_residuals) {
    out.degenerate = true;
    return out;
  }
  Pose T = T_FC_init;
  for (int level = ref.levels() - 1; level >= 0; --level) {
    VisualSystem sys = assembleVisual(ref, live, live_mask, level, T, K0, params);
    for (int it = 0; it < params.max_iterations; ++it) {
      Vector6d delta = solveNormal<6>(sys.H, sys.b);
      bool accepted = false;
      for (int halving = 0; halving < 5; ++halving) {
        const Pose T_try = T.oplus(delta);
        VisualSystem trial = assembleVisual(ref, live, live_mask, level, T_try, K0, params);
        if (trial.count() > 0 && trial.cost <= sys.cost) {
          T = T_try;
          sys = trial;
          accepted = true;
          break;
        }
        delta *= 0.5;
      }
      if (!accepted || delta.norm() < params.tolerance) break;
    }
    if (level == 0) {
      out.H = sys.H;
      out.valid_residuals = sys.count();
    }
  }
  out.T_FC = T;
  return out;
}

namespace {

struct JointSystem {
  Matrix30d H = Matrix30d::Zero();
  Vector30d b = Vector30d::Zero();
  double cost = 0.0;
  int visual = 0;
};

JointSystem assembleJoint(const StateVector& x_R, const StateVector& x_L, int level, bool visual,
                          const ReferencePyramid& ref, const LivePyramid& live,
                          const std::vector<Mask>& live_mask, const PreintegratedBatch& batch,
                          const ImuNoiseParams& imu, const MarginalizationPrior& prior,
                          const CameraIntrinsics& K0, const TrackingParams& params) {
  JointSystem js;
  if (visual) {
    const VisualSystem v = assembleVisual(ref, live, live_mask, level, x_L.T_WC(), K0, params);
    js.H.block<6, 6>(15, 15) = v.H;
    js.b.segment<6>(15) = v.b;
    js.cost += v.cost;
    js.visual = v.count();
  }
  if (params.use_inertial && !batch.measurements.empty()) {
    const InertialResidual r = inertialResidual(x_R, x_L, batch, imu);
    Eigen::Matrix<double, 15, 30> J;
    J << r.jacobian_ref, r.jacobian_live;
    const double s2 = r.error.dot(r.information * r.error);
    const auto k = cauchy(std::sqrt(s2), params.c_inertial);
    js.H.noalias() += k.weight * J.transpose() * r.information * J;
    js.b.noalias() -= k.weight * J.transpose() * (r.information * r.error);
    js.cost += k.rho;
  }
  {
    const Vector15d d = boxminus(x_R, prior.x_bar);
    const Matrix15d J = boxminusJacobianFirst(x_R, prior.x_bar);
    js.H.block<15, 15>(0, 0).noalias() += J.transpose() * prior.H * J;
    js.b.segment<15>(0).noalias() -= J.transpose() * (prior.H * d - prior.b);
    js.cost += 0.5 * d.dot(prior.H * d) - prior.b.dot(d);
  }
  return js;
}

}  // namespace

TrackingResult solveTracking(const StateVector& x_R0, const StateVector& x_L_init,
                             const ReferencePyramid& ref, const LivePyramid& live,
                             const std::vector<Mask>& live_mask, const PreintegratedBatch& batch,
                             const ImuNoiseParams& imu, const MarginalizationPrior& prior,
                             const CameraIntrinsics& K0, const TrackingParams& params) {
  TrackingResult out;
  StateVector x_R = x_R0, x_L = x_L_init;

  const VisualSystem first = assembleVisual(ref, live, live_mask, 0, x_L.T_WC(), K0, params);
  out.valid_residuals = first.count();
  if (first.count() < params.min_residuals) {
    out.degenerate = true;
    if (!batch.measurements.empty()) x_L = propagate(x_R, batch, imu).state;
    const JointSystem js = assembleJoint(x_R, x_L, 0, false, ref, live, live_mask, batch, imu,
                                         prior, K0, params);
    out.x_R = x_R;
    out.x_L = x_L;
    out.H = js.H;
    out.b = js.b;
    return out;
  }

  JointSystem sys;
  for (int level = ref.levels() - 1; level >= 0; --level) {
    sys = assembleJoint(x_R, x_L, level, true, ref, live, live_mask, batch, imu, prior, K0, params);
    out.costs.push_back(sys.cost);
    out.level_of_cost.push_back(level);
    for (int it = 0; it < params.max_iterations; ++it) {
      Vector30d delta = solveNormal<30>(sys.H, sys.b);
      bool accepted = false;
      for (int halving = 0; halving < 5; ++halving) {
        const StateVector r_try = boxplus(x_R, delta.head<15>());
        const StateVector l_try = boxplus(x_L, delta.tail<15>());
        JointSystem trial = assembleJoint(r_try, l_try, level, true, ref, live, live_mask, batch,
                                          imu, prior, K0, params);
        if (trial.visual > 0 && trial.cost <= sys.cost) {
          x_R = r_try;
          x_L = l_try;
          sys = trial;
          accepted = true;
          out.costs.push_back(sys.cost);
          out.level_of_cost.push_back(level);
          break;
        }
        delta *= 0.5;
      }
      if (!accepted || delta.norm() < params.tolerance) break;
    }
  }
  out.x_R = x_R;
  out.x_L = x_L;
  out.H = sys.H;
  out.b = sys.b;
  out.valid_residuals = sys.visual;
  return out;
}

MarginalizationResult marginalizeReference(const Matrix30d& H, const Vector30d& b,
                                           const StateVector& x_L) {
  MarginalizationResult out;
  const Matrix15d H_RR = 0.5 * (H.topLeftCorner<15, 15>() + H.topLeftCorner<15, 15>().transpose());
  const Matrix15d H_LR = H.bottomLeftCorner<15, 15>();
  const Matrix15d H_LL = H.bottomRightCorner<15, 15>();

  // Pseudo-inverse of the reference block via its eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Matrix15d> es(H_RR);
  const Vector15d ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Vector15d inv = Vector15d::Zero();
  for (int i = 0; i < 15; ++i) {
    if (ev[i] > tol) {
      inv[i] = 1.0 / ev[i];
    } else {
      out.clamped = true;
    }
  }
  const Matrix15d H_RR_inv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

  Matrix15d S = H_LL - H_LR * H_RR_inv * H_LR.transpose();
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix15d> ss(S);
  if (ss.eigenvalues().minCoeff() < 0.0) {
    out.clamped = true;
    const Vector15d lam = ss.eigenvalues().cwiseMax(0.0);
    S = ss.eigenvectors() * lam.asDiagonal() * ss.eigenvectors().transpose();
  }
  out.prior.H = S;
  out.prior.b = b.tail<15>() - H_LR * H_RR_inv * b.head<15>();
  out.prior.x_bar = x_L;
  return out;
}

StateVector gravityAlignedState(const std::vector<ImuMeasurement>& samples, const Pose& T_SC) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& m : samples) mean += m.accel;
  StateVector x;
  if (samples.empty() || mean.norm() < 1e-9) {
    x.setPose(Pose());
    return x;
  }
  mean /= static_cast<double>(samples.size());
  // at rest the specific force points up
  const Quaternion q_WS = Quaternion::FromTwoVectors(mean, Eigen::Vector3d::UnitZ());
  x.q_WC = (q_WS * T_SC.rotation()).normalized();
  x.r_WC.setZero();
  return x;
}

MarginalizationPrior initialPrior(const StateVector& x0, const InitialSigmas& s) {
  MarginalizationPrior p;
  Vector15d sigma;
  sigma << s.r, s.r, s.r, s.tilt, s.tilt, s.yaw, s.v, s.v, s.v, s.bg, s.bg, s.bg, s.ba, s.ba, s.ba;
  p.H = sigma.cwiseInverse().cwiseAbs2().asDiagonal();
  p.x_bar = x0;
  return p;
}

}  // namespace dynvio
