// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cmath>
#include <optional>

#include <Eigen/Core>

#include "dynvio/core/image.hpp"
#include "dynvio/manifold/camera.hpp"

namespace dynvio {

using RowVector6d = Eigen::Matrix<double, 1, 6>;

struct CauchyResult {
  double rho;
  double weight;  ///< IRLS weight rho'(e) / e
};

/// rho = c^2/2 ln(1 + (e/c)^2), weight = 1 / (1 + (e/c)^2).
CauchyResult cauchy(double e, double c);

/// Stereo depth noise: (d/f sigma_xy, d/f sigma_xy, d^2/(f b) sigma_z), f = fx.
/// nullopt for d <= 0.
std::optional<Eigen::Vector3d> depthStddev(const CameraIntrinsics& K, double d);

/// Inverse-variance ICP weight 1 / (n.n * s.s), capped at w_max.
double icpWeight(const Eigen::Vector3d& n, const Eigen::Vector3d& sigma, double w_max = 1e8);

/// Scalar residual with its Jacobian w.r.t. the live pose perturbation
/// [dr, dalpha] (left perturbation of T_FC).
struct ScalarResidual {
  double error;
  RowVector6d jacobian;
};

/// e_p = I_ref - I_L(pi(T_FC^-1 p_F)), bilinear in I_L. nullopt if the point
/// falls behind the camera or outside the interpolation domain.
std::optional<ScalarResidual> photometricResidual(const Pose& T_FC_live, const CameraIntrinsics& K,
                                                  const ImageF& I_live, const Eigen::Vector3d& p_F,
                                                  double I_ref);

/// Same, with the reference point back-projected from the rendered depth at
/// u_R seen from T_WC_ref.
std::optional<ScalarResidual> photometricResidual(const Pose& T_WC_live, const Pose& T_WC_ref,
                                                  const CameraIntrinsics& K, const ImageF& I_ref,
                                                  const ImageF& I_live, const ImageF& D_ref,
                                                  const Eigen::Vector2i& u_ref);

/// Forward warp of live vertex v_L into the reference image:
/// pi(T_WC_ref^-1 T_WC_live v_L). nullopt if behind the reference camera or
/// outside the image.
std::optional<Eigen::Vector2d> icpCorrespondence(const Pose& T_WC_live, const Pose& T_WC_ref,
                                                 const CameraIntrinsics& K,
                                                 const Eigen::Vector3d& v_L);
std::optional<Eigen::Vector2d> icpCorrespondence(const Pose& T_WC_live, const Pose& T_WC_ref,
                                                 const CameraIntrinsics& K,
                                                 const Eigen::Vector2i& u_L, const ImageF& D_live);

/// e_g = n_r . (T_FC v_L - v_r) with v_r, n_r in F.
ScalarResidual icpResidual(const Pose& T_FC_live, const Eigen::Vector3d& v_L,
                           const Eigen::Vector3d& v_r, const Eigen::Vector3d& n_r);

struct IcpGate {
  double max_distance = 0.05;         ///< [m]
  double max_angle = 30.0 * M_PI / 180.0;  ///< [rad]
};

/// Distance and normal-angle gate; n_L may be zero (no live normal), in
/// which case only the distance is checked.
bool icpAccept(const Pose& T_FC_live, const Eigen::Vector3d& v_L, const Eigen::Vector3d& n_L,
               const Eigen::Vector3d& v_r, const Eigen::Vector3d& n_r, const IcpGate& gate);

}  // namespace dynvio
