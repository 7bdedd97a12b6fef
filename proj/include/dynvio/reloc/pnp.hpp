// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "dynvio/manifold/camera.hpp"

namespace dynvio {

struct PnpParams {
  int iterations = 500;
  double inlier_px = 2.0;
  int min_inliers = 6;
  int refine_iterations = 20;
};

struct PnpResult {
  Pose T_CR_CL;              ///< live camera in the reference (keyframe) camera
  std::vector<int> inliers;  ///< indices into the input, ascending
};

/// RANSAC over minimal three-point solutions followed by Gauss-Newton on the
/// inliers, for z_L[i] ~ pi(T_CR_CL^-1 p_R[i]). The correspondences are put in
/// a canonical order first, so the result does not depend on input order.
std::optional<PnpResult> solvePnp(const std::vector<Eigen::Vector3d>& p_R,
                                  const std::vector<Eigen::Vector2d>& z_L,
                                  const CameraIntrinsics& K, std::uint64_t seed,
                                  const PnpParams& params = {});

/// Minimises the reprojection error over T_CL_CR (points p_R in CR).
Pose refinePnp(const std::vector<Eigen::Vector3d>& p_R, const std::vector<Eigen::Vector2d>& z_L,
               const CameraIntrinsics& K, const Pose& T_CL_CR, int iterations);

}  // namespace dynvio
