// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <vector>

#include <Eigen/Core>

#include "dynvio/imu/imu.hpp"
#include "dynvio/tracking/frame.hpp"
#include "dynvio/tracking/residuals.hpp"

namespace dynvio {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix30d = Eigen::Matrix<double, 30, 30>;
using Vector30d = Eigen::Matrix<double, 30, 1>;

struct TrackingParams {
  int levels = 3;
  int max_iterations = 10;  ///< per level
  double tolerance = 1e-6;  ///< on the update norm
  double sigma_photo = 0.02;
  double c_photo = 0.1;
  double c_icp = 0.02;
  double c_inertial = 3.0;
  IcpGate gate;
  double w_max = 1e8;
  int min_residuals = 100;  ///< at the finest level
  bool use_photometric = true;
  bool use_icp = true;
  bool use_inertial = true;
};

/// Gaussian prior on one state: E = 1/2 d^T H d - b^T d with d = x [-] x_bar.
struct MarginalizationPrior {
  Matrix15d H = Matrix15d::Zero();
  Vector15d b = Vector15d::Zero();
  StateVector x_bar;
};

/// Normal equations of the dense visual terms for the pose T_FC at one level.
/// b is the negative gradient.
struct VisualSystem {
  Matrix6d H = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double cost = 0.0;
  int photometric = 0;
  int icp = 0;
  int count() const { return photometric + icp; }
};

/// live_mask selects live pixels usable for ICP and as photometric warp
/// targets, one mask per level.
VisualSystem assembleVisual(const ReferencePyramid& ref, const LivePyramid& live,
                            const std::vector<Mask>& live_mask, int level, const Pose& T_FC,
                            const CameraIntrinsics& K0, const TrackingParams& params);

struct PoseSolveResult {
  Pose T_FC;
  bool degenerate = false;
  int valid_residuals = 0;
  Matrix6d H = Matrix6d::Zero();
};

/// Visual-only coarse-to-fine Gauss-Newton on a single pose.
PoseSolveResult solvePose(const ReferencePyramid& ref, const LivePyramid& live,
                          const std::vector<Mask>& live_mask, const Pose& T_FC_init,
                          const CameraIntrinsics& K0, const TrackingParams& params);

struct TrackingResult {
  StateVector x_R, x_L;
  Matrix30d H = Matrix30d::Zero();  ///< joint Hessian at the solution
  Vector30d b = Vector30d::Zero();  ///< negative gradient at the solution
  bool degenerate = false;
  int valid_residuals = 0;
  std::vector<double> costs;  ///< accepted costs, per level in order
  std::vector<int> level_of_cost;
};

/// Joint optimisation of (x_R, x_L) with the visual terms on the live pose,
/// the inertial term between both states and the prior on x_R. With fewer
/// than min_residuals visual residuals, x_L is the IMU prediction.
TrackingResult solveTracking(const StateVector& x_R, const StateVector& x_L_init,
                             const ReferencePyramid& ref, const LivePyramid& live,
                             const std::vector<Mask>& live_mask, const PreintegratedBatch& batch,
                             const ImuNoiseParams& imu, const MarginalizationPrior& prior,
                             const CameraIntrinsics& K0, const TrackingParams& params);

struct MarginalizationResult {
  MarginalizationPrior prior;
  bool clamped = false;  ///< negative eigenvalues were clamped
};

/// Schur complement of the reference block, linearised at x_L.
MarginalizationResult marginalizeReference(const Matrix30d& H, const Vector30d& b,
                                           const StateVector& x_L);

/// Gravity-aligned first state (minimal rotation, zero position, velocity
/// and biases) from averaged accelerometer samples.
StateVector gravityAlignedState(const std::vector<ImuMeasurement>& samples, const Pose& T_SC);

struct InitialSigmas {
  double r = 1e-4;
  double tilt = 1e-2;
  double yaw = 1.0;
  double v = 0.1;
  double bg = 0.01;
  double ba = 0.1;
};
MarginalizationPrior initialPrior(const StateVector& x0, const InitialSigmas& s = {});

}  // namespace dynvio
