// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynvio/manifold/state.hpp"

namespace dynvio {

/// One IMU sample in the sensor frame S.
struct ImuMeasurement {
  std::int64_t timestamp_ns = 0;
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   ///< [rad/s]
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  ///< specific force [m/s^2]
};

/// Continuous-time noise densities and gravity.
struct ImuNoiseParams {
  double sigma_g = 1.7e-4;   ///< gyro noise density [rad/s/sqrt(Hz)]
  double sigma_a = 2.0e-3;   ///< accel noise density [m/s^2/sqrt(Hz)]
  double sigma_bg = 2.0e-5;  ///< gyro bias random walk [rad/s^2/sqrt(Hz)]
  double sigma_ba = 3.0e-4;  ///< accel bias random walk [m/s^3/sqrt(Hz)]
  Eigen::Vector3d g_W = Eigen::Vector3d(0.0, 0.0, -9.81);

  bool isValid() const {
    return sigma_g > 0.0 && sigma_a > 0.0 && sigma_bg > 0.0 && sigma_ba > 0.0 && g_W.allFinite();
  }
};

class MalformedBatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateInformationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// IMU samples covering [t_start, t_end], with samples at both ends
/// (interpolated if needed). A zero-duration batch has no samples.
struct PreintegratedBatch {
  std::int64_t t_start_ns = 0;
  std::int64_t t_end_ns = 0;
  std::vector<ImuMeasurement> measurements;
  Pose T_SC;  ///< camera-to-sensor extrinsic

  double duration() const { return 1e-9 * static_cast<double>(t_end_ns - t_start_ns); }
};

/// Cuts [t0, t1] out of a time-ordered stream, linearly interpolating the
/// boundary samples. Throws MalformedBatchError if the stream does not cover
/// the interval or is not strictly increasing.
PreintegratedBatch makeBatch(const std::vector<ImuMeasurement>& stream, std::int64_t t0_ns,
                             std::int64_t t1_ns, const Pose& T_SC);

/// Predicted live state with its covariance and the Jacobian of the
/// prediction w.r.t. the reference state (both in boxplus tangent coordinates).
struct Propagation {
  StateVector state;
  Matrix15d covariance = Matrix15d::Zero();
  Matrix15d jacobian = Matrix15d::Identity();
};

/// Midpoint integration of the IMU kinematics with bias-corrected samples.
/// `initial_covariance` is the covariance of x_R, carried through the error
/// dynamics (zero when x_R is treated as given).
Propagation propagate(const StateVector& x_R, const PreintegratedBatch& batch,
                      const ImuNoiseParams& params,
                      const Matrix15d& initial_covariance = Matrix15d::Zero());

/// e_s = x_hat_L(x_R) [-] x_L, with information and Jacobians.
struct InertialResidual {
  Vector15d error;
  Matrix15d information;
  Matrix15d jacobian_ref;   ///< d e / d delta_R
  Matrix15d jacobian_live;  ///< d e / d delta_L
};

/// Throws DegenerateInformationError if the regularised covariance has a
/// condition number above 1e12.
InertialResidual inertialResidual(const StateVector& x_R, const StateVector& x_L,
                                  const PreintegratedBatch& batch, const ImuNoiseParams& params);

/// IMU CSV: header `timestamp_ns,gx,gy,gz,ax,ay,az`.
std::vector<ImuMeasurement> readImuCsv(const std::string& path);
void writeImuCsv(const std::string& path, const std::vector<ImuMeasurement>& samples);

}  // namespace dynvio
