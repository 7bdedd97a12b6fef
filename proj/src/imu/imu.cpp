// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/imu/imu.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace dynvio {

namespace {

ImuMeasurement interpolate(const ImuMeasurement& a, const ImuMeasurement& b, std::int64_t t) {
  const double r = static_cast<double>(t - a.timestamp_ns) /
                   static_cast<double>(b.timestamp_ns - a.timestamp_ns);
  ImuMeasurement m;
  m.timestamp_ns = t;
  m.gyro = (1.0 - r) * a.gyro + r * b.gyro;
  m.accel = (1.0 - r) * a.accel + r * b.accel;
  return m;
}

/// Sensor-frame kinematic state used internally for integration. Tangent
/// order [dp, dtheta, dv, dbg, dba] with dtheta a left perturbation of R_WS
/// and dv a world-frame velocity increment.
struct SensorState {
  Eigen::Matrix3d R_WS;
  Eigen::Vector3d p_WS;
  Eigen::Vector3d v_W;
  Eigen::Vector3d b_g;
  Eigen::Vector3d b_a;
};

SensorState toSensor(const StateVector& x, const Pose& T_SC, Matrix15d* M_in) {
  const Pose T_CS = T_SC.inverse();
  const Eigen::Matrix3d R_WC = x.q_WC.toRotationMatrix();
  SensorState s;
  s.R_WS = R_WC * T_CS.rotationMatrix();
  const Eigen::Vector3d offset_W = R_WC * T_CS.translation();
  s.p_WS = x.r_WC + offset_W;
  s.v_W = s.R_WS * x.v_S;
  s.b_g = x.b_g;
  s.b_a = x.b_a;
  if (M_in) {
    M_in->setIdentity();
    M_in->block<3, 3>(idx::kPos, idx::kRot) = -skew(offset_W);
    M_in->block<3, 3>(idx::kVel, idx::kVel) = s.R_WS;
    M_in->block<3, 3>(idx::kVel, idx::kRot) = -skew(s.v_W);
  }
  return s;
}

StateVector fromSensor(const SensorState& s, const Pose& T_SC, Matrix15d* M_out) {
  StateVector x;
  const Eigen::Matrix3d R_WC = s.R_WS * T_SC.rotationMatrix();
  const Eigen::Vector3d offset_W = s.R_WS * T_SC.translation();
  x.q_WC = Quaternion(R_WC).normalized();
  x.r_WC = s.p_WS + offset_W;
  x.v_S = s.R_WS.transpose() * s.v_W;
  x.b_g = s.b_g;
  x.b_a = s.b_a;
  if (M_out) {
    M_out->setIdentity();
    M_out->block<3, 3>(idx::kPos, idx::kRot) = -skew(offset_W);
    M_out->block<3, 3>(idx::kVel, idx::kVel) = s.R_WS.transpose();
    M_out->block<3, 3>(idx::kVel, idx::kRot) = s.R_WS.transpose() * skew(s.v_W);
  }
  return x;
}

Eigen::Matrix3d expMatrix(const Eigen::Vector3d& phi) { return expSO3(phi).toRotationMatrix(); }

}  // namespace

PreintegratedBatch makeBatch(const std::vector<ImuMeasurement>& stream, std::int64_t t0,
                             std::int64_t t1, const Pose& T_SC) {
  if (t1 < t0) throw MalformedBatchError("batch end precedes start");
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (stream[i].timestamp_ns <= stream[i - 1].timestamp_ns) {
      throw MalformedBatchError("IMU timestamps not strictly increasing");
    }
  }
  PreintegratedBatch batch;
  batch.t_start_ns = t0;
  batch.t_end_ns = t1;
  batch.T_SC = T_SC;
  if (t1 == t0) return batch;
  if (stream.empty() || stream.front().timestamp_ns > t0 || stream.back().timestamp_ns < t1) {
    throw MalformedBatchError("IMU stream does not cover the requested interval");
  }
  auto sampleAt = [&](std::int64_t t) {
    auto it = std::lower_bound(stream.begin(), stream.end(), t,
                               [](const ImuMeasurement& m, std::int64_t v) {
                                 return m.timestamp_ns < v;
                               });
    if (it->timestamp_ns == t) return *it;
    return interpolate(*(it - 1), *it, t);
  };
  batch.measurements.push_back(sampleAt(t0));
  for (const auto& m : stream) {
    if (m.timestamp_ns > t0 && m.timestamp_ns < t1) batch.measurements.push_back(m);
  }
  batch.measurements.push_back(sampleAt(t1));
  return batch;
}

Propagation propagate(const StateVector& x_R, const PreintegratedBatch& batch,
                      const ImuNoiseParams& params, const Matrix15d& initial_covariance) {
  const auto& ms = batch.measurements;
  Propagation out;
  if (batch.t_end_ns == batch.t_start_ns) {
    out.state = x_R;
    out.covariance = initial_covariance;
    return out;
  }
  if (ms.size() < 2) throw MalformedBatchError("batch with positive duration needs two samples");
  if (ms.front().timestamp_ns != batch.t_start_ns || ms.back().timestamp_ns != batch.t_end_ns) {
    throw MalformedBatchError("batch samples do not span the batch interval");
  }
  for (std::size_t i = 1; i < ms.size(); ++i) {
    if (ms[i].timestamp_ns <= ms[i - 1].timestamp_ns) {
      throw MalformedBatchError("IMU timestamps not strictly increasing");
    }
  }

  Matrix15d M_in, M_out;
  SensorState s = toSensor(x_R, batch.T_SC, &M_in);
  Matrix15d J = Matrix15d::Identity();
  Matrix15d P = M_in * initial_covariance * M_in.transpose();
  const Eigen::Vector3d& g = params.g_W;
  const Eigen::Matrix3d I3 = Eigen::Matrix3d::Identity();

  for (std::size_t i = 0; i + 1 < ms.size(); ++i) {
    const double dt = 1e-9 * static_cast<double>(ms[i + 1].timestamp_ns - ms[i].timestamp_ns);
    const Eigen::Vector3d omega = 0.5 * (ms[i].gyro + ms[i + 1].gyro) - s.b_g;
    const Eigen::Vector3d phi = omega * dt;
    const Eigen::Matrix3d R0 = s.R_WS;
    const Eigen::Matrix3d R1 = R0 * expMatrix(phi);
    const Eigen::Vector3d f0 = R0 * (ms[i].accel - s.b_a);
    const Eigen::Vector3d f1 = R1 * (ms[i + 1].accel - s.b_a);
    const Eigen::Vector3d acc0 = f0 + g;
    const Eigen::Vector3d acc1 = f1 + g;

    // Step Jacobian F = d x_{k+1} / d x_k.
    const Eigen::Matrix3d dth1_dbg = -R1 * rightJacobianSO3(phi) * dt;
    const Eigen::Matrix3d dacc0_dth = -skew(f0);
    const Eigen::Matrix3d dacc0_dba = -R0;
    const Eigen::Matrix3d dacc1_dth = -skew(f1);  // w.r.t. dtheta1
    const Eigen::Matrix3d dacc1_dba = -R1;
    const Eigen::Matrix3d dacc1_dbg = dacc1_dth * dth1_dbg;

    Matrix15d F = Matrix15d::Identity();
    // rotation
    F.block<3, 3>(idx::kRot, idx::kBg) = dth1_dbg;
    // velocity
    const Eigen::Matrix3d dv_dth = 0.5 * dt * (dacc0_dth + dacc1_dth);
    F.block<3, 3>(idx::kVel, idx::kRot) = dv_dth;
    F.block<3, 3>(idx::kVel, idx::kBg) = 0.5 * dt * dacc1_dbg;
    F.block<3, 3>(idx::kVel, idx::kBa) = 0.5 * dt * (dacc0_dba + dacc1_dba);
    // position
    const double c = dt * dt / 6.0;
    F.block<3, 3>(idx::kPos, idx::kVel) = dt * I3;
    F.block<3, 3>(idx::kPos, idx::kRot) = c * (2.0 * dacc0_dth + dacc1_dth);
    F.block<3, 3>(idx::kPos, idx::kBg) = c * dacc1_dbg;
    F.block<3, 3>(idx::kPos, idx::kBa) = c * (2.0 * dacc0_dba + dacc1_dba);

    // Measurement noise enters exactly like the biases over this step.
    Eigen::Matrix<double, 15, 3> Gg = F.block<15, 3>(0, idx::kBg);
    Eigen::Matrix<double, 15, 3> Ga = F.block<15, 3>(0, idx::kBa);
    Gg.block<3, 3>(idx::kBg, 0).setZero();
    Ga.block<3, 3>(idx::kBa, 0).setZero();
    Matrix15d Q = (params.sigma_g * params.sigma_g / dt) * Gg * Gg.transpose() +
                  (params.sigma_a * params.sigma_a / dt) * Ga * Ga.transpose();
    Q.block<3, 3>(idx::kBg, idx::kBg) += params.sigma_bg * params.sigma_bg * dt * I3;
    Q.block<3, 3>(idx::kBa, idx::kBa) += params.sigma_ba * params.sigma_ba * dt * I3;

    P = F * P * F.transpose() + Q;
    J = F * J;

    s.p_WS = s.p_WS + s.v_W * dt + c * (2.0 * acc0 + acc1);
    s.v_W = s.v_W + 0.5 * dt * (acc0 + acc1);
    s.R_WS = R1;
  }

  // Re-orthonormalise before converting back.
  s.R_WS = Quaternion(s.R_WS).normalized().toRotationMatrix();
  out.state = fromSensor(s, batch.T_SC, &M_out);
  out.jacobian = M_out * J * M_in;
  out.covariance = M_out * P * M_out.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

InertialResidual inertialResidual(const StateVector& x_R, const StateVector& x_L,
                                  const PreintegratedBatch& batch, const ImuNoiseParams& params) {
  const Propagation pred = propagate(x_R, batch, params);
  InertialResidual r;
  r.error = boxminus(pred.state, x_L);
  r.jacobian_ref = boxminusJacobianFirst(pred.state, x_L) * pred.jacobian;
  r.jacobian_live = boxminusJacobianSecond(pred.state, x_L);

  const Matrix15d cov = pred.covariance + 1e-12 * Matrix15d::Identity();
  Eigen::SelfAdjointEigenSolver<Matrix15d> eig(cov);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12) {
    throw DegenerateInformationError("inertial covariance is ill-conditioned");
  }
  r.information = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                  eig.eigenvectors().transpose();
  r.information = 0.5 * (r.information + r.information.transpose()).eval();
  return r;
}

std::vector<ImuMeasurement> readImuCsv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open IMU file " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("timestamp_ns,gx,gy,gz,ax,ay,az", 0) != 0) {
    throw std::runtime_error("IMU file " + path + ": missing header");
  }
  std::vector<ImuMeasurement> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ImuMeasurement m;
    if (!(ls >> m.timestamp_ns >> m.gyro.x() >> m.gyro.y() >> m.gyro.z() >> m.accel.x() >>
          m.accel.y() >> m.accel.z())) {
      throw std::runtime_error("IMU file " + path + ": malformed row " + std::to_string(lineno));
    }
    out.push_back(m);
  }
  return out;
}

void writeImuCsv(const std::string& path, const std::vector<ImuMeasurement>& samples) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write IMU file " + path);
  std::fprintf(f, "timestamp_ns,gx,gy,gz,ax,ay,az\n");
  for (const auto& m : samples) {
    std::fprintf(f, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                 static_cast<long long>(m.timestamp_ns), m.gyro.x(), m.gyro.y(), m.gyro.z(),
                 m.accel.x(), m.accel.y(), m.accel.z());
  }
  if (std::fclose(f) != 0) throw std::runtime_error("failed writing IMU file " + path);
}

}  // namespace dynvio
