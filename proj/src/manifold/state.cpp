// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/manifold/state.hpp"

namespace dynvio {

bool StateVector::isFinite() const {
  return r_WC.allFinite() && q_WC.coeffs().allFinite() && v_S.allFinite() && b_g.allFinite() &&
         b_a.allFinite();
}

StateVector boxplus(const StateVector& x, const Perturbation& d) {
  StateVector out;
  out.r_WC = x.r_WC + d.segment<3>(idx::kPos);
  out.q_WC = (expSO3(d.segment<3>(idx::kRot)) * x.q_WC).normalized();
  out.v_S = x.v_S + d.segment<3>(idx::kVel);
  out.b_g = x.b_g + d.segment<3>(idx::kBg);
  out.b_a = x.b_a + d.segment<3>(idx::kBa);
  return out;
}

Perturbation boxminus(const StateVector& x1, const StateVector& x0) {
  Perturbation d;
  d.segment<3>(idx::kPos) = x1.r_WC - x0.r_WC;
  d.segment<3>(idx::kRot) = logSO3(x1.q_WC * x0.q_WC.conjugate());
  d.segment<3>(idx::kVel) = x1.v_S - x0.v_S;
  d.segment<3>(idx::kBg) = x1.b_g - x0.b_g;
  d.segment<3>(idx::kBa) = x1.b_a - x0.b_a;
  return d;
}

Matrix15d boxminusJacobianFirst(const StateVector& x1, const StateVector& x0) {
  Matrix15d J = Matrix15d::Identity();
  const Eigen::Vector3d e = logSO3(x1.q_WC * x0.q_WC.conjugate());
  J.block<3, 3>(idx::kRot, idx::kRot) = leftJacobianInvSO3(e);
  return J;
}

Matrix15d boxminusJacobianSecond(const StateVector& x1, const StateVector& x0) {
  Matrix15d J = -Matrix15d::Identity();
  const Eigen::Vector3d e = logSO3(x1.q_WC * x0.q_WC.conjugate());
  J.block<3, 3>(idx::kRot, idx::kRot) = -rightJacobianInvSO3(e);
  return J;
}

}  // namespace dynvio
