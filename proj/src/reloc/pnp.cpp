// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/reloc/pnp.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <opencv2/calib3d.hpp>
#include <opencv2/core.hpp>
#include <opencv2/core/eigen.hpp>

namespace dynvio {

namespace {

std::vector<Pose> p3p(const std::vector<Eigen::Vector3d>& p, const std::vector<Eigen::Vector2d>& z,
                      const std::array<int, 3>& idx, const cv::Mat& Kcv) {
  std::vector<cv::Point3d> obj;
  std::vector<cv::Point2d> img;
  for (int i : idx) {
    obj.emplace_back(p[i].x(), p[i].y(), p[i].z());
    img.emplace_back(z[i].x(), z[i].y());
  }
  std::vector<cv::Mat> rvecs, tvecs;
  std::vector<Pose> out;
  try {
    cv::solveP3P(obj, img, Kcv, cv::noArray(), rvecs, tvecs, cv::SOLVEPNP_P3P);
  } catch (const cv::Exception&) {
    return out;
  }
  for (std::size_t s = 0; s < rvecs.size(); ++s) {
    cv::Mat Rcv;
    cv::Rodrigues(rvecs[s], Rcv);
    Eigen::Matrix3d R;
    Eigen::Vector3d t;
    cv::cv2eigen(Rcv, R);
    cv::cv2eigen(tvecs[s], t);
    if (!R.allFinite() || !t.allFinite()) continue;
    out.emplace_back(Quaternion(R), t);
  }
  return out;
}

double reprojError2(const Pose& T_LR, const CameraIntrinsics& K, const Eigen::Vector3d& p,
                    const Eigen::Vector2d& z) {
  const auto u = K.project(T_LR * p);
  return u ? (*u - z).squaredNorm() : std::numeric_limits<double>::infinity();
}

}  // namespace

Pose refinePnp(const std::vector<Eigen::Vector3d>& p_R, const std::vector<Eigen::Vector2d>& z_L,
               const CameraIntrinsics& K, const Pose& T_CL_CR, int iterations) {
  Pose T = T_CL_CR;
  for (int it = 0; it < iterations; ++it) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Vector6d g = Vector6d::Zero();
    for (std::size_t i = 0; i < p_R.size(); ++i) {
      const Eigen::Vector3d q = T * p_R[i];
      if (q.z() <= 0.0) continue;
      const Eigen::Vector2d e = *K.project(q) - z_L[i];
      Eigen::Matrix<double, 3, 6> dq;
      dq << Eigen::Matrix3d::Identity(), -skew(T.rotation() * p_R[i]);
      const Eigen::Matrix<double, 2, 6> J = K.projectJacobian(q) * dq;
      H += J.transpose() * J;
      g += J.transpose() * e;
    }
    const Vector6d dx = H.ldlt().solve(-g);
    if (!dx.allFinite()) break;
    T = T.oplus(dx);
    if (dx.norm() < 1e-12) break;
  }
  return T;
}

std::optional<PnpResult> solvePnp(const std::vector<Eigen::Vector3d>& p_R,
                                  const std::vector<Eigen::Vector2d>& z_L,
                                  const CameraIntrinsics& K, std::uint64_t seed,
                                  const PnpParams& params) {
  const int n = static_cast<int>(p_R.size());
  if (n < 3 || z_L.size() != p_R.size()) return std::nullopt;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto key = [&](int i) {
      return std::array<double, 5>{z_L[i].x(), z_L[i].y(), p_R[i].x(), p_R[i].y(), p_R[i].z()};
    };
    return key(a) < key(b);
  });
  std::vector<Eigen::Vector3d> p(n);
  std::vector<Eigen::Vector2d> z(n);
  for (int i = 0; i < n; ++i) {
    p[i] = p_R[order[i]];
    z[i] = z_L[order[i]];
  }

  const cv::Mat Kcv = (cv::Mat_<double>(3, 3) << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1);
  const double gate2 = params.inlier_px * params.inlier_px;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  Pose best;
  int best_count = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int it = 0; it < params.iterations && best_count < n; ++it) {
    std::array<int, 3> s{};
    s[0] = pick(rng);
    do s[1] = pick(rng); while (s[1] == s[0]);
    do s[2] = pick(rng); while (s[2] == s[0] || s[2] == s[1]);
    for (const Pose& T : p3p(p, z, s, Kcv)) {
      int count = 0;
      double score = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e2 = reprojError2(T, K, p[i], z[i]);
        if (e2 < gate2) ++count;
        score += std::min(e2, gate2);
      }
      if (count > best_count || (count == best_count && score < best_score)) {
        best = T;
        best_count = count;
        best_score = score;
      }
    }
  }
  if (best_count < params.min_inliers) return std::nullopt;

  std::vector<int> inl;
  Pose T = best;
  for (int round = 0; round < 2; ++round) {
    inl.clear();
    std::vector<Eigen::Vector3d> pi;
    std::vector<Eigen::Vector2d> zi;
    for (int i = 0; i < n; ++i) {
      if (reprojError2(T, K, p[i], z[i]) < gate2) {
        inl.push_back(i);
        pi.push_back(p[i]);
        zi.push_back(z[i]);
      }
    }
    if (static_cast<int>(inl.size()) < params.min_inliers) return std::nullopt;
    T = refinePnp(pi, zi, K, T, params.refine_iterations);
  }

  PnpResult out;
  out.T_CR_CL = T.inverse();
  inl.clear();
  for (int i = 0; i < n; ++i)
    if (reprojError2(T, K, p[i], z[i]) < gate2) inl.push_back(order[i]);
  if (static_cast<int>(inl.size()) < params.min_inliers) return std::nullopt;
  std::sort(inl.begin(), inl.end());
  out.inliers = std::move(inl);
  return out;
}

}  // namespace dynvio
