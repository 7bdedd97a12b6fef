// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dynvio/core/io.hpp"

namespace dynvio {

enum class Alignment { None, Rigid };

struct ErrorSample {
  double t = 0.0;  ///< [s]
  double err_trans_m = 0.0;
  double err_rot_deg = 0.0;
};

struct EvaluationReport {
  double ate_rmse_m = 0.0;
  int pairs = 0;
  Alignment alignment = Alignment::None;
  Pose T_gt_est;  ///< applied to the estimate (identity without alignment)
  std::vector<ErrorSample> series;
};

/// Nearest ground-truth sample within tolerance for each estimate, in order;
/// each ground-truth sample is used at most once.
std::vector<std::pair<int, int>> associateTimestamps(const std::vector<StampedPose>& est,
                                                    const std::vector<StampedPose>& gt,
                                                    std::int64_t tolerance_ns = 10'000'000);

/// Rotation and translation (no scale) minimising sum |T p_est - p_gt|^2.
Pose rigidAlignment(const std::vector<Eigen::Vector3d>& est, const std::vector<Eigen::Vector3d>& gt);

/// Throws std::runtime_error with fewer than two associated pairs.
EvaluationReport evaluateTrajectory(const std::vector<StampedPose>& est,
                                    const std::vector<StampedPose>& gt, Alignment align,
                                    std::int64_t tolerance_ns = 10'000'000);

/// Object pose error in the camera frame, T_CO = T_WC^-1 T_WO, after removing
/// the constant offset between the estimated and true object frames measured
/// at the first common sample. Estimated and true worlds may differ.
std::vector<ErrorSample> objectPoseErrors(const std::vector<StampedPose>& obj_est,
                                          const std::vector<StampedPose>& cam_est,
                                          const std::vector<StampedPose>& obj_gt,
                                          const std::vector<StampedPose>& cam_gt,
                                          std::int64_t tolerance_ns = 10'000'000);

std::string toJson(const EvaluationReport& report);
EvaluationReport evaluationFromJson(const std::string& text);

/// `t,err_trans_m,err_rot_deg` rows, one per sample.
void writeErrorCsv(const std::string& path, const std::vector<ErrorSample>& series);

}  // namespace dynvio
