// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/pipeline/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <Eigen/Geometry>
#include <json.hpp>

namespace dynvio {

namespace {

constexpr double kRad2Deg = 180.0 / M_PI;

}  // namespace

std::vector<std::pair<int, int>> associateTimestamps(const std::vector<StampedPose>& est,
                                                    const std::vector<StampedPose>& gt,
                                                    std::int64_t tolerance_ns) {
  std::vector<std::pair<int, int>> out;
  std::size_t j = 0;
  int last = -1;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const std::int64_t t = est[i].timestamp_ns;
    while (j + 1 < gt.size() && gt[j + 1].timestamp_ns <= t) ++j;
    int best = -1;
    std::int64_t best_dt = tolerance_ns + 1;
    for (std::size_t k = j; k < std::min(gt.size(), j + 2); ++k) {
      const std::int64_t dt = std::llabs(gt[k].timestamp_ns - t);
      if (dt < best_dt) {
        best_dt = dt;
        best = static_cast<int>(k);
      }
    }
    if (best >= 0 && best > last) {
      out.emplace_back(static_cast<int>(i), best);
      last = best;
    }
  }
  return out;
}

Pose rigidAlignment(const std::vector<Eigen::Vector3d>& est, const std::vector<Eigen::Vector3d>& gt) {
  Eigen::Matrix3Xd src(3, est.size()), dst(3, gt.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    src.col(i) = est[i];
    dst.col(i) = gt[i];
  }
  return Pose(Eigen::Matrix4d(Eigen::umeyama(src, dst, false)));
}

EvaluationReport evaluateTrajectory(const std::vector<StampedPose>& est,
                                    const std::vector<StampedPose>& gt, Alignment align,
                                    std::int64_t tolerance_ns) {
  const auto pairs = associateTimestamps(est, gt, tolerance_ns);
  if (pairs.size() < 2) {
    throw std::runtime_error("evaluation failed: " + std::to_string(pairs.size()) +
                             " timestamp-associated pairs (need 2)");
  }
  EvaluationReport r;
  r.pairs = static_cast<int>(pairs.size());
  r.alignment = align;
  if (align == Alignment::Rigid) {
    std::vector<Eigen::Vector3d> a, b;
    for (const auto& [i, j] : pairs) {
      a.push_back(est[i].pose.translation());
      b.push_back(gt[j].pose.translation());
    }
    r.T_gt_est = rigidAlignment(a, b);
  }
  double sq = 0.0;
  for (const auto& [i, j] : pairs) {
    const Pose aligned = r.T_gt_est * est[i].pose;
    const auto e = poseError(aligned, gt[j].pose);
    sq += e.translation * e.translation;
    r.series.push_back({1e-9 * static_cast<double>(est[i].timestamp_ns), e.translation,
                        e.rotation * kRad2Deg});
  }
  r.ate_rmse_m = std::sqrt(sq / static_cast<double>(pairs.size()));
  return r;
}

std::vector<ErrorSample> objectPoseErrors(const std::vector<StampedPose>& obj_est,
                                          const std::vector<StampedPose>& cam_est,
                                          const std::vector<StampedPose>& obj_gt,
                                          const std::vector<StampedPose>& cam_gt,
                                          std::int64_t tolerance_ns) {
  const auto at = [tolerance_ns](const std::vector<StampedPose>& v, std::int64_t t) -> const Pose* {
    const auto it = std::lower_bound(v.begin(), v.end(), t - tolerance_ns,
                                     [](const StampedPose& s, std::int64_t x) { return s.timestamp_ns < x; });
    const Pose* best = nullptr;
    std::int64_t best_dt = tolerance_ns + 1;
    for (auto k = it; k != v.end() && k->timestamp_ns <= t + tolerance_ns; ++k) {
      const std::int64_t dt = std::llabs(k->timestamp_ns - t);
      if (dt < best_dt) {
        best_dt = dt;
        best = &k->pose;
      }
    }
    return best;
  };
  std::vector<ErrorSample> out;
  bool have_offset = false;
  Pose X;
  for (const auto& s : obj_est) {
    const Pose* ce = at(cam_est, s.timestamp_ns);
    const Pose* og = at(obj_gt, s.timestamp_ns);
    const Pose* cg = at(cam_gt, s.timestamp_ns);
    if (!ce || !og || !cg) continue;
    const Pose T_CO_est = ce->inverse() * s.pose;
    const Pose T_CO_gt = cg->inverse() * *og;
    if (!have_offset) {
      X = T_CO_gt.inverse() * T_CO_est;
      have_offset = true;
    }
    const auto e = poseError(T_CO_gt * X, T_CO_est);
    out.push_back({1e-9 * static_cast<double>(s.timestamp_ns), e.translation, e.rotation * kRad2Deg});
  }
  return out;
}

std::string toJson(const EvaluationReport& r) {
  nlohmann::json j;
  j["ate_rmse_m"] = r.ate_rmse_m;
  j["pairs"] = r.pairs;
  j["alignment"] = r.alignment == Alignment::Rigid ? "rigid" : "none";
  const auto& q = r.T_gt_est.rotation();
  const auto& t = r.T_gt_est.translation();
  j["T_gt_est"] = {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()};
  auto& series = j["series"] = nlohmann::json::array();
  for (const auto& s : r.series) series.push_back({s.t, s.err_trans_m, s.err_rot_deg});
  return j.dump(2) + "\n";
}

EvaluationReport evaluationFromJson(const std::string& text) {
  EvaluationReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.ate_rmse_m = j.at("ate_rmse_m").get<double>();
    r.pairs = j.at("pairs").get<int>();
    const auto a = j.at("alignment").get<std::string>();
    if (a != "rigid" && a != "none") throw std::runtime_error("bad alignment '" + a + "'");
    r.alignment = a == "rigid" ? Alignment::Rigid : Alignment::None;
    const auto T = j.at("T_gt_est").get<std::vector<double>>();
    if (T.size() != 7) throw std::runtime_error("T_gt_est needs 7 values");
    r.T_gt_est = Pose(Quaternion(T[6], T[3], T[4], T[5]), {T[0], T[1], T[2]});
    for (const auto& row : j.at("series")) {
      const auto v = row.get<std::vector<double>>();
      if (v.size() != 3) throw std::runtime_error("series rows need 3 values");
      r.series.push_back({v[0], v[1], v[2]});
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

void writeErrorCsv(const std::string& path, const std::vector<ErrorSample>& series) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::fprintf(f, "t,err_trans_m,err_rot_deg\n");
  for (const auto& s : series) std::fprintf(f, "%.17g,%.17g,%.17g\n", s.t, s.err_trans_m, s.err_rot_deg);
  if (std::fclose(f) != 0) throw std::runtime_error("error writing " + path);
}

}  // namespace dynvio
