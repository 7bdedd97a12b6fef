// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/objects/object_model.hpp"

#include <cmath>

namespace dynvio {

const char* toString(TrackStatus s) { return s == TrackStatus::Live ? "live" : "lost"; }

const char* toString(MotionStatus s) {
  switch (s) {
    case MotionStatus::Static: return "static";
    case MotionStatus::Moving: return "moving";
    default: return "unknown";
  }
}

int ObjectModel::mostLikelyClass(int fallback) const {
  const auto c = dynvio::mostLikelyClass(volume);
  return c ? *c : fallback;
}

std::optional<ObjectModel> initializeObject(int id, const Detection& det, const ImageF& depth,
                                            const CameraIntrinsics& K, const Pose& T_WC,
                                            int min_valid) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  int n = 0;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!det.mask(x, y)) continue;
      const auto p = K.backproject(Eigen::Vector2d(x, y), depth(x, y));
      if (!p) continue;
      sum += *p;
      ++n;
    }
  }
  if (n < min_valid || n == 0) return std::nullopt;
  ObjectModel m;
  m.id = id;
  m.T_WO = Pose(Quaternion::Identity(), T_WC * (sum / n));
  m.T_WO_prev = m.T_WO;
  m.S_max = det.size;
  m.label = det.label;
  return m;
}

Mask refineMask(const Mask& mask, const ImageF& depth, const RenderedView& view, int model_id,
                const CameraIntrinsics& K, double gate_sigma) {
  Mask out = mask;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || view.instance(x, y) != model_id) continue;
      const auto s = depthStddev(K, view.depth(x, y));
      if (!s || !(depth(x, y) > 0.0f)) continue;
      if (std::abs(depth(x, y) - view.depth(x, y)) > gate_sigma * s->norm()) out(x, y) = 0;
    }
  }
  return out;
}

MotionVerdict classifyMotion(const Mask& mask, const ImageF& depth, const RenderedView& view,
                             int model_id, const Pose& T_WC, const CameraIntrinsics& K,
                             const ObjectParams& params) {
  MotionVerdict out;
  int inliers = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || view.instance(x, y) != model_id || !view.valid(x, y)) continue;
      const auto v_L = K.backproject(Eigen::Vector2d(x, y), depth(x, y));
      if (!v_L) continue;
      const auto s = depthStddev(K, depth(x, y));
      const Eigen::Vector3d n_r = view.normal(x, y).cast<double>();
      const double e = n_r.dot(T_WC * *v_L - view.vertex(x, y).cast<double>());
      ++out.pixels;
      if (std::abs(e) < params.motion_gate_sigma * s->norm()) ++inliers;
    }
  }
  if (out.pixels < params.motion_min_pixels) return out;
  out.inlier_ratio = static_cast<double>(inliers) / out.pixels;
  out.verdict = out.inlier_ratio >= params.static_ratio ? MotionStatus::Static : MotionStatus::Moving;
  return out;
}

void updateMotionStatus(ObjectModel& model, MotionStatus verdict, const ObjectParams& params) {
  if (model.motion == MotionStatus::Moving || verdict == MotionStatus::Unknown) return;
  if (verdict == MotionStatus::Moving) {
    model.motion = MotionStatus::Moving;
    return;
  }
  if (model.motion == MotionStatus::Unknown && ++model.static_votes >= params.unknown_frames) {
    model.motion = MotionStatus::Static;
  }
}

ObjectTrackResult trackObject(const ReferencePyramid& ref, const LivePyramid& live,
                              const std::vector<Mask>& live_mask, const Pose& T_WC_L,
                              const Pose& T_WO_init, const CameraIntrinsics& K0,
                              const TrackingParams& params) {
  const Pose T_OC_init = T_WO_init.inverse() * T_WC_L;
  const PoseSolveResult r = solvePose(ref, live, live_mask, T_OC_init, K0, params);
  ObjectTrackResult out;
  out.residuals = r.valid_residuals;
  out.lost = r.degenerate;
  out.T_CLO = (r.degenerate ? T_OC_init : r.T_FC).inverse();
  return out;
}

IcpStatistics icpStatistics(const ReferencePyramid& ref, const LivePyramid& live,
                            const Mask& live_mask, const Pose& T_FC, const IcpGate& gate) {
  IcpStatistics st;
  const VertexMap& V = live.vertex[0];
  const VertexMap& N = live.normal[0];
  const Pose T_RF = ref.T_FC.inverse();
  double sum = 0.0;
  for (int y = 0; y < V.height(); ++y) {
    for (int x = 0; x < V.width(); ++x) {
      if (!live_mask(x, y)) continue;
      const Eigen::Vector3d v_L = V(x, y).cast<double>();
      if (!(v_L.z() > 0.0)) continue;
      ++st.candidates;
      const auto u = ref.K[0].project(T_RF * (T_FC * v_L));
      if (!u) continue;
      const int ux = static_cast<int>(std::lround(u->x()));
      const int uy = static_cast<int>(std::lround(u->y()));
      if (!ref.valid[0].inside(ux, uy) || !ref.valid[0](ux, uy)) continue;
      const Eigen::Vector3d v_r = ref.point[0](ux, uy).cast<double>();
      const Eigen::Vector3d n_r = ref.normal[0](ux, uy).cast<double>();
      if (!icpAccept(T_FC, v_L, N(x, y).cast<double>(), v_r, n_r, gate)) continue;
      sum += std::abs(icpResidual(T_FC, v_L, v_r, n_r).error);
      ++st.accepted;
    }
  }
  if (st.accepted) st.mean_abs = sum / st.accepted;
  return st;
}

bool maybeAddKeyframe(ObjectModel& model, const Pose& T_CO, FeatureSet features,
                      double min_angle_deg) {
  const double min_angle = min_angle_deg * M_PI / 180.0;
  for (const auto& kf : model.keyframes) {
    if (!(angleBetween(kf.T_CO.rotation(), T_CO.rotation()) > min_angle)) return false;
  }
  model.keyframes.push_back({T_CO, std::move(features)});
  return true;
}

}  // namespace dynvio
