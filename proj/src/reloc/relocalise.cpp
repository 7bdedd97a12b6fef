// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/reloc/relocalise.hpp"

namespace dynvio {

bool shouldAttempt(const Detection& det, const ObjectModel& model, const CameraIntrinsics& K,
                   const RelocParams& params) {
  if (model.S_max <= 0) return false;
  const double ratio = static_cast<double>(det.size) / model.S_max;
  if (!(ratio > params.min_size_ratio)) return false;
  const double m = params.border_margin;
  const Eigen::Vector2d& c = det.centroid;
  return c.x() >= m && c.y() >= m && c.x() <= K.width - 1 - m && c.y() <= K.height - 1 - m;
}

std::optional<RelocCandidate> proposeRelocalisation(const ObjectModel& model,
                                                    const FeatureSet& live,
                                                    const CameraIntrinsics& K, std::uint64_t seed,
                                                    const RelocParams& params) {
  const auto km = matchAgainstKeyframes(model.keyframes, live, params.match);
  if (!km) return std::nullopt;
  const ObjectKeyframe& kf = model.keyframes[km->keyframe];
  std::vector<Eigen::Vector3d> p;
  std::vector<Eigen::Vector2d> z;
  for (const auto& [i, j] : km->matches.pairs) {
    p.push_back(kf.features.points[i]);
    z.push_back(live.keypoints[j]);
  }
  auto pnp = solvePnp(p, z, K, seed, params.pnp);
  if (!pnp) return std::nullopt;
  RelocCandidate c;
  c.keyframe = km->keyframe;
  c.matches = km->matches;
  c.T_CLO = pnp->T_CR_CL.inverse() * kf.T_CO;
  c.pnp = std::move(*pnp);
  return c;
}

Verification verifyCandidate(const ObjectModel& model, const Pose& T_CLO_candidate,
                             const LivePyramid& live, const std::vector<Mask>& live_mask,
                             const Pose& T_WC_L, const CameraIntrinsics& K,
                             const TrackingParams& tracking, const RelocParams& params) {
  Verification v;
  v.T_CLO = T_CLO_candidate;
  const Pose T_WO = T_WC_L * T_CLO_candidate;
  const RenderedView view = raycast({{model.id, &model.volume, T_WO}}, T_WC_L, K);
  Mask ref_mask(K.width, K.height, 0);
  for (std::size_t i = 0; i < ref_mask.size(); ++i) ref_mask[i] = view.instance[i] == model.id;
  const ReferencePyramid ref =
      buildReferencePyramid(K, view.intensity, view, ref_mask, T_WC_L, T_WO.inverse(),
                            tracking.levels);
  const ObjectTrackResult tr = trackObject(ref, live, live_mask, T_WC_L, T_WO, K, tracking);
  if (tr.lost) return v;
  v.T_CLO = tr.T_CLO;
  v.stats = icpStatistics(ref, live, live_mask[0], tr.T_CLO.inverse(), tracking.gate);
  v.accepted = v.stats.accepted > 0 && v.stats.mean_abs < params.max_mean_residual &&
               v.stats.validRatio() > params.min_valid_ratio;
  return v;
}

}  // namespace dynvio
