// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <optional>

#include "dynvio/objects/object_model.hpp"
#include "dynvio/reloc/features.hpp"
#include "dynvio/reloc/pnp.hpp"

namespace dynvio {

struct RelocParams {
  double min_size_ratio = 0.7;
  int border_margin = 20;  ///< [px] between the mask centroid and every edge
  FeatureParams features;
  MatchParams match;
  PnpParams pnp;
  double max_mean_residual = 0.01;  ///< [m]
  double min_valid_ratio = 0.5;
  int max_attempts_per_frame = 8;  ///< 0 = unlimited
};

/// Size ratio S / S_max above the threshold and centroid inside the margin.
/// False for S_max <= 0.
bool shouldAttempt(const Detection& det, const ObjectModel& model, const CameraIntrinsics& K,
                   const RelocParams& params);

struct RelocCandidate {
  int keyframe = -1;
  MatchSet matches;
  PnpResult pnp;
  Pose T_CLO;  ///< object in the live camera
};

/// Keyframe matching followed by PnP; nullopt if either fails.
std::optional<RelocCandidate> proposeRelocalisation(const ObjectModel& model,
                                                    const FeatureSet& live,
                                                    const CameraIntrinsics& K, std::uint64_t seed,
                                                    const RelocParams& params);

struct Verification {
  bool accepted = false;
  Pose T_CLO;
  IcpStatistics stats;
};

/// Dense refinement of a candidate against the model rendered at the
/// candidate pose, then the residual and coverage gates.
Verification verifyCandidate(const ObjectModel& model, const Pose& T_CLO_candidate,
                             const LivePyramid& live, const std::vector<Mask>& live_mask,
                             const Pose& T_WC_L, const CameraIntrinsics& K,
                             const TrackingParams& tracking, const RelocParams& params);

}  // namespace dynvio
