// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <optional>
#include <vector>

#include "dynvio/map/tsdf_volume.hpp"
#include "dynvio/objects/detection.hpp"
#include "dynvio/reloc/features.hpp"
#include "dynvio/tracking/tracker.hpp"

namespace dynvio {

enum class TrackStatus { Live, Lost };
/// Unknown until enough frames have been classified; Moving is sticky.
enum class MotionStatus { Unknown, Static, Moving };

const char* toString(TrackStatus s);
const char* toString(MotionStatus s);

struct ObjectParams {
  double iou_threshold = 0.8;
  int min_valid_depth = 200;
  double keyframe_angle_deg = 10.0;
  double motion_gate_sigma = 3.0;
  double static_ratio = 0.9;
  int motion_min_pixels = 50;
  int unknown_frames = 15;  ///< static verdicts needed before Unknown becomes Static
  int person_class = 1;
  double refine_gate_sigma = 3.0;
  /// Photometric sigma for object tracking. Looser than the camera's: shading
  /// of a rotating object changes between frames.
  double sigma_photo = 0.1;
  int reference_erosion = 1;  ///< [px] trimmed off rendered silhouettes before tracking
};

struct ObjectModel {
  int id = 0;
  TsdfVolume volume{VolumeParams::object()};
  Pose T_WO;
  Pose T_WO_prev;  ///< previous frame, for motion prediction
  TrackStatus status = TrackStatus::Live;
  MotionStatus motion = MotionStatus::Unknown;
  int S_max = 0;
  std::vector<ObjectKeyframe> keyframes;
  int label = 0;  ///< instance label of the last associated detection
  int created_frame = 0;
  int last_seen_frame = 0;
  int static_votes = 0;

  /// Histogram argmax, falling back to `fallback` for an empty histogram.
  int mostLikelyClass(int fallback = -1) const;
};

/// New model at the world centroid of the masked depth with identity
/// rotation; nullopt (deferred) with fewer than min_valid valid depths.
std::optional<ObjectModel> initializeObject(int id, const Detection& det, const ImageF& depth,
                                            const CameraIntrinsics& K, const Pose& T_WC,
                                            int min_valid);

/// Drops mask pixels whose depth lies farther than gate_sigma * |sigma_D(z)|
/// from the rendered depth of `model_id`. Pixels where the model renders
/// nothing are kept.
Mask refineMask(const Mask& mask, const ImageF& depth, const RenderedView& view, int model_id,
                const CameraIntrinsics& K, double gate_sigma);

struct MotionVerdict {
  MotionStatus verdict = MotionStatus::Unknown;  ///< Unknown: too few pixels to decide
  double inlier_ratio = 0.0;
  int pixels = 0;
};

/// Point-to-plane residuals of the object's masked live vertices against its
/// rendering under the static hypothesis (model at its previous pose, camera
/// at its estimated pose). Static iff inlier ratio >= params.static_ratio.
MotionVerdict classifyMotion(const Mask& mask, const ImageF& depth, const RenderedView& view,
                             int model_id, const Pose& T_WC, const CameraIntrinsics& K,
                             const ObjectParams& params);

/// Folds one verdict into the model's motion status.
void updateMotionStatus(ObjectModel& model, MotionStatus verdict, const ObjectParams& params);

struct ObjectTrackResult {
  Pose T_CLO;
  bool lost = false;  ///< too few residuals
  int residuals = 0;
};

/// Pose of the object relative to the live camera, with the camera held at
/// T_WC_L. `ref` must be expressed in the object frame of T_WO_ref.
ObjectTrackResult trackObject(const ReferencePyramid& ref, const LivePyramid& live,
                              const std::vector<Mask>& live_mask, const Pose& T_WC_L,
                              const Pose& T_WO_init, const CameraIntrinsics& K0,
                              const TrackingParams& params);

struct IcpStatistics {
  double mean_abs = 0.0;  ///< mean |e_g| over accepted correspondences [m]
  int accepted = 0;
  int candidates = 0;  ///< masked live pixels with valid depth
  double validRatio() const { return candidates ? static_cast<double>(accepted) / candidates : 0.0; }
};

/// Finest-level ICP correspondence statistics for live pose T_FC.
IcpStatistics icpStatistics(const ReferencePyramid& ref, const LivePyramid& live,
                            const Mask& live_mask, const Pose& T_FC, const IcpGate& gate);

/// Appends a keyframe if the list is empty or T_CO's rotation differs from
/// every stored keyframe's by more than min_angle_deg. Returns whether added.
bool maybeAddKeyframe(ObjectModel& model, const Pose& T_CO, FeatureSet features,
                      double min_angle_deg);

}  // namespace dynvio
