// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dynvio/core/image.hpp"
#include "dynvio/manifold/camera.hpp"

namespace dynvio {

/// 256-bit binary descriptor.
using Descriptor = std::array<std::uint64_t, 4>;

int hammingDistance(const Descriptor& a, const Descriptor& b);

/// Keypoints, descriptors and back-projected camera-frame points, aligned.
struct FeatureSet {
  std::vector<Eigen::Vector2d> keypoints;
  std::vector<Descriptor> descriptors;
  std::vector<Eigen::Vector3d> points;

  std::size_t size() const { return keypoints.size(); }
  bool empty() const { return keypoints.empty(); }
};

struct FeatureParams {
  int max_corners = 300;
  double quality = 0.02;      ///< relative to the strongest min-eigenvalue response
  double min_distance = 3.0;  ///< [px] between corners
  int block_size = 5;
};

/// Shi-Tomasi corners with sub-pixel refinement inside `mask`, oriented by
/// the intensity centroid, described by rotated BRIEF on the smoothed image.
/// Corners without valid depth or too close to the border for a descriptor
/// are dropped.
FeatureSet detectFeatures(const ImageF& intensity, const ImageF& depth, const Mask& mask,
                          const CameraIntrinsics& K, const FeatureParams& params = {});

struct ObjectKeyframe {
  Pose T_CO;  ///< object in the capturing camera
  FeatureSet features;
};

struct MatchParams {
  int max_hamming = 64;
  double ratio = 0.8;
  int min_matches = 12;
};

struct MatchSet {
  std::vector<std::pair<int, int>> pairs;  ///< (keyframe index, live index)
  std::vector<int> distances;
  std::size_t size() const { return pairs.size(); }
};

/// Mutual nearest neighbours under Hamming distance with a distance cap and
/// a ratio test on both sides. Ties go to the lowest index.
MatchSet matchFeatures(const FeatureSet& keyframe, const FeatureSet& live,
                       const MatchParams& params = {});

struct KeyframeMatch {
  int keyframe = -1;
  MatchSet matches;
};

/// Keyframe with the most matches (first on ties); nullopt unless it has at
/// least min_matches.
std::optional<KeyframeMatch> matchAgainstKeyframes(const std::vector<ObjectKeyframe>& keyframes,
                                                   const FeatureSet& live,
                                                   const MatchParams& params = {});

}  // namespace dynvio
