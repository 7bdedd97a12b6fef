// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynvio/core/image.hpp"
#include "dynvio/manifold/pose.hpp"

namespace dynvio {

struct StampedPose {
  std::int64_t timestamp_ns = 0;
  Pose pose;
};

/// TUM trajectory text: `t tx ty tz qx qy qz qw` per line, t in seconds
/// with 9 decimals. '#' lines are comments. Throws std::runtime_error.
std::vector<StampedPose> readTum(const std::string& path);
void writeTum(const std::string& path, const std::vector<StampedPose>& poses);

/// Images on disk: intensity as 8-bit PNG (value / 255), depth as 16-bit PNG
/// in millimetres (0 = invalid), instance masks as 16-bit PNG.
ImageF readIntensityPng(const std::string& path);
void writeIntensityPng(const std::string& path, const ImageF& img);
ImageF readDepthPng(const std::string& path);
void writeDepthPng(const std::string& path, const ImageF& depth_m);
ImageU16 readMaskPng(const std::string& path);
void writeMaskPng(const std::string& path, const ImageU16& mask);

}  // namespace dynvio
