// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynvio/core/image.hpp"
#include "dynvio/imu/imu.hpp"
#include "dynvio/manifold/camera.hpp"
#include "dynvio/objects/detection.hpp"

namespace dynvio {

struct FrameRecord {
  int id = 0;
  std::int64_t timestamp_ns = 0;
};

struct FrameData {
  int id = 0;
  std::int64_t timestamp_ns = 0;
  ImageF intensity;
  ImageF depth;
  ImageU16 labels;  ///< zeros when the dataset has no masks
};

/// Dataset directory: frames.csv, calib.txt, imu.csv, intensity/ depth/
/// [mask/] %06d.png, optional classmap.txt. Index, calibration and IMU are
/// read and checked at open; images are read per frame.
class Dataset {
 public:
  /// Throws std::runtime_error for missing or malformed files, frame
  /// timestamps that do not increase, IMU gaps over max_imu_gap_s or frames
  /// outside the IMU time span.
  explicit Dataset(const std::string& dir, double max_imu_gap_s = 0.5);

  const std::string& directory() const { return dir_; }
  const Calibration& calibration() const { return calib_; }
  const std::vector<FrameRecord>& frames() const { return frames_; }
  const std::vector<ImuMeasurement>& imu() const { return imu_; }
  const std::vector<ClassMapEntry>& classes() const { return classes_; }
  bool hasMasks() const { return has_masks_; }

  /// Throws std::runtime_error if an image is missing or has the wrong size.
  FrameData load(std::size_t index) const;

 private:
  std::string dir_;
  Calibration calib_;
  std::vector<FrameRecord> frames_;
  std::vector<ImuMeasurement> imu_;
  std::vector<ClassMapEntry> classes_;
  bool has_masks_ = false;
};

std::vector<FrameRecord> readFrameIndex(const std::string& path);

}  // namespace dynvio
