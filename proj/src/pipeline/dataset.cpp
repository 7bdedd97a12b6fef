// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/pipeline/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dynvio/core/io.hpp"

namespace dynvio {

namespace fs = std::filesystem;

std::vector<FrameRecord> readFrameIndex(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame_id,timestamp_ns", 0) != 0) {
    throw std::runtime_error(path + ": expected header 'frame_id,timestamp_ns'");
  }
  std::vector<FrameRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    FrameRecord r;
    char comma = 0;
    std::istringstream ss(line);
    if (!(ss >> r.id >> comma >> r.timestamp_ns) || comma != ',' || r.id < 0) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (!out.empty() && r.timestamp_ns <= out.back().timestamp_ns) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": timestamps must increase");
    }
    out.push_back(r);
  }
  if (out.empty()) throw std::runtime_error(path + ": no frames");
  return out;
}

Dataset::Dataset(const std::string& dir, double max_imu_gap_s) : dir_(dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw std::runtime_error("dataset directory not found: " + dir);
  frames_ = readFrameIndex((root / "frames.csv").string());
  calib_ = readCalibration((root / "calib.txt").string());
  imu_ = readImuCsv((root / "imu.csv").string());
  if (imu_.empty()) throw std::runtime_error("imu.csv has no samples");
  const auto max_gap = static_cast<std::int64_t>(max_imu_gap_s * 1e9);
  for (std::size_t i = 1; i < imu_.size(); ++i) {
    const std::int64_t gap = imu_[i].timestamp_ns - imu_[i - 1].timestamp_ns;
    if (gap <= 0) throw std::runtime_error("imu.csv: timestamps must increase (row " + std::to_string(i + 1) + ")");
    if (gap > max_gap) {
      throw std::runtime_error("IMU gap of " + std::to_string(gap * 1e-9) + " s after t=" +
                               std::to_string(imu_[i - 1].timestamp_ns * 1e-9) + " s");
    }
  }
  if (frames_.front().timestamp_ns < imu_.front().timestamp_ns ||
      frames_.back().timestamp_ns > imu_.back().timestamp_ns) {
    throw std::runtime_error("frames extend beyond the IMU time span");
  }
  has_masks_ = fs::is_directory(root / "mask");
  if (fs::exists(root / "classmap.txt")) classes_ = readClassMap((root / "classmap.txt").string());
}

FrameData Dataset::load(std::size_t index) const {
  if (index >= frames_.size())
    throw std::runtime_error("frame index " + std::to_string(index) + " out of range");
  const FrameRecord& r = frames_[index];
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.png", r.id);
  const fs::path root(dir_);
  FrameData f;
  f.id = r.id;
  f.timestamp_ns = r.timestamp_ns;
  const auto need = [&](const char* sub) {
    const fs::path p = root / sub / name;
    if (!fs::exists(p)) throw std::runtime_error("missing frame file " + p.string());
    return p.string();
  };
  f.intensity = readIntensityPng(need("intensity"));
  f.depth = readDepthPng(need("depth"));
  const int w = calib_.camera.width, h = calib_.camera.height;
  f.labels = has_masks_ ? readMaskPng(need("mask")) : ImageU16(w, h, 0);
  if (f.intensity.width() != w || f.intensity.height() != h || f.depth.width() != w ||
      f.depth.height() != h || f.labels.width() != w || f.labels.height() != h) {
    throw std::runtime_error(std::string("frame ") + name + ": image size does not match calibration");
  }
  return f;
}

}  // namespace dynvio
