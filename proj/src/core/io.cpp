// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/core/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace dynvio {

std::vector<StampedPose> readTum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory " + path);
  std::vector<StampedPose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double t, x, y, z, qx, qy, qz, qw;
    if (!(ss >> t >> x >> y >> z >> qx >> qy >> qz >> qw)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed pose line");
    }
    Quaternion q(qw, qx, qy, qz);
    if (!(q.norm() > 0.5)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": invalid quaternion");
    }
    out.push_back({std::llround(t * 1e9), Pose(q.normalized(), Eigen::Vector3d(x, y, z))});
  }
  return out;
}

void writeTum(const std::string& path, const std::vector<StampedPose>& poses) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write trajectory " + path);
  for (const auto& p : poses) {
    const Eigen::Vector3d& t = p.pose.translation();
    const Quaternion& q = p.pose.rotation();
    // exact decimal seconds from integer nanoseconds
    const std::int64_t s = p.timestamp_ns / 1000000000, ns = p.timestamp_ns % 1000000000;
    std::fprintf(f, "%" PRId64 ".%09" PRId64 " %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", s, ns,
                 t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w());
  }
  if (std::fclose(f) != 0) throw std::runtime_error("error writing " + path);
}

namespace {

cv::Mat load(const std::string& path, int depth) {
  cv::Mat m = cv::imread(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("cannot read image " + path);
  if (m.depth() != depth) throw std::runtime_error("unexpected bit depth in " + path);
  return m;
}

void save(const std::string& path, const cv::Mat& m) {
  if (!cv::imwrite(path, m)) throw std::runtime_error("cannot write image " + path);
}

}  // namespace

ImageF readIntensityPng(const std::string& path) {
  const cv::Mat m = load(path, CV_8U);
  ImageF img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) img(x, y) = m.at<unsigned char>(y, x) / 255.0f;
  return img;
}

void writeIntensityPng(const std::string& path, const ImageF& img) {
  cv::Mat m(img.height(), img.width(), CV_8U);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      m.at<unsigned char>(y, x) =
          static_cast<unsigned char>(std::lround(std::clamp(img(x, y), 0.0f, 1.0f) * 255.0f));
  save(path, m);
}

ImageF readDepthPng(const std::string& path) {
  const cv::Mat m = load(path, CV_16U);
  ImageF img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) img(x, y) = m.at<unsigned short>(y, x) * 1e-3f;
  return img;
}

void writeDepthPng(const std::string& path, const ImageF& depth_m) {
  cv::Mat m(depth_m.height(), depth_m.width(), CV_16U);
  for (int y = 0; y < depth_m.height(); ++y)
    for (int x = 0; x < depth_m.width(); ++x) {
      const float d = depth_m(x, y);
      m.at<unsigned short>(y, x) =
          d > 0.0f && d < 65.535f ? static_cast<unsigned short>(std::lround(d * 1000.0f)) : 0;
    }
  save(path, m);
}

ImageU16 readMaskPng(const std::string& path) {
  const cv::Mat m = load(path, CV_16U);
  ImageU16 img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) img(x, y) = m.at<unsigned short>(y, x);
  return img;
}

void writeMaskPng(const std::string& path, const ImageU16& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_16U);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) m.at<unsigned short>(y, x) = mask(x, y);
  save(path, m);
}

}  // namespace dynvio
