// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/reloc/features.hpp"

#include <bit>
#include <cstring>
#include <cmath>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/features2d.hpp>
#include <opencv2/imgproc.hpp>

namespace dynvio {

int hammingDistance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (int i = 0; i < 4; ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

namespace {

constexpr int kPatch = 31;
constexpr int kHalfPatch = kPatch / 2;

cv::Mat toGray8(const ImageF& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < img.width(); ++x) {
      row[x] = cv::saturate_cast<unsigned char>(std::lround(img(x, y) * 255.0f));
    }
  }
  return m;
}

/// Intensity-centroid orientation over a disc of radius kHalfPatch [deg].
float centroidAngle(const cv::Mat& img, const cv::Point2f& pt) {
  const int cx = static_cast<int>(std::lround(pt.x)), cy = static_cast<int>(std::lround(pt.y));
  double m01 = 0.0, m10 = 0.0;
  for (int dy = -kHalfPatch; dy <= kHalfPatch; ++dy) {
    for (int dx = -kHalfPatch; dx <= kHalfPatch; ++dx) {
      if (dx * dx + dy * dy > kHalfPatch * kHalfPatch) continue;
      const double v = img.at<unsigned char>(cy + dy, cx + dx);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  double a = std::atan2(m01, m10) * 180.0 / M_PI;
  if (a < 0.0) a += 360.0;
  return static_cast<float>(a);
}

}  // namespace

FeatureSet detectFeatures(const ImageF& intensity, const ImageF& depth, const Mask& mask,
                          const CameraIntrinsics& K, const FeatureParams& params) {
  FeatureSet out;
  const cv::Mat gray = toGray8(intensity);
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  int count = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const bool on = mask(x, y) && depth(x, y) > 0.0f;
      m.at<unsigned char>(y, x) = on ? 255 : 0;
      count += on;
    }
  }
  if (count == 0) return out;

  std::vector<cv::Point2f> corners;
  cv::goodFeaturesToTrack(gray, corners, params.max_corners, params.quality, params.min_distance, m,
                          params.block_size);
  if (corners.empty()) return out;
  cv::cornerSubPix(gray, corners, cv::Size(3, 3), cv::Size(-1, -1),
                   cv::TermCriteria(cv::TermCriteria::COUNT | cv::TermCriteria::EPS, 20, 0.01));

  // rotated BRIEF needs the full patch plus the smoothing kernel inside the image
  const float border = kHalfPatch + 4.0f;
  std::vector<cv::KeyPoint> kps;
  for (const auto& c : corners) {
    if (c.x < border || c.y < border || c.x > gray.cols - 1 - border ||
        c.y > gray.rows - 1 - border) {
      continue;
    }
    const int xi = static_cast<int>(std::lround(c.x)), yi = static_cast<int>(std::lround(c.y));
    if (!m.at<unsigned char>(yi, xi)) continue;
    kps.emplace_back(c, static_cast<float>(kPatch), centroidAngle(gray, c), 1.0f, 0, -1);
  }
  if (kps.empty()) return out;

  auto orb = cv::ORB::create(static_cast<int>(kps.size()), 1.2f, 1, kHalfPatch, 0, 2,
                             cv::ORB::HARRIS_SCORE, kPatch);
  cv::Mat desc;
  orb->compute(gray, kps, desc);
  for (int i = 0; i < static_cast<int>(kps.size()); ++i) {
    const Eigen::Vector2d z(kps[i].pt.x, kps[i].pt.y);
    const int xi = static_cast<int>(std::lround(z.x())), yi = static_cast<int>(std::lround(z.y()));
    const auto p = K.backproject(z, depth(xi, yi));
    if (!p) continue;
    Descriptor d{};
    std::memcpy(d.data(), desc.ptr<unsigned char>(i), 32);
    out.keypoints.push_back(z);
    out.descriptors.push_back(d);
    out.points.push_back(*p);
  }
  return out;
}

namespace {

struct Nearest {
  int index = -1;
  int best = std::numeric_limits<int>::max();
  int second = std::numeric_limits<int>::max();
};

Nearest nearest(const Descriptor& d, const std::vector<Descriptor>& set) {
  Nearest n;
  for (int j = 0; j < static_cast<int>(set.size()); ++j) {
    const int h = hammingDistance(d, set[j]);
    if (h < n.best) {
      n.second = n.best;
      n.best = h;
      n.index = j;
    } else if (h < n.second) {
      n.second = h;
    }
  }
  return n;
}

bool passesRatio(const Nearest& n, double ratio) {
  return n.second == std::numeric_limits<int>::max() || n.best < ratio * n.second;
}

}  // namespace

MatchSet matchFeatures(const FeatureSet& keyframe, const FeatureSet& live,
                       const MatchParams& params) {
  MatchSet out;
  if (keyframe.empty() || live.empty()) return out;
  std::vector<Nearest> back(live.size());
  for (std::size_t j = 0; j < live.size(); ++j) back[j] = nearest(live.descriptors[j], keyframe.descriptors);
  for (int i = 0; i < static_cast<int>(keyframe.size()); ++i) {
    const Nearest f = nearest(keyframe.descriptors[i], live.descriptors);
    if (f.index < 0 || f.best > params.max_hamming || !passesRatio(f, params.ratio)) continue;
    const Nearest& b = back[f.index];
    if (b.index != i || !passesRatio(b, params.ratio)) continue;
    out.pairs.emplace_back(i, f.index);
    out.distances.push_back(f.best);
  }
  return out;
}

std::optional<KeyframeMatch> matchAgainstKeyframes(const std::vector<ObjectKeyframe>& keyframes,
                                                   const FeatureSet& live,
                                                   const MatchParams& params) {
  KeyframeMatch best;
  for (int k = 0; k < static_cast<int>(keyframes.size()); ++k) {
    MatchSet m = matchFeatures(keyframes[k].features, live, params);
    if (best.keyframe < 0 || m.size() > best.matches.size()) {
      best.keyframe = k;
      best.matches = std::move(m);
    }
  }
  if (best.keyframe < 0 || static_cast<int>(best.matches.size()) < params.min_matches) {
    return std::nullopt;
  }
  return best;
}

}  // namespace dynvio
