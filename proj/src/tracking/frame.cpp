// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/tracking/frame.hpp"

namespace dynvio {

ImageF downsampleAverage(const ImageF& img) {
  ImageF out(img.width() / 2, img.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      out(x, y) = 0.25f * (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) +
                           img(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

VertexMap vertexMap(const CameraIntrinsics& K, const ImageF& depth) {
  VertexMap v(depth.width(), depth.height(), Eigen::Vector3f::Zero());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const float d = depth(x, y);
      if (!(d > 0.0f)) continue;
      v(x, y) = Eigen::Vector3f(float((x - K.cx) / K.fx * d), float((y - K.cy) / K.fy * d), d);
    }
  }
  return v;
}

VertexMap normalMap(const VertexMap& v) {
  VertexMap n(v.width(), v.height(), Eigen::Vector3f::Zero());
  for (int y = 1; y + 1 < v.height(); ++y) {
    for (int x = 1; x + 1 < v.width(); ++x) {
      const Eigen::Vector3f& c = v(x, y);
      if (c.z() <= 0.0f) continue;
      const Eigen::Vector3f& l = v(x - 1, y);
      const Eigen::Vector3f& r = v(x + 1, y);
      const Eigen::Vector3f& u = v(x, y - 1);
      const Eigen::Vector3f& d = v(x, y + 1);
      if (l.z() <= 0 || r.z() <= 0 || u.z() <= 0 || d.z() <= 0) continue;
      // reject depth jumps larger than 5% of the range
      const float tol = 0.05f * c.z();
      if (std::abs(l.z() - c.z()) > tol || std::abs(r.z() - c.z()) > tol ||
          std::abs(u.z() - c.z()) > tol || std::abs(d.z() - c.z()) > tol) {
        continue;
      }
      Eigen::Vector3f nn = (r - l).cross(d - u);
      const float len = nn.norm();
      if (!(len > 0.0f)) continue;
      nn /= len;
      if (nn.dot(c) > 0.0f) nn = -nn;
      n(x, y) = nn;
    }
  }
  return n;
}

std::vector<Mask> maskPyramid(const Mask& mask, int levels) {
  std::vector<Mask> out{mask};
  for (int l = 1; l < levels; ++l) out.push_back(subsample(out.back()));
  return out;
}

LivePyramid buildLivePyramid(const CameraIntrinsics& K, const Frame& frame, int levels) {
  LivePyramid p;
  p.K.push_back(K);
  p.intensity.push_back(frame.intensity);
  p.vertex.push_back(vertexMap(K, frame.depth));
  for (int l = 1; l < levels; ++l) {
    p.K.push_back(p.K.back().downsampled());
    p.intensity.push_back(downsampleAverage(p.intensity.back()));
    p.vertex.push_back(subsample(p.vertex.back()));
  }
  for (const auto& v : p.vertex) p.normal.push_back(normalMap(v));
  return p;
}

ReferencePyramid buildReferencePyramid(const CameraIntrinsics& K, const ImageF& ref_intensity,
                                       const RenderedView& rendered, const Mask& ref_mask,
                                       const Pose& T_WC_ref, const Pose& T_FW, int levels) {
  ReferencePyramid p;
  p.T_FC = T_FW * T_WC_ref;
  const Eigen::Matrix3f R = T_FW.rotationMatrix().cast<float>();
  const Eigen::Vector3f t = T_FW.translation().cast<float>();
  VertexMap point(K.width, K.height, Eigen::Vector3f::Zero());
  VertexMap normal(K.width, K.height, Eigen::Vector3f::Zero());
  Mask valid(K.width, K.height, 0);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      if (!rendered.valid(x, y) || !ref_mask(x, y)) continue;
      point(x, y) = R * rendered.vertex(x, y) + t;
      normal(x, y) = R * rendered.normal(x, y);
      valid(x, y) = 1;
    }
  }
  p.K.push_back(K);
  p.intensity.push_back(ref_intensity);
  p.point.push_back(std::move(point));
  p.normal.push_back(std::move(normal));
  p.valid.push_back(std::move(valid));
  for (int l = 1; l < levels; ++l) {
    p.K.push_back(p.K.back().downsampled());
    p.intensity.push_back(downsampleAverage(p.intensity.back()));
    p.point.push_back(subsample(p.point.back()));
    p.normal.push_back(subsample(p.normal.back()));
    p.valid.push_back(subsample(p.valid.back()));
  }
  return p;
}

}  // namespace dynvio
