// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cstdint>
#include <vector>

#include "dynvio/core/image.hpp"
#include "dynvio/manifold/camera.hpp"
#include "dynvio/map/tsdf_volume.hpp"

namespace dynvio {

/// One RGB-D frame. `mask` marks pixels usable for camera tracking; it is
/// cleared wherever depth is invalid.
struct Frame {
  std::int64_t timestamp_ns = 0;
  ImageF intensity;  ///< [0, 1]
  ImageF depth;      ///< [m], 0 invalid
  Mask mask;
};

/// 2x2 box average (odd trailing row/column dropped).
ImageF downsampleAverage(const ImageF& img);

/// Keeps pixel (2x, 2y).
template <typename T>
Image<T> subsample(const Image<T>& img) {
  Image<T> out(img.width() / 2, img.height() / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out(x, y) = img(2 * x, 2 * y);
  return out;
}

/// Camera-frame vertices; invalid pixels are zero.
VertexMap vertexMap(const CameraIntrinsics& K, const ImageF& depth);

/// Normals from neighbour differences of a vertex map, oriented toward the
/// camera. Zero where a neighbour is missing or across depth jumps.
VertexMap normalMap(const VertexMap& vertex);

std::vector<Mask> maskPyramid(const Mask& mask, int levels);

/// Live frame data at each pyramid level (camera frame).
struct LivePyramid {
  std::vector<CameraIntrinsics> K;
  std::vector<ImageF> intensity;
  std::vector<VertexMap> vertex;
  std::vector<VertexMap> normal;

  int levels() const { return static_cast<int>(K.size()); }
};
LivePyramid buildLivePyramid(const CameraIntrinsics& K, const Frame& frame, int levels);

/// Reference data at each level, with points and normals expressed in the
/// tracking frame F (world for the camera, object frame for objects).
/// `intensity` is the reference frame's image; `valid` combines the rendered
/// validity with the caller's reference mask.
struct ReferencePyramid {
  std::vector<CameraIntrinsics> K;
  std::vector<ImageF> intensity;
  std::vector<VertexMap> point;
  std::vector<VertexMap> normal;
  std::vector<Mask> valid;
  Pose T_FC;  ///< reference camera in F

  int levels() const { return static_cast<int>(K.size()); }
};
ReferencePyramid buildReferencePyramid(const CameraIntrinsics& K, const ImageF& ref_intensity,
                                       const RenderedView& rendered, const Mask& ref_mask,
                                       const Pose& T_WC_ref, const Pose& T_FW, int levels);

}  // namespace dynvio
