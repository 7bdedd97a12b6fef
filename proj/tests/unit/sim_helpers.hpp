// SPDX-License-Identifier: BSD-3-Clause
// Shared fixtures: exact reference views and a small object scene.
#pragma once

#include <map>

#include "dynvio/sim/scenarios.hpp"
#include "dynvio/tracking/frame.hpp"

namespace dynvio::testing {

/// Reference maps straight from a rendered frame (no TSDF). Instance labels
/// are mapped through `ids`; unmapped labels become 0.
inline RenderedView exactView(const sim::RenderedFrame& f, const CameraIntrinsics& K,
                              const Pose& T_WC, const std::map<int, int>& ids = {}) {
  RenderedView v(K.width, K.height);
  const VertexMap vc = vertexMap(K, f.depth);
  const VertexMap nc = normalMap(vc);
  const Eigen::Matrix3f R = T_WC.rotationMatrix().cast<float>();
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      if (!(f.depth(x, y) > 0.0f) || nc(x, y).squaredNorm() == 0.0f) continue;
      v.depth(x, y) = f.depth(x, y);
      v.vertex(x, y) = (T_WC * vc(x, y).cast<double>()).cast<float>();
      v.normal(x, y) = R * nc(x, y);
      const auto it = ids.find(f.instance(x, y));
      v.instance(x, y) = it == ids.end() ? 0 : it->second;
      v.intensity(x, y) = f.intensity(x, y);
      v.valid(x, y) = 1;
    }
  }
  return v;
}

/// Camera at the origin looking down +z at a textured box (instance 1,
/// centred at `centre` in world) in front of a wall at z = 3.
inline sim::SceneSpec objectScene(const Pose& T_WO) {
  sim::SceneSpec scene;
  sim::Primitive wall;
  wall.shape = sim::Shape::Plane;
  wall.size = Eigen::Vector3d::Zero();
  wall.texture = sim::Texture::noise(5, 0.2, 0.3);
  wall.trajectory = sim::TrajectorySpec::constant(
      Pose(Quaternion(Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX())), {0, 0, 3}));
  scene.primitives.push_back(wall);
  sim::Primitive box;
  box.shape = sim::Shape::Box;
  box.size = Eigen::Vector3d(0.15, 0.12, 0.1);
  box.texture = sim::Texture::noise(31, 0.04, 0.45);
  box.trajectory = sim::TrajectorySpec::constant(T_WO);
  box.instance = 1;
  scene.primitives.push_back(box);
  scene.light_dir = Eigen::Vector3d(0.3, 0.4, 1.0).normalized();
  return scene;
}

inline Mask labelMask(const ImageU16& labels, int label) {
  Mask m(labels.width(), labels.height(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = labels[i] == label;
  return m;
}

inline Frame toFrame(const sim::RenderedFrame& f, std::int64_t t_ns = 0) {
  Frame fr{t_ns, f.intensity, f.depth, Mask(f.depth.width(), f.depth.height(), 0)};
  for (std::size_t i = 0; i < fr.mask.size(); ++i) fr.mask[i] = fr.depth[i] > 0.0f;
  return fr;
}

}  // namespace dynvio::testing
