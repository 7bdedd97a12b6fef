// SPDX-License-Identifier: BSD-3-Clause
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "dynvio/map/tsdf_volume.hpp"

namespace dynvio {

RenderedView::RenderedView(int w, int h)
    : depth(w, h, 0.0f),
      vertex(w, h, Eigen::Vector3f::Zero()),
      normal(w, h, Eigen::Vector3f::Zero()),
      instance(w, h, -1),
      intensity(w, h, 0.0f),
      valid(w, h, 0) {}

int RenderedView::validCount() const {
  return static_cast<int>(std::count_if(valid.data().begin(), valid.data().end(),
                                        [](unsigned char c) { return c != 0; }));
}

namespace {

/// Slab test; returns false if the ray misses the box.
bool clipToBox(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
               const Eigen::Vector3d& hi, double& t0, double& t1) {
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-12) {
      if (o[k] < lo[k] || o[k] > hi[k]) return false;
      continue;
    }
    double a = (lo[k] - o[k]) / d[k];
    double b = (hi[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return false;
  }
  return true;
}

/// Distance along the ray at which it leaves the cell region of block `key`.
double blockExit(const Eigen::Vector3i& key, double vs, const Eigen::Vector3d& o,
                 const Eigen::Vector3d& d) {
  const Eigen::Vector3d lo = (key.cast<double>() * kBlockSide - Eigen::Vector3d::Constant(0.5)) * vs;
  const Eigen::Vector3d hi = lo + Eigen::Vector3d::Constant(kBlockSide * vs);
  double t = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (d[k] > 1e-12) t = std::min(t, (hi[k] - o[k]) / d[k]);
    if (d[k] < -1e-12) t = std::min(t, (lo[k] - o[k]) / d[k]);
  }
  return t;
}

}  // namespace

std::optional<double> marchRay(const TsdfVolume& volume, const Eigen::Vector3d& o,
                               const Eigen::Vector3d& d, double t_min, double t_max) {
  const double vs = volume.voxelSize();
  const double step = 0.5 * vs;
  double t = t_min;
  bool have_prev = false;
  double prev_f = 0.0, prev_t = 0.0;
  while (t <= t_max) {
    const Eigen::Vector3d p = o + t * d;
    const auto s = volume.interpolate(p);
    if (!s) {
      have_prev = false;
      const Eigen::Vector3i key = TsdfVolume::blockOf(volume.voxelIndexOf(p));
      t = volume.block(key) ? t + step : std::max(t + 1e-9, blockExit(key, vs, o, d) + 1e-6 * vs);
      continue;
    }
    const double f = s->tsdf;
    if (have_prev && prev_f > 0.0 && f <= 0.0) {
      double a = prev_t, fa = prev_f, b = t, fb = f;
      for (int it = 0; it < 6; ++it) {
        const double m = 0.5 * (a + b);
        const auto sm = volume.interpolate(o + m * d);
        if (!sm) break;
        if (sm->tsdf > 0.0) {
          a = m;
          fa = sm->tsdf;
        } else {
          b = m;
          fb = sm->tsdf;
        }
      }
      return fa - fb > 0.0 ? a + fa / (fa - fb) * (b - a) : b;
    }
    have_prev = true;
    prev_f = f;
    prev_t = t;
    // the truncated distance bounds the free space ahead; stay conservative
    t += std::max(step, 0.5 * f);
  }
  return std::nullopt;
}

RenderedView raycast(const std::vector<RaycastModel>& models, const Pose& T_WC,
                     const CameraIntrinsics& K, const RaycastParams& params) {
  RenderedView view(K.width, K.height);

  struct Prepared {
    const RaycastModel* model;
    Eigen::Matrix3d R_MC;
    Eigen::Vector3d o_M;
    Eigen::Vector3d lo, hi;
  };
  std::vector<Prepared> prepared;
  for (const auto& m : models) {
    if (!m.volume || m.volume->empty()) continue;
    Prepared p;
    p.model = &m;
    const Pose T_MC = m.T_WM.inverse() * T_WC;
    p.R_MC = T_MC.rotationMatrix();
    p.o_M = T_MC.translation();
    m.volume->bounds(p.lo, p.hi);
    prepared.push_back(p);
  }
  if (prepared.empty()) return view;

  const Eigen::Matrix3d R_WC = T_WC.rotationMatrix();
  const Eigen::Vector3d t_WC = T_WC.translation();

  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Eigen::Vector3d ray_C((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const double ray_len = ray_C.norm();
      const Eigen::Vector3d dir_C = ray_C / ray_len;
      double best_t = std::numeric_limits<double>::infinity();
      const Prepared* best = nullptr;
      for (const auto& p : prepared) {
        const Eigen::Vector3d d_M = p.R_MC * dir_C;
        double t0 = params.near * ray_len;
        double t1 = std::min(params.far * ray_len, best_t);
        if (!clipToBox(p.o_M, d_M, p.lo, p.hi, t0, t1)) continue;
        const auto hit = marchRay(*p.model->volume, p.o_M, d_M, t0, t1);
        if (hit && *hit < best_t) {
          best_t = *hit;
          best = &p;
        }
      }
      if (!best) continue;
      const Eigen::Vector3d d_M = best->R_MC * dir_C;
      const Eigen::Vector3d p_M = best->o_M + best_t * d_M;
      const auto n_M = best->model->volume->normal(p_M);
      const auto s = best->model->volume->interpolate(p_M);
      if (!n_M || !s) continue;
      const Eigen::Vector3d p_C = best_t * dir_C;
      view.depth(x, y) = static_cast<float>(p_C.z());
      view.vertex(x, y) = (R_WC * p_C + t_WC).cast<float>();
      view.normal(x, y) = (best->model->T_WM.rotationMatrix() * *n_M).cast<float>();
      view.instance(x, y) = best->model->id;
      view.intensity(x, y) = static_cast<float>(s->intensity);
      view.valid(x, y) = 1;
    }
  }
  return view;
}

void exportPly(const std::string& path, const TsdfVolume& volume, const Pose& T_WM,
               double min_fg) {
  struct Point {
    Eigen::Vector3d p, n;
    double intensity;
  };
  std::vector<Point> points;
  const double vs = volume.voxelSize();
  for (const auto& key : volume.sortedKeys()) {
    const VoxelBlock* b = volume.block(key);
    for (int lz = 0; lz < kBlockSide; ++lz) {
      for (int ly = 0; ly < kBlockSide; ++ly) {
        for (int lx = 0; lx < kBlockSide; ++lx) {
          const TsdfVoxel& v = b->voxels[(lz * kBlockSide + ly) * kBlockSide + lx];
          if (v.weight <= 0.0f || v.fg_prob <= min_fg) continue;
          const Eigen::Vector3i idx = key * kBlockSide + Eigen::Vector3i(lx, ly, lz);
          for (int axis = 0; axis < 3; ++axis) {
            const TsdfVoxel* nb = volume.voxel(idx + Eigen::Vector3i::Unit(axis));
            if (!nb || nb->weight <= 0.0f) continue;
            if ((v.tsdf > 0.0f) == (nb->tsdf > 0.0f)) continue;
            const double a = v.tsdf / (v.tsdf - nb->tsdf);
            Eigen::Vector3d p_M = vs * idx.cast<double>();
            p_M[axis] += a * vs;
            const auto n = volume.normal(p_M);
            if (!n) continue;
            points.push_back({T_WM * p_M, T_WM.rotationMatrix() * *n,
                              (1.0 - a) * v.intensity + a * nb->intensity});
          }
        }
      }
    }
  }
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write PLY file " + path);
  std::fprintf(f,
               "ply\nformat ascii 1.0\nelement vertex %zu\nproperty float x\nproperty float y\n"
               "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n"
               "property float intensity\nend_header\n",
               points.size());
  for (const auto& pt : points) {
    std::fprintf(f, "%.6f %.6f %.6f %.6f %.6f %.6f %.6f\n", pt.p.x(), pt.p.y(), pt.p.z(),
                 pt.n.x(), pt.n.y(), pt.n.z(), pt.intensity);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("failed writing PLY file " + path);
}

}  // namespace dynvio
