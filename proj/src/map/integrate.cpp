// SPDX-License-Identifier: BSD-3-Clause
#include <algorithm>
#include <cmath>

#include "dynvio/map/tsdf_volume.hpp"

namespace dynvio {

namespace {

struct DepthLookup {
  double depth;
  int px, py;  // nearest pixel
};

/// Depth at a sub-pixel position: bilinear when the four taps are valid,
/// belong to the model and lie on one surface; nearest pixel otherwise.
std::optional<DepthLookup> lookupDepth(const ImageF& depth, const Mask& mask, double u, double v,
                                       double max_spread) {
  const int px = static_cast<int>(std::lround(u));
  const int py = static_cast<int>(std::lround(v));
  if (!depth.inside(px, py)) return std::nullopt;
  const float dn = depth(px, py);
  if (!(dn > 0.0f)) return std::nullopt;
  DepthLookup out{dn, px, py};
  if (!mask(px, py)) return out;

  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  if (x0 < 0 || y0 < 0 || x0 + 1 >= depth.width() || y0 + 1 >= depth.height()) return out;
  const float d00 = depth(x0, y0), d10 = depth(x0 + 1, y0);
  const float d01 = depth(x0, y0 + 1), d11 = depth(x0 + 1, y0 + 1);
  if (!(d00 > 0 && d10 > 0 && d01 > 0 && d11 > 0)) return out;
  if (!(mask(x0, y0) && mask(x0 + 1, y0) && mask(x0, y0 + 1) && mask(x0 + 1, y0 + 1))) return out;
  // One surface: small spread, or four taps on a plane (inverse depth is
  // affine in the pixel coordinates there), as on faces seen at grazing angles.
  const double i00 = 1.0 / d00, i10 = 1.0 / d10, i01 = 1.0 / d01, i11 = 1.0 / d11;
  const float lo = std::min({d00, d10, d01, d11});
  const float hi = std::max({d00, d10, d01, d11});
  const double mean_inv = 0.25 * (i00 + i10 + i01 + i11);
  const bool planar = std::abs(i00 + i11 - i10 - i01) <= 2e-3 * mean_inv;
  if (hi - lo > max_spread && !planar) return out;
  const double ax = u - x0, ay = v - y0;
  out.depth = 1.0 / ((1 - ay) * ((1 - ax) * i00 + ax * i10) + ay * ((1 - ax) * i01 + ax * i11));
  return out;
}

bool anyMasked(const Mask& m) {
  return std::any_of(m.data().begin(), m.data().end(), [](unsigned char c) { return c != 0; });
}

}  // namespace

void integrateFrame(TsdfVolume& volume, const Pose& T_MC, const IntegrationInput& in) {
  const CameraIntrinsics& K = *in.camera;
  const ImageF& depth = *in.depth;
  const ImageF& intensity = *in.intensity;
  const Mask& mask = *in.mask;
  if (!anyMasked(mask)) return;

  const double vs = volume.voxelSize();
  const double mu = volume.truncation();
  const float max_w = volume.params().max_weight;

  // Allocate blocks within +-mu of each masked measurement along its ray.
  std::vector<Eigen::Vector3i> keys;
  const Eigen::Vector3d c_M = T_MC.translation();
  const Eigen::Matrix3d R_MC = T_MC.rotationMatrix();
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const float d = depth(x, y);
      if (!mask(x, y) || !(d > 0.0f)) continue;
      const Eigen::Vector3d ray_C((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d ray_M = R_MC * ray_C;  // per unit depth
      const double len = 2.0 * mu * ray_C.norm();
      const int n = static_cast<int>(std::ceil(len / (0.5 * vs)));
      Eigen::Vector3i last(INT32_MIN, INT32_MIN, INT32_MIN);
      for (int i = 0; i <= n; ++i) {
        const double z = d - mu + 2.0 * mu * i / n;
        if (z <= 0.0) continue;
        const Eigen::Vector3i key = TsdfVolume::blockOf(volume.voxelIndexOf(c_M + z * ray_M));
        if (key != last) {
          keys.push_back(key);
          last = key;
        }
      }
    }
  }
  // Object models also revisit existing blocks so that unmasked views of
  // their bounding region lower fg_prob.
  if (in.update_foreground) {
    const auto existing = volume.sortedKeys();
    keys.insert(keys.end(), existing.begin(), existing.end());
  }
  std::sort(keys.begin(), keys.end(), [](const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  const Pose T_CM = T_MC.inverse();
  const Eigen::Matrix3d R_CM = T_CM.rotationMatrix();
  const Eigen::Vector3d t_CM = T_CM.translation();

  for (const auto& key : keys) {
    VoxelBlock& block = volume.allocate(key);
    const Eigen::Vector3i origin = key * kBlockSide;
    for (int lz = 0; lz < kBlockSide; ++lz) {
      for (int ly = 0; ly < kBlockSide; ++ly) {
        for (int lx = 0; lx < kBlockSide; ++lx) {
          const Eigen::Vector3d p_M =
              vs * (origin + Eigen::Vector3i(lx, ly, lz)).cast<double>();
          const Eigen::Vector3d p_C = R_CM * p_M + t_CM;
          if (p_C.z() <= 1e-6) continue;
          const double u = K.fx * p_C.x() / p_C.z() + K.cx;
          const double v = K.fy * p_C.y() / p_C.z() + K.cy;
          if (u < -0.5 || v < -0.5 || u > K.width - 0.5 || v > K.height - 0.5) continue;
          const auto look = lookupDepth(depth, mask, u, v, 0.5 * mu);
          if (!look) continue;
          const double sdf = look->depth - p_C.z();
          if (sdf < -mu) continue;
          TsdfVoxel& vox = block.voxels[(lz * kBlockSide + ly) * kBlockSide + lx];
          if (mask(look->px, look->py)) {
            const double s = std::min(sdf, mu);
            const auto iv = bilinear(intensity, u, v);
            const double obs_int = iv ? *iv : intensity(look->px, look->py);
            const double w = vox.weight;
            vox.tsdf = static_cast<float>((vox.tsdf * w + s) / (w + 1.0));
            vox.intensity = static_cast<float>((vox.intensity * w + obs_int) / (w + 1.0));
            vox.fg_prob = in.update_foreground
                              ? static_cast<float>((vox.fg_prob * w + 1.0) / (w + 1.0))
                              : 1.0f;
            vox.weight = std::min(vox.weight + 1.0f, max_w);
          } else if (in.carve_unmasked && sdf > mu) {
            // clearly in front of another surface: free space for this model
            const double w = vox.weight;
            if (w <= 0.0f) vox.intensity = intensity(look->px, look->py);
            vox.tsdf = static_cast<float>((vox.tsdf * w + mu) / (w + 1.0));
            vox.fg_prob = static_cast<float>(vox.fg_prob * w / (w + 1.0));
            vox.weight = std::min(vox.weight + 1.0f, max_w);
          } else if (in.update_foreground && vox.weight > 0.0f && sdf <= mu) {
            const double w = vox.weight;
            vox.fg_prob = static_cast<float>(vox.fg_prob * w / (w + 1.0));
          }
        }
      }
    }
  }

  for (const auto& [cls, p] : in.class_probs) volume.semanticHistogram()[cls] += p;
}

}  // namespace dynvio
