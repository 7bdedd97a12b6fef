// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/map/tsdf_volume.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace dynvio {

namespace {

int floorDiv(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

template <typename T>
void writePod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T readPod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("volume: truncated stream");
  return v;
}

bool keyLess(const Eigen::Vector3i& a, const Eigen::Vector3i& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace

TsdfVolume::TsdfVolume(const VolumeParams& params) : params_(params) {
  if (!(params.voxel_size > 0.0) || !(params.truncation > 0.0)) {
    throw std::invalid_argument("volume: voxel size and truncation must be positive");
  }
}

Eigen::Vector3i TsdfVolume::blockOf(const Eigen::Vector3i& v) {
  return {floorDiv(v.x(), kBlockSide), floorDiv(v.y(), kBlockSide), floorDiv(v.z(), kBlockSide)};
}

int TsdfVolume::linearIndex(const Eigen::Vector3i& v) {
  const int x = v.x() - floorDiv(v.x(), kBlockSide) * kBlockSide;
  const int y = v.y() - floorDiv(v.y(), kBlockSide) * kBlockSide;
  const int z = v.z() - floorDiv(v.z(), kBlockSide) * kBlockSide;
  return (z * kBlockSide + y) * kBlockSide + x;
}

const VoxelBlock* TsdfVolume::block(const Eigen::Vector3i& key) const {
  auto it = blocks_.find(key);
  return it == blocks_.end() ? nullptr : it->second.get();
}

VoxelBlock& TsdfVolume::allocate(const Eigen::Vector3i& key) {
  auto& slot = blocks_[key];
  if (!slot) slot = std::make_unique<VoxelBlock>();
  return *slot;
}

const TsdfVoxel* TsdfVolume::voxel(const Eigen::Vector3i& v) const {
  const VoxelBlock* b = block(blockOf(v));
  return b ? &b->voxels[linearIndex(v)] : nullptr;
}

TsdfVoxel* TsdfVolume::voxel(const Eigen::Vector3i& v) {
  auto it = blocks_.find(blockOf(v));
  return it == blocks_.end() ? nullptr : &it->second->voxels[linearIndex(v)];
}

Eigen::Vector3i TsdfVolume::voxelIndexOf(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d s = p / params_.voxel_size;
  return {static_cast<int>(std::floor(s.x() + 0.5)), static_cast<int>(std::floor(s.y() + 0.5)),
          static_cast<int>(std::floor(s.z() + 0.5))};
}

std::optional<TsdfVolume::Sample> TsdfVolume::interpolate(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d s = p / params_.voxel_size;
  const Eigen::Vector3d f(std::floor(s.x()), std::floor(s.y()), std::floor(s.z()));
  const Eigen::Vector3i base = f.cast<int>();
  const Eigen::Vector3d a = s - f;
  const double wx[2] = {1.0 - a.x(), a.x()}, wy[2] = {1.0 - a.y(), a.y()},
               wz[2] = {1.0 - a.z(), a.z()};

  const Eigen::Vector3i key = blockOf(base);
  const Eigen::Vector3i local = base - key * kBlockSide;
  double tsdf = 0.0, inten = 0.0, fg = 0.0;
  if ((local.array() < kBlockSide - 1).all()) {
    // all eight corners in one block
    const VoxelBlock* b = block(key);
    if (!b) return std::nullopt;
    const int i0 = (local.z() * kBlockSide + local.y()) * kBlockSide + local.x();
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const TsdfVoxel& vox = b->voxels[i0 + (dz * kBlockSide + dy) * kBlockSide + dx];
      if (vox.weight <= 0.0f) return std::nullopt;
      const double w = wx[dx] * wy[dy] * wz[dz];
      tsdf += w * vox.tsdf;
      inten += w * vox.intensity;
      fg += w * vox.fg_prob;
    }
    return Sample{tsdf, inten, fg};
  }

  const VoxelBlock* cached = nullptr;
  Eigen::Vector3i cached_key(INT32_MIN, INT32_MIN, INT32_MIN);
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const Eigen::Vector3i v = base + Eigen::Vector3i(dx, dy, dz);
    const Eigen::Vector3i k = blockOf(v);
    if (k != cached_key) {
      cached = block(k);
      cached_key = k;
    }
    if (!cached) return std::nullopt;
    const TsdfVoxel& vox = cached->voxels[linearIndex(v)];
    if (vox.weight <= 0.0f) return std::nullopt;
    const double w = wx[dx] * wy[dy] * wz[dz];
    tsdf += w * vox.tsdf;
    inten += w * vox.intensity;
    fg += w * vox.fg_prob;
  }
  return Sample{tsdf, inten, fg};
}

std::optional<Eigen::Vector3d> TsdfVolume::normal(const Eigen::Vector3d& p) const {
  const double h = params_.voxel_size;
  Eigen::Vector3d g;
  const auto centre = interpolate(p);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d d = h * Eigen::Vector3d::Unit(k);
    const auto fp = interpolate(p + d);
    const auto fm = interpolate(p - d);
    if (fp && fm) {
      g[k] = (fp->tsdf - fm->tsdf) / (2.0 * h);
    } else if (fp && centre) {
      g[k] = (fp->tsdf - centre->tsdf) / h;
    } else if (fm && centre) {
      g[k] = (centre->tsdf - fm->tsdf) / h;
    } else {
      return std::nullopt;
    }
  }
  const double n = g.norm();
  if (!(n > 1e-9)) return std::nullopt;
  return Eigen::Vector3d(g / n);
}

bool TsdfVolume::bounds(Eigen::Vector3d& lo, Eigen::Vector3d& hi) const {
  if (blocks_.empty()) return false;
  Eigen::Vector3i bmin = Eigen::Vector3i::Constant(INT32_MAX);
  Eigen::Vector3i bmax = Eigen::Vector3i::Constant(INT32_MIN);
  for (const auto& [key, _] : blocks_) {
    bmin = bmin.cwiseMin(key);
    bmax = bmax.cwiseMax(key);
  }
  const double vs = params_.voxel_size;
  lo = (bmin.cast<double>() * kBlockSide - Eigen::Vector3d::Constant(0.5)) * vs;
  hi = ((bmax.cast<double>() + Eigen::Vector3d::Ones()) * kBlockSide -
        Eigen::Vector3d::Constant(0.5)) * vs;
  return true;
}

std::vector<Eigen::Vector3i> TsdfVolume::sortedKeys() const {
  std::vector<Eigen::Vector3i> keys;
  keys.reserve(blocks_.size());
  for (const auto& [key, _] : blocks_) keys.push_back(key);
  std::sort(keys.begin(), keys.end(), keyLess);
  return keys;
}

void TsdfVolume::write(std::ostream& os) const {
  writePod(os, params_.voxel_size);
  writePod(os, params_.truncation);
  writePod(os, params_.max_weight);
  writePod(os, static_cast<std::uint64_t>(histogram_.size()));
  for (const auto& [cls, p] : histogram_) {
    writePod(os, static_cast<std::int32_t>(cls));
    writePod(os, p);
  }
  const auto keys = sortedKeys();
  writePod(os, static_cast<std::uint64_t>(keys.size()));
  for (const auto& k : keys) {
    writePod(os, k.x());
    writePod(os, k.y());
    writePod(os, k.z());
    const VoxelBlock* b = block(k);
    for (const auto& v : b->voxels) {
      writePod(os, v.tsdf);
      writePod(os, v.weight);
      writePod(os, v.intensity);
      writePod(os, v.fg_prob);
    }
  }
}

TsdfVolume TsdfVolume::read(std::istream& is) {
  VolumeParams p;
  p.voxel_size = readPod<double>(is);
  p.truncation = readPod<double>(is);
  p.max_weight = readPod<float>(is);
  TsdfVolume vol(p);
  const auto nh = readPod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < nh; ++i) {
    const int cls = readPod<std::int32_t>(is);
    vol.histogram_[cls] = readPod<double>(is);
  }
  const auto nb = readPod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < nb; ++i) {
    Eigen::Vector3i k;
    k.x() = readPod<int>(is);
    k.y() = readPod<int>(is);
    k.z() = readPod<int>(is);
    VoxelBlock& b = vol.allocate(k);
    for (auto& v : b.voxels) {
      v.tsdf = readPod<float>(is);
      v.weight = readPod<float>(is);
      v.intensity = readPod<float>(is);
      v.fg_prob = readPod<float>(is);
    }
  }
  return vol;
}

bool TsdfVolume::operator==(const TsdfVolume& o) const {
  if (params_.voxel_size != o.params_.voxel_size || params_.truncation != o.params_.truncation ||
      params_.max_weight != o.params_.max_weight || histogram_ != o.histogram_ ||
      blocks_.size() != o.blocks_.size()) {
    return false;
  }
  for (const auto& [key, b] : blocks_) {
    const VoxelBlock* ob = o.block(key);
    if (!ob) return false;
    for (int i = 0; i < kBlockVoxels; ++i) {
      const auto& a = b->voxels[i];
      const auto& c = ob->voxels[i];
      if (a.tsdf != c.tsdf || a.weight != c.weight || a.intensity != c.intensity ||
          a.fg_prob != c.fg_prob) {
        return false;
      }
    }
  }
  return true;
}

std::optional<int> mostLikelyClass(const TsdfVolume& volume) {
  const auto& h = volume.semanticHistogram();
  std::optional<int> best;
  double best_p = 0.0;
  for (const auto& [cls, p] : h) {  // ascending class id
    if (!best || p > best_p) {
      best = cls;
      best_p = p;
    }
  }
  return best;
}

}  // namespace dynvio
