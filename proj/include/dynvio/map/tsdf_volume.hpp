// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "dynvio/core/image.hpp"
#include "dynvio/manifold/camera.hpp"

namespace dynvio {

/// One TSDF cell. weight == 0 means never observed.
struct TsdfVoxel {
  float tsdf = 0.0f;       ///< [m], |tsdf| <= truncation
  float weight = 0.0f;
  float intensity = 0.0f;  ///< grayscale [0, 1]
  float fg_prob = 0.0f;    ///< foreground probability [0, 1]
};

constexpr int kBlockSide = 8;
constexpr int kBlockVoxels = kBlockSide * kBlockSide * kBlockSide;

struct VoxelBlock {
  std::array<TsdfVoxel, kBlockVoxels> voxels{};
};

struct BlockKeyHash {
  std::size_t operator()(const Eigen::Vector3i& k) const {
    // Teschner et al. spatial hash
    return (static_cast<std::size_t>(k.x()) * 73856093u) ^
           (static_cast<std::size_t>(k.y()) * 19349669u) ^
           (static_cast<std::size_t>(k.z()) * 83492791u);
  }
};

struct VolumeParams {
  double voxel_size = 0.02;  ///< [m]
  double truncation = 0.08;  ///< mu [m]
  float max_weight = 100.0f;

  static VolumeParams background() { return {0.02, 0.08, 100.0f}; }
  static VolumeParams object() { return {0.01, 0.04, 100.0f}; }
};

/// Sparse TSDF: a hash from block coordinates to dense 8^3 voxel blocks.
/// Voxel (i, j, k) has its centre at voxel_size * (i, j, k) in the model frame.
class TsdfVolume {
 public:
  explicit TsdfVolume(const VolumeParams& params = VolumeParams::background());

  const VolumeParams& params() const { return params_; }
  double voxelSize() const { return params_.voxel_size; }
  double truncation() const { return params_.truncation; }

  std::size_t blockCount() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }

  static Eigen::Vector3i blockOf(const Eigen::Vector3i& voxel);
  static int linearIndex(const Eigen::Vector3i& voxel);

  const VoxelBlock* block(const Eigen::Vector3i& key) const;
  VoxelBlock& allocate(const Eigen::Vector3i& key);

  const TsdfVoxel* voxel(const Eigen::Vector3i& v) const;
  TsdfVoxel* voxel(const Eigen::Vector3i& v);

  /// Index of the voxel whose cell contains model point p.
  Eigen::Vector3i voxelIndexOf(const Eigen::Vector3d& p_M) const;

  /// Trilinear interpolation of tsdf (and intensity). nullopt if any of the
  /// eight surrounding voxels is unobserved.
  struct Sample {
    double tsdf;
    double intensity;
    double fg_prob;
  };
  std::optional<Sample> interpolate(const Eigen::Vector3d& p_M) const;

  /// Normalised tsdf gradient (outward surface normal) at p by central
  /// differences of the interpolant.
  std::optional<Eigen::Vector3d> normal(const Eigen::Vector3d& p_M) const;

  /// Axis-aligned bounds of all allocated blocks in the model frame.
  bool bounds(Eigen::Vector3d& lo, Eigen::Vector3d& hi) const;

  /// Sorted keys of allocated blocks (deterministic iteration order).
  std::vector<Eigen::Vector3i> sortedKeys() const;

  /// Accumulated per-class probability over all integrations.
  std::map<int, double>& semanticHistogram() { return histogram_; }
  const std::map<int, double>& semanticHistogram() const { return histogram_; }

  void write(std::ostream& os) const;
  static TsdfVolume read(std::istream& is);

  bool operator==(const TsdfVolume& o) const;

 private:
  VolumeParams params_;
  std::unordered_map<Eigen::Vector3i, std::unique_ptr<VoxelBlock>, BlockKeyHash> blocks_;
  std::map<int, double> histogram_;
};

/// argmax of the semantic histogram, ties to the lowest class id; nullopt if empty.
std::optional<int> mostLikelyClass(const TsdfVolume& volume);

/// Inputs for fusing one RGB-D frame into a volume.
struct IntegrationInput {
  const CameraIntrinsics* camera = nullptr;
  const ImageF* depth = nullptr;      ///< [m], 0 invalid
  const ImageF* intensity = nullptr;  ///< [0, 1]
  const Mask* mask = nullptr;         ///< pixels that belong to this model
  std::map<int, double> class_probs;  ///< accumulated into the histogram (may be empty)
  bool update_foreground = true;      ///< fuse fg_prob (object models)
  /// Unmasked pixels whose depth lies beyond mu behind a voxel mark it as
  /// free space, which keeps silhouettes of partially seen models sharp.
  bool carve_unmasked = false;
};

/// Fuses one frame, with T_MC the camera pose in the model frame. Blocks are
/// allocated within +-mu of every masked depth measurement; voxels are
/// updated by a capped weighted running average. An empty mask is a no-op.
void integrateFrame(TsdfVolume& volume, const Pose& T_MC, const IntegrationInput& in);

/// Raycast reference maps. Vertex and normal maps are in the world frame,
/// depth is camera z. Instance 0 is the background model, -1 no hit.
struct RenderedView {
  ImageF depth;
  VertexMap vertex;
  VertexMap normal;
  Image<int> instance;
  ImageF intensity;
  Mask valid;

  RenderedView() = default;
  RenderedView(int w, int h);
  int validCount() const;
};

struct RaycastModel {
  int id = 0;
  const TsdfVolume* volume = nullptr;
  Pose T_WM;  ///< model pose in world
};

struct RaycastParams {
  double near = 0.1;
  double far = 6.0;
};

/// Marches every pixel ray through every model to its first positive-to-
/// negative zero crossing; the nearest crossing over all models wins.
RenderedView raycast(const std::vector<RaycastModel>& models, const Pose& T_WC,
                     const CameraIntrinsics& K, const RaycastParams& params = {});

/// Marches a single ray (model frame) and returns the crossing distance.
std::optional<double> marchRay(const TsdfVolume& volume, const Eigen::Vector3d& origin_M,
                               const Eigen::Vector3d& dir_M, double t_min, double t_max);

/// ASCII PLY of zero-crossing points (x y z nx ny nz intensity) in the model
/// frame transformed by T_WM. Voxels with fg_prob <= min_fg are skipped.
void exportPly(const std::string& path, const TsdfVolume& volume, const Pose& T_WM,
               double min_fg = 0.5);

}  // namespace dynvio
