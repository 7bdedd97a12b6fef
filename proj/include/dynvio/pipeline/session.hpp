// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dynvio/core/io.hpp"
#include "dynvio/objects/object_model.hpp"
#include "dynvio/pipeline/config.hpp"
#include "dynvio/pipeline/dataset.hpp"
#include "dynvio/tracking/tracker.hpp"

namespace dynvio {

/// Runtime categories, each with its own sample unit: camera tracking and
/// segmentation, integration and raycasting per frame, object tracking per
/// tracked object, relocalisation per keyframe considered.
enum class TimingCategory {
  CameraTracking,
  ObjectTracking,
  Relocalisation,
  Segmentation,
  Integration,
  Raycasting
};
constexpr int kTimingCategories = 6;
const char* toString(TimingCategory c);

struct TimingRow {
  double total_ms = 0.0;
  long samples = 0;
  double meanMs() const { return samples ? total_ms / static_cast<double>(samples) : 0.0; }
};

struct RuntimeReport {
  std::array<TimingRow, kTimingCategories> rows{};
  double frame_total_ms = 0.0;
  int frames = 0;
  TimingRow& operator[](TimingCategory c) { return rows[static_cast<int>(c)]; }
  const TimingRow& operator[](TimingCategory c) const { return rows[static_cast<int>(c)]; }
};

struct RelocEvent {
  int frame = 0;
  int model = 0;
  int label = 0;
  int keyframe = -1;
  int matches = 0;
  int inliers = 0;
  double mean_residual = 0.0;
  double valid_ratio = 0.0;
  bool accepted = false;
  int duplicate_deleted = 0;  ///< id of the merged young model, 0 if none
};

/// Runs the estimator frame by frame over a dataset.
class Session {
 public:
  Session(const Dataset& dataset, SessionConfig config);

  bool done() const { return next_ >= dataset_.frames().size(); }
  std::size_t nextFrame() const { return next_; }
  /// Processes one frame. Throws std::runtime_error on data errors.
  void step();
  void runToEnd();

  const StateVector& state() const { return x_; }
  const TsdfVolume& background() const { return background_; }
  const std::vector<ObjectModel>& objects() const { return objects_; }
  const std::vector<StampedPose>& cameraTrajectory() const { return camera_traj_; }
  /// Per model id, the world pose at every frame the model was observed.
  const std::map<int, std::vector<StampedPose>>& objectTrajectories() const { return object_traj_; }
  const std::vector<int>& degenerateFrames() const { return degenerate_frames_; }
  const std::vector<RelocEvent>& relocEvents() const { return reloc_events_; }
  const RuntimeReport& runtime() const { return runtime_; }
  const SessionConfig& config() const { return config_; }

  /// Trajectories (TUM), PLY clouds, report.json (runtime only with
  /// `timing`) and snapshot.bin. Ground truth found in the dataset directory
  /// is evaluated into the report.
  void writeOutputs(const std::string& dir, bool timing) const;

  /// Versioned binary container of the estimator state, maps and models.
  void saveSnapshot(const std::string& path) const;
  /// Restores a snapshot taken on the same dataset; the next step continues
  /// from the saved frame. Throws std::runtime_error on a bad container.
  void loadSnapshot(const std::string& path);

 private:
  void initialiseState(const FrameData& f);
  Pose predictedPose(const ObjectModel& m) const;
  ObjectModel* findModel(int id);

  const Dataset& dataset_;
  SessionConfig config_;
  CameraIntrinsics K_;
  std::size_t next_ = 0;

  StateVector x_;
  MarginalizationPrior prior_;
  TsdfVolume background_;
  std::vector<ObjectModel> objects_;
  int next_id_ = 1;

  // reference for the next frame
  std::int64_t ref_ts_ = 0;
  Pose T_WC_ref_;
  ImageF ref_intensity_;
  RenderedView ref_view_;
  Mask ref_mask_;

  std::vector<StampedPose> camera_traj_;
  std::map<int, std::vector<StampedPose>> object_traj_;
  std::vector<int> degenerate_frames_;
  std::vector<RelocEvent> reloc_events_;
  RuntimeReport runtime_;
};

}  // namespace dynvio
