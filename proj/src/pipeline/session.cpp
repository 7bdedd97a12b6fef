// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/pipeline/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include <json.hpp>
#include <opencv2/imgproc.hpp>

#include "dynvio/manifold/so3.hpp"
#include "dynvio/pipeline/evaluation.hpp"
#include "dynvio/reloc/relocalise.hpp"

namespace dynvio {

const char* toString(TimingCategory c) {
  switch (c) {
    case TimingCategory::CameraTracking: return "camera_tracking";
    case TimingCategory::ObjectTracking: return "object_tracking";
    case TimingCategory::Relocalisation: return "relocalisation";
    case TimingCategory::Segmentation: return "segmentation";
    case TimingCategory::Integration: return "integration";
    case TimingCategory::Raycasting: return "raycasting";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

// Adds elapsed wall time to a row on destruction; samples are counted by the caller.
class Stopwatch {
 public:
  explicit Stopwatch(TimingRow& row) : row_(row), t0_(Clock::now()) {}
  ~Stopwatch() {
    row_.total_ms += std::chrono::duration<double, std::milli>(Clock::now() - t0_).count();
  }
  Stopwatch(const Stopwatch&) = delete;
  Stopwatch& operator=(const Stopwatch&) = delete;

 private:
  TimingRow& row_;
  Clock::time_point t0_;
};

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool needsKeyframe(const ObjectModel& m, const Pose& T_CO, double min_angle_deg) {
  const double min_angle = min_angle_deg * M_PI / 180.0;
  for (const auto& kf : m.keyframes)
    if (!(angleBetween(kf.T_CO.rotation(), T_CO.rotation()) > min_angle)) return false;
  return true;
}

Mask validDepthMask(const Mask& mask, const ImageF& depth) {
  Mask out(mask.width(), mask.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] && depth[i] > 0.0f;
  return out;
}

Mask erodeMask(const Mask& m, int r) {
  if (r <= 0) return m;
  Mask out(m.width(), m.height(), 0);
  const cv::Mat src(m.height(), m.width(), CV_8U, const_cast<unsigned char*>(m.data().data()));
  cv::Mat dst(out.height(), out.width(), CV_8U, out.data().data());
  cv::erode(src, dst, cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2 * r + 1, 2 * r + 1)),
            cv::Point(-1, -1), 1, cv::BORDER_CONSTANT, cv::Scalar(0));
  return out;
}

}  // namespace

Session::Session(const Dataset& dataset, SessionConfig config)
    : dataset_(dataset),
      config_(std::move(config)),
      K_(dataset.calibration().camera),
      background_(config_.background) {
  if (dataset_.frames().empty()) throw std::runtime_error("dataset has no frames");
}

ObjectModel* Session::findModel(int id) {
  for (auto& m : objects_)
    if (m.id == id) return &m;
  return nullptr;
}

Pose Session::predictedPose(const ObjectModel& m) const {
  return m.T_WO * (m.T_WO_prev.inverse() * m.T_WO);
}

void Session::initialiseState(const FrameData& f) {
  constexpr std::int64_t kWindow = 50'000'000;
  std::vector<ImuMeasurement> samples;
  for (const auto& s : dataset_.imu())
    if (std::llabs(s.timestamp_ns - f.timestamp_ns) <= kWindow) samples.push_back(s);
  if (samples.empty())
    throw std::runtime_error("no IMU samples within 50 ms of the first frame");
  x_ = gravityAlignedState(samples, dataset_.calibration().T_SC);
  prior_ = initialPrior(x_, config_.initial);
}

void Session::runToEnd() {
  while (!done()) step();
}

void Session::step() {
  if (done()) throw std::logic_error("session: no frames left");
  const auto t_frame = Clock::now();
  const int k = static_cast<int>(next_);
  const FrameData f = dataset_.load(next_);
  const int w = K_.width, h = K_.height;
  const int levels = config_.tracking.levels;
  const ObjectParams& op = config_.objects;
  TrackingParams object_tracking = config_.tracking;
  object_tracking.sigma_photo = op.sigma_photo;
  auto& rt = runtime_;

  std::vector<Detection> dets;
  {
    Stopwatch sw(rt[TimingCategory::Segmentation]);
    dets = extractDetections(f.labels, dataset_.classes());
  }

  // Every labelled pixel is kept out of camera tracking.
  Frame frame;
  frame.timestamp_ns = f.timestamp_ns;
  frame.intensity = f.intensity;
  frame.depth = f.depth;
  frame.mask = Mask(w, h, 0);
  for (std::size_t i = 0; i < frame.mask.size(); ++i)
    frame.mask[i] = f.depth[i] > 0.0f && f.labels[i] == 0;

  LivePyramid live;
  bool degenerate = false;
  {
    Stopwatch sw(rt[TimingCategory::CameraTracking]);
    live = buildLivePyramid(K_, frame, levels);
    if (k == 0) {
      initialiseState(f);
    } else {
      PreintegratedBatch batch;
      try {
        batch = makeBatch(dataset_.imu(), ref_ts_, f.timestamp_ns, dataset_.calibration().T_SC);
      } catch (const MalformedBatchError& e) {
        throw std::runtime_error("frame " + std::to_string(f.id) + ": " + e.what());
      }
      const Propagation pred = propagate(x_, batch, config_.imu);
      const ReferencePyramid ref = buildReferencePyramid(K_, ref_intensity_, ref_view_, ref_mask_,
                                                         T_WC_ref_, Pose(), levels);
      const TrackingResult res =
          solveTracking(x_, pred.state, ref, live, maskPyramid(frame.mask, levels), batch,
                        config_.imu, prior_, K_, config_.tracking);
      prior_ = marginalizeReference(res.H, res.b, res.x_L).prior;
      x_ = res.x_L;
      degenerate = res.degenerate;
    }
    rt[TimingCategory::CameraTracking].samples += 1;
  }
  if (degenerate) degenerate_frames_.push_back(f.id);
  const Pose T_WC = x_.T_WC();

  // Association against the live models (moving ones at their predicted pose).
  std::vector<int> assoc_idx;
  std::vector<Detection> assoc_dets;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].classId() == op.person_class) continue;
    assoc_idx.push_back(static_cast<int>(i));
    assoc_dets.push_back(dets[i]);
  }
  std::map<int, Pose> predicted;
  std::vector<RaycastModel> render;
  std::vector<int> live_ids;
  for (const auto& m : objects_) {
    if (m.status != TrackStatus::Live) continue;
    const Pose P = m.motion == MotionStatus::Moving ? predictedPose(m) : m.T_WO;
    predicted[m.id] = P;
    render.push_back({m.id, &m.volume, P});
    live_ids.push_back(m.id);
  }
  RenderedView assoc_view(w, h);
  if (!render.empty()) {
    Stopwatch sw(rt[TimingCategory::Raycasting]);
    assoc_view = raycast(render, T_WC, K_, config_.raycast);
  }
  const Association assoc = associate(assoc_dets, assoc_view.instance, live_ids, op.iou_threshold);
  std::map<int, int> det_of_model;  // model id -> index into dets
  for (const auto& [di, id] : assoc.matches) det_of_model[id] = assoc_idx[static_cast<std::size_t>(di)];

  for (const auto& [id, di] : det_of_model) {
    ObjectModel& m = *findModel(id);
    const Detection& d = dets[static_cast<std::size_t>(di)];
    m.label = d.label;
    m.S_max = std::max(m.S_max, d.size);
    m.last_seen_frame = k;
    if (m.motion != MotionStatus::Moving) {
      const MotionVerdict v = classifyMotion(d.mask, f.depth, assoc_view, id, T_WC, K_, op);
      updateMotionStatus(m, v.verdict, op);
    }
  }

  // Object tracking: static models keep their pose.
  for (auto it = det_of_model.begin(); it != det_of_model.end();) {
    ObjectModel& m = *findModel(it->first);
    if (m.motion == MotionStatus::Static) {
      m.T_WO_prev = m.T_WO;
      ++it;
      continue;
    }
    Stopwatch sw(rt[TimingCategory::ObjectTracking]);
    rt[TimingCategory::ObjectTracking].samples += 1;
    Mask ref_mask(w, h, 0);
    for (std::size_t i = 0; i < ref_mask.size(); ++i) ref_mask[i] = ref_view_.instance[i] == m.id;
    ref_mask = erodeMask(ref_mask, op.reference_erosion);
    const ReferencePyramid ref = buildReferencePyramid(K_, ref_intensity_, ref_view_, ref_mask,
                                                       T_WC_ref_, m.T_WO.inverse(), levels);
    const Mask lm = validDepthMask(dets[static_cast<std::size_t>(it->second)].mask, f.depth);
    const ObjectTrackResult r = trackObject(ref, live, maskPyramid(lm, levels), T_WC,
                                            predicted.at(m.id), K_, object_tracking);
    if (r.lost) {
      m.status = TrackStatus::Lost;
      it = det_of_model.erase(it);
      continue;
    }
    m.T_WO_prev = m.T_WO;
    m.T_WO = T_WC * r.T_CLO;
    ++it;
  }
  for (auto& m : objects_)
    if (m.status == TrackStatus::Live && !det_of_model.count(m.id)) m.status = TrackStatus::Lost;

  std::map<int, int> model_of_det;
  for (const auto& [id, di] : det_of_model) model_of_det[di] = id;

  // Relocalisation of lost models from unmatched detections, or from
  // detections held by a model too young to be trusted as a new object.
  std::set<int> attempted;
  std::vector<int> delete_ids;
  int attempts = 0;
  const int cap = config_.reloc.max_attempts_per_frame;
  for (const int di : assoc_idx) {
    const auto held = model_of_det.find(di);
    if (held != model_of_det.end()) {
      const ObjectModel& owner = *findModel(held->second);
      if (k - owner.created_frame >= config_.young_duplicate_frames) continue;
    }
    const Detection& d = dets[static_cast<std::size_t>(di)];
    std::optional<FeatureSet> feats;
    std::optional<std::vector<Mask>> live_mask;
    for (auto& m : objects_) {
      if (m.status != TrackStatus::Lost || m.keyframes.empty()) continue;
      if (m.mostLikelyClass() != d.classId()) continue;
      if (!shouldAttempt(d, m, K_, config_.reloc)) continue;
      if (cap > 0 && attempts >= cap) break;
      ++attempts;
      attempted.insert(di);
      Stopwatch sw(rt[TimingCategory::Relocalisation]);
      rt[TimingCategory::Relocalisation].samples += static_cast<long>(m.keyframes.size());
      if (!feats) feats = detectFeatures(f.intensity, f.depth, d.mask, K_, config_.reloc.features);
      const std::uint64_t seed = config_.seed ^ static_cast<std::uint64_t>(f.timestamp_ns) ^
                                 mix64(static_cast<std::uint64_t>(m.id));
      RelocEvent ev;
      ev.frame = f.id;
      ev.model = m.id;
      ev.label = d.label;
      const auto cand = proposeRelocalisation(m, *feats, K_, seed, config_.reloc);
      if (cand) {
        ev.keyframe = cand->keyframe;
        ev.matches = static_cast<int>(cand->matches.size());
        ev.inliers = static_cast<int>(cand->pnp.inliers.size());
        if (!live_mask) live_mask = maskPyramid(validDepthMask(d.mask, f.depth), levels);
        const Verification v = verifyCandidate(m, cand->T_CLO, live, *live_mask, T_WC, K_,
                                               object_tracking, config_.reloc);
        ev.mean_residual = v.stats.mean_abs;
        ev.valid_ratio = v.stats.validRatio();
        ev.accepted = v.accepted;
        if (v.accepted) {
          m.status = TrackStatus::Live;
          m.T_WO = T_WC * v.T_CLO;
          m.T_WO_prev = m.T_WO;
          m.label = d.label;
          m.S_max = std::max(m.S_max, d.size);
          m.last_seen_frame = k;
          if (held != model_of_det.end()) {
            ev.duplicate_deleted = held->second;
            delete_ids.push_back(held->second);
            det_of_model.erase(held->second);
          }
          det_of_model[m.id] = di;
          model_of_det[di] = m.id;
          reloc_events_.push_back(ev);
          break;
        }
      }
      reloc_events_.push_back(ev);
    }
  }
  for (const int id : delete_ids) {
    objects_.erase(std::remove_if(objects_.begin(), objects_.end(),
                                  [id](const ObjectModel& m) { return m.id == id; }),
                   objects_.end());
    object_traj_.erase(id);
  }

  // New models; deferred while a lost model of the same class may still come back.
  for (const int di : assoc_idx) {
    if (model_of_det.count(di)) continue;
    const Detection& d = dets[static_cast<std::size_t>(di)];
    const bool reclaimable = std::any_of(objects_.begin(), objects_.end(), [&](const ObjectModel& m) {
      return m.status == TrackStatus::Lost && !m.keyframes.empty() &&
             m.mostLikelyClass() == d.classId();
    });
    if (reclaimable && !attempted.count(di)) continue;
    auto m = initializeObject(next_id_, d, f.depth, K_, T_WC, op.min_valid_depth);
    if (!m) continue;
    m->volume = TsdfVolume(config_.object);
    m->created_frame = k;
    m->last_seen_frame = k;
    det_of_model[next_id_] = di;
    model_of_det[di] = next_id_;
    ++next_id_;
    objects_.push_back(std::move(*m));
  }

  if (!degenerate) {
    RenderedView post(w, h);
    {
      std::vector<RaycastModel> rm;
      for (const auto& [id, di] : det_of_model) {
        const ObjectModel& m = *findModel(id);
        if (!m.volume.empty()) rm.push_back({m.id, &m.volume, m.T_WO});
      }
      Stopwatch sw(rt[TimingCategory::Raycasting]);
      if (!rm.empty()) post = raycast(rm, T_WC, K_, config_.raycast);
    }
    std::map<int, Mask> refined;
    {
      Stopwatch sw(rt[TimingCategory::Segmentation]);
      for (const auto& [id, di] : det_of_model)
        refined[id] = refineMask(dets[static_cast<std::size_t>(di)].mask, f.depth, post, id, K_,
                                 op.refine_gate_sigma);
    }
    {
      Stopwatch sw(rt[TimingCategory::Integration]);
      Mask bg(w, h, 0);
      for (std::size_t i = 0; i < bg.size(); ++i) bg[i] = f.labels[i] == 0;
      IntegrationInput in;
      in.camera = &K_;
      in.depth = &f.depth;
      in.intensity = &f.intensity;
      in.mask = &bg;
      in.update_foreground = false;
      integrateFrame(background_, T_WC, in);
      for (const auto& [id, di] : det_of_model) {
        ObjectModel& m = *findModel(id);
        IntegrationInput oi;
        oi.camera = &K_;
        oi.depth = &f.depth;
        oi.intensity = &f.intensity;
        oi.mask = &refined.at(id);
        oi.class_probs = dets[static_cast<std::size_t>(di)].class_probs;
        oi.update_foreground = true;
        oi.carve_unmasked = true;
        integrateFrame(m.volume, m.T_WO.inverse() * T_WC, oi);
      }
    }
    {
      Stopwatch sw(rt[TimingCategory::Segmentation]);
      for (const auto& [id, di] : det_of_model) {
        ObjectModel& m = *findModel(id);
        const Pose T_CO = T_WC.inverse() * m.T_WO;
        if (!needsKeyframe(m, T_CO, op.keyframe_angle_deg)) continue;
        FeatureSet fs = detectFeatures(f.intensity, f.depth, refined.at(id), K_,
                                       config_.reloc.features);
        if (static_cast<int>(fs.size()) < config_.reloc.match.min_matches) continue;
        maybeAddKeyframe(m, T_CO, std::move(fs), op.keyframe_angle_deg);
      }
    }
    rt[TimingCategory::Integration].samples += 1;
  }
  rt[TimingCategory::Segmentation].samples += 1;

  {
    Stopwatch sw(rt[TimingCategory::Raycasting]);
    std::vector<RaycastModel> rm{{0, &background_, Pose()}};
    for (const auto& m : objects_)
      if (m.status == TrackStatus::Live) rm.push_back({m.id, &m.volume, m.T_WO});
    ref_view_ = raycast(rm, T_WC, K_, config_.raycast);
    rt[TimingCategory::Raycasting].samples += 1;
  }
  ref_intensity_ = f.intensity;
  ref_mask_ = Mask(w, h, 0);
  for (std::size_t i = 0; i < ref_mask_.size(); ++i)
    ref_mask_[i] = ref_view_.instance[i] == 0 && f.labels[i] == 0;
  T_WC_ref_ = T_WC;
  ref_ts_ = f.timestamp_ns;

  camera_traj_.push_back({f.timestamp_ns, T_WC});
  for (const auto& [id, di] : det_of_model)
    object_traj_[id].push_back({f.timestamp_ns, findModel(id)->T_WO});

  ++next_;
  rt.frame_total_ms +=
      std::chrono::duration<double, std::milli>(Clock::now() - t_frame).count();
  rt.frames += 1;
}

namespace {

nlohmann::json seriesJson(const std::vector<ErrorSample>& s) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : s) a.push_back({e.t, e.err_trans_m, e.err_rot_deg});
  return a;
}

}  // namespace

void Session::writeOutputs(const std::string& dir, bool timing) const {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());

  writeTum((root / "trajectory_camera.txt").string(), camera_traj_);
  exportPly((root / "background.ply").string(), background_, Pose(), -1.0);

  nlohmann::json report;
  report["frames"] = camera_traj_.size();
  report["degenerate_frames"] = degenerate_frames_;

  nlohmann::json objs = nlohmann::json::array();
  for (const auto& m : objects_) {
    const std::string traj = "trajectory_object_" + std::to_string(m.id) + ".txt";
    const auto it = object_traj_.find(m.id);
    if (it != object_traj_.end()) writeTum((root / traj).string(), it->second);
    exportPly((root / ("object_" + std::to_string(m.id) + ".ply")).string(), m.volume, m.T_WO);
    objs.push_back({{"id", m.id},
                    {"label", m.label},
                    {"class", m.mostLikelyClass()},
                    {"status", toString(m.status)},
                    {"motion", toString(m.motion)},
                    {"keyframes", m.keyframes.size()},
                    {"s_max", m.S_max},
                    {"first_frame", m.created_frame},
                    {"last_frame", m.last_seen_frame},
                    {"observations", it == object_traj_.end() ? 0 : it->second.size()},
                    {"trajectory", it == object_traj_.end() ? "" : traj}});
  }
  report["objects"] = objs;

  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : reloc_events_)
    events.push_back({{"frame", e.frame},
                      {"model", e.model},
                      {"label", e.label},
                      {"keyframe", e.keyframe},
                      {"matches", e.matches},
                      {"inliers", e.inliers},
                      {"mean_residual_m", e.mean_residual},
                      {"valid_ratio", e.valid_ratio},
                      {"accepted", e.accepted},
                      {"duplicate_deleted", e.duplicate_deleted}});
  report["relocalisations"] = events;

  if (timing) {
    nlohmann::json cats = nlohmann::json::array();
    for (int c = 0; c < kTimingCategories; ++c) {
      const TimingRow& r = runtime_.rows[static_cast<std::size_t>(c)];
      cats.push_back({{"name", toString(static_cast<TimingCategory>(c))},
                      {"total_ms", r.total_ms},
                      {"samples", r.samples},
                      {"mean_ms", r.meanMs()}});
    }
    report["runtime"] = {{"categories", cats},
                         {"frame_total_ms", runtime_.frame_total_ms},
                         {"frames", runtime_.frames}};
  }

  // Ground truth shipped with the dataset, if any.
  const fs::path gt_cam_path = fs::path(dataset_.directory()) / "groundtruth_cam.txt";
  if (fs::exists(gt_cam_path)) {
    nlohmann::json ev;
    const auto gt_cam = readTum(gt_cam_path.string());
    try {
      const EvaluationReport cam = evaluateTrajectory(camera_traj_, gt_cam, Alignment::Rigid);
      ev["camera"] = {{"ate_rmse_m", cam.ate_rmse_m},
                      {"pairs", cam.pairs},
                      {"alignment", "rigid"},
                      {"series", seriesJson(cam.series)}};
    } catch (const std::runtime_error& e) {
      ev["camera"] = {{"error", e.what()}};
    }
    nlohmann::json oe = nlohmann::json::array();
    for (const auto& m : objects_) {
      const fs::path p =
          fs::path(dataset_.directory()) / ("groundtruth_obj_" + std::to_string(m.label) + ".txt");
      const auto it = object_traj_.find(m.id);
      if (!fs::exists(p) || it == object_traj_.end()) continue;
      const auto s = objectPoseErrors(it->second, camera_traj_, readTum(p.string()), gt_cam);
      double sq = 0.0, max_t = 0.0, max_r = 0.0;
      for (const auto& e : s) {
        sq += e.err_trans_m * e.err_trans_m;
        max_t = std::max(max_t, e.err_trans_m);
        max_r = std::max(max_r, e.err_rot_deg);
      }
      oe.push_back({{"id", m.id},
                    {"label", m.label},
                    {"samples", s.size()},
                    {"rmse_trans_m", s.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(s.size()))},
                    {"max_trans_m", max_t},
                    {"max_rot_deg", max_r},
                    {"series", seriesJson(s)}});
    }
    ev["objects"] = oe;
    report["evaluation"] = ev;
  }

  std::ofstream os(root / "report.json");
  os << report.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write report.json");
  saveSnapshot((root / "snapshot.bin").string());
}

}  // namespace dynvio
