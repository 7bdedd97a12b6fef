// SPDX-License-Identifier: BSD-3-Clause
// Binary snapshot: "DYNVSNAP", u32 version, then fields in declaration order.
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <type_traits>

#include "dynvio/pipeline/session.hpp"

namespace dynvio {

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'N', 'V', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_arithmetic_v<T>);
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void count(std::size_t n) { pod(static_cast<std::uint64_t>(n)); }
  void vec3(const Eigen::Vector3d& v) {
    for (int i = 0; i < 3; ++i) pod(v[i]);
  }
  void pose(const Pose& p) {
    const Quaternion& q = p.rotation();
    pod(q.w()), pod(q.x()), pod(q.y()), pod(q.z());
    vec3(p.translation());
  }
  template <typename T>
  void image(const Image<T>& img) {
    pod(static_cast<std::int32_t>(img.width()));
    pod(static_cast<std::int32_t>(img.height()));
    for (std::size_t i = 0; i < img.size(); ++i) {
      if constexpr (std::is_arithmetic_v<T>) {
        pod(img[i]);
      } else {
        for (int c = 0; c < img[i].size(); ++c) pod(img[i][c]);
      }
    }
  }
  void state(const StateVector& x) {
    pose(x.T_WC());
    vec3(x.v_S), vec3(x.b_g), vec3(x.b_a);
  }
  template <typename M>
  void matrix(const M& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) pod(m.data()[i]);
  }
  void features(const FeatureSet& f) {
    count(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      pod(f.keypoints[i].x()), pod(f.keypoints[i].y());
      for (auto w : f.descriptors[i]) pod(w);
      vec3(f.points[i]);
    }
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <typename T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw std::runtime_error("snapshot: truncated");
    return v;
  }
  std::size_t count(std::size_t limit = 1u << 28) {
    const auto n = pod<std::uint64_t>();
    if (n > limit) throw std::runtime_error("snapshot: corrupt length");
    return static_cast<std::size_t>(n);
  }
  Eigen::Vector3d vec3() {
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v[i] = pod<double>();
    return v;
  }
  Pose pose() {
    const double w = pod<double>(), x = pod<double>(), y = pod<double>(), z = pod<double>();
    const Eigen::Vector3d t = vec3();
    return Pose(Quaternion(w, x, y, z), t);
  }
  template <typename T>
  Image<T> image() {
    const int w = pod<std::int32_t>(), h = pod<std::int32_t>();
    if (w < 0 || h < 0 || w > 1 << 15 || h > 1 << 15) throw std::runtime_error("snapshot: bad image");
    Image<T> img(w, h);
    for (std::size_t i = 0; i < img.size(); ++i) {
      if constexpr (std::is_arithmetic_v<T>) {
        img[i] = pod<T>();
      } else {
        for (int c = 0; c < img[i].size(); ++c) img[i][c] = pod<typename T::Scalar>();
      }
    }
    return img;
  }
  StateVector state() {
    StateVector x;
    x.setPose(pose());
    x.v_S = vec3(), x.b_g = vec3(), x.b_a = vec3();
    return x;
  }
  template <typename M>
  void matrix(M& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = pod<double>();
  }
  FeatureSet features() {
    FeatureSet f;
    const std::size_t n = count();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = pod<double>(), v = pod<double>();
      f.keypoints.emplace_back(u, v);
      Descriptor d;
      for (auto& w : d) w = pod<std::uint64_t>();
      f.descriptors.push_back(d);
      f.points.push_back(vec3());
    }
    return f;
  }

 private:
  std::istream& is_;
};

}  // namespace

void Session::saveSnapshot(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  Writer w(os);
  w.pod(kVersion);
  w.count(dataset_.frames().size());
  w.count(next_);
  w.state(x_);
  w.matrix(prior_.H);
  w.matrix(prior_.b);
  w.state(prior_.x_bar);
  background_.write(os);
  w.pod(static_cast<std::int32_t>(next_id_));
  w.count(objects_.size());
  for (const auto& m : objects_) {
    w.pod(static_cast<std::int32_t>(m.id));
    m.volume.write(os);
    w.pose(m.T_WO);
    w.pose(m.T_WO_prev);
    w.pod(static_cast<std::int32_t>(m.status));
    w.pod(static_cast<std::int32_t>(m.motion));
    w.pod(static_cast<std::int32_t>(m.S_max));
    w.pod(static_cast<std::int32_t>(m.label));
    w.pod(static_cast<std::int32_t>(m.created_frame));
    w.pod(static_cast<std::int32_t>(m.last_seen_frame));
    w.pod(static_cast<std::int32_t>(m.static_votes));
    w.count(m.keyframes.size());
    for (const auto& kf : m.keyframes) {
      w.pose(kf.T_CO);
      w.features(kf.features);
    }
  }
  w.pod(ref_ts_);
  w.pose(T_WC_ref_);
  w.image(ref_intensity_);
  w.image(ref_view_.depth);
  w.image(ref_view_.vertex);
  w.image(ref_view_.normal);
  w.image(ref_view_.instance);
  w.image(ref_view_.intensity);
  w.image(ref_view_.valid);
  w.image(ref_mask_);
  w.count(camera_traj_.size());
  for (const auto& s : camera_traj_) w.pod(s.timestamp_ns), w.pose(s.pose);
  w.count(object_traj_.size());
  for (const auto& [id, traj] : object_traj_) {
    w.pod(static_cast<std::int32_t>(id));
    w.count(traj.size());
    for (const auto& s : traj) w.pod(s.timestamp_ns), w.pose(s.pose);
  }
  w.count(degenerate_frames_.size());
  for (int d : degenerate_frames_) w.pod(static_cast<std::int32_t>(d));
  w.count(reloc_events_.size());
  for (const auto& e : reloc_events_) {
    for (int v : {e.frame, e.model, e.label, e.keyframe, e.matches, e.inliers, e.duplicate_deleted})
      w.pod(static_cast<std::int32_t>(v));
    w.pod(e.mean_residual), w.pod(e.valid_ratio);
    w.pod(static_cast<std::uint8_t>(e.accepted));
  }
  if (!os) throw std::runtime_error("error writing " + path);
}

void Session::loadSnapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[sizeof(kMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("snapshot: bad magic in " + path);
  Reader r(is);
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion)
    throw std::runtime_error("snapshot: unsupported version " + std::to_string(version));
  if (r.count() != dataset_.frames().size())
    throw std::runtime_error("snapshot: taken on a different dataset");
  const std::size_t next = r.count();
  if (next > dataset_.frames().size()) throw std::runtime_error("snapshot: corrupt frame index");

  // Read into a scratch copy so a failure leaves this session untouched.
  Session s(dataset_, config_);
  s.next_ = next;
  s.x_ = r.state();
  r.matrix(s.prior_.H);
  r.matrix(s.prior_.b);
  s.prior_.x_bar = r.state();
  s.background_ = TsdfVolume::read(is);
  s.next_id_ = r.pod<std::int32_t>();
  const std::size_t nobj = r.count();
  for (std::size_t i = 0; i < nobj; ++i) {
    ObjectModel m;
    m.id = r.pod<std::int32_t>();
    m.volume = TsdfVolume::read(is);
    m.T_WO = r.pose();
    m.T_WO_prev = r.pose();
    const int status = r.pod<std::int32_t>(), motion = r.pod<std::int32_t>();
    if (status < 0 || status > 1 || motion < 0 || motion > 2)
      throw std::runtime_error("snapshot: corrupt object status");
    m.status = static_cast<TrackStatus>(status);
    m.motion = static_cast<MotionStatus>(motion);
    m.S_max = r.pod<std::int32_t>();
    m.label = r.pod<std::int32_t>();
    m.created_frame = r.pod<std::int32_t>();
    m.last_seen_frame = r.pod<std::int32_t>();
    m.static_votes = r.pod<std::int32_t>();
    const std::size_t nkf = r.count();
    for (std::size_t j = 0; j < nkf; ++j) {
      ObjectKeyframe kf;
      kf.T_CO = r.pose();
      kf.features = r.features();
      m.keyframes.push_back(std::move(kf));
    }
    s.objects_.push_back(std::move(m));
  }
  s.ref_ts_ = r.pod<std::int64_t>();
  s.T_WC_ref_ = r.pose();
  s.ref_intensity_ = r.image<float>();
  s.ref_view_.depth = r.image<float>();
  s.ref_view_.vertex = r.image<Eigen::Vector3f>();
  s.ref_view_.normal = r.image<Eigen::Vector3f>();
  s.ref_view_.instance = r.image<int>();
  s.ref_view_.intensity = r.image<float>();
  s.ref_view_.valid = r.image<unsigned char>();
  s.ref_mask_ = r.image<unsigned char>();
  const std::size_t ncam = r.count();
  for (std::size_t i = 0; i < ncam; ++i) {
    StampedPose p;
    p.timestamp_ns = r.pod<std::int64_t>();
    p.pose = r.pose();
    s.camera_traj_.push_back(p);
  }
  const std::size_t ntraj = r.count();
  for (std::size_t i = 0; i < ntraj; ++i) {
    const int id = r.pod<std::int32_t>();
    auto& traj = s.object_traj_[id];
    const std::size_t n = r.count();
    for (std::size_t j = 0; j < n; ++j) {
      StampedPose p;
      p.timestamp_ns = r.pod<std::int64_t>();
      p.pose = r.pose();
      traj.push_back(p);
    }
  }
  const std::size_t ndeg = r.count();
  for (std::size_t i = 0; i < ndeg; ++i) s.degenerate_frames_.push_back(r.pod<std::int32_t>());
  const std::size_t nev = r.count();
  for (std::size_t i = 0; i < nev; ++i) {
    RelocEvent e;
    for (int* v : {&e.frame, &e.model, &e.label, &e.keyframe, &e.matches, &e.inliers,
                   &e.duplicate_deleted})
      *v = r.pod<std::int32_t>();
    e.mean_residual = r.pod<double>();
    e.valid_ratio = r.pod<double>();
    e.accepted = r.pod<std::uint8_t>() != 0;
    s.reloc_events_.push_back(e);
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("snapshot: trailing data");

  next_ = s.next_;
  x_ = s.x_;
  prior_ = s.prior_;
  background_ = std::move(s.background_);
  next_id_ = s.next_id_;
  objects_ = std::move(s.objects_);
  ref_ts_ = s.ref_ts_;
  T_WC_ref_ = s.T_WC_ref_;
  ref_intensity_ = std::move(s.ref_intensity_);
  ref_view_ = std::move(s.ref_view_);
  ref_mask_ = std::move(s.ref_mask_);
  camera_traj_ = std::move(s.camera_traj_);
  object_traj_ = std::move(s.object_traj_);
  degenerate_frames_ = std::move(s.degenerate_frames_);
  reloc_events_ = std::move(s.reloc_events_);
  runtime_ = RuntimeReport{};
}

}  // namespace dynvio
