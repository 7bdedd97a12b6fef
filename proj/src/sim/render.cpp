// SPDX-License-Identifier: BSD-3-Clause
#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "dynvio/manifold/so3.hpp"
#include "dynvio/sim/scene.hpp"

namespace dynvio::sim {

Texture Texture::flat(double base) {
  Texture t;
  t.kind = Kind::Flat;
  t.base = base;
  return t;
}

Texture Texture::checker(double scale, double contrast) {
  Texture t;
  t.kind = Kind::Checker;
  t.scale = scale;
  t.contrast = contrast;
  return t;
}

Texture Texture::noise(std::uint32_t seed, double scale, double contrast) {
  Texture t;
  t.kind = Kind::Noise;
  t.scale = scale;
  t.contrast = contrast;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    const double z = 2.0 * u(rng) - 1.0, phi = 2.0 * M_PI * u(rng);
    const double r = std::sqrt(1.0 - z * z);
    const Eigen::Vector3d dir(r * std::cos(phi), r * std::sin(phi), z);
    const double lambda = scale * (0.6 + 1.4 * u(rng));
    const double phase = 2.0 * M_PI * u(rng);
    t.waves.push_back({2.0 * M_PI / lambda * dir, phase, 0.5 + 0.5 * u(rng)});
  }
  return t;
}

double Texture::albedo(const Eigen::Vector3d& p) const {
  switch (kind) {
    case Kind::Flat:
      return base;
    case Kind::Checker: {
      const double k = M_PI / scale;
      const double s = std::sin(k * p.x() + 0.3) * std::sin(k * p.y() + 0.7) *
                       std::sin(k * p.z() + 1.1);
      return base + contrast * std::tanh(3.0 * s);
    }
    case Kind::Noise: {
      double sum = 0.0, norm = 0.0;
      for (const auto& w : waves) {
        sum += w.amplitude * std::sin(w.k.dot(p) + w.phase);
        norm += w.amplitude;
      }
      return norm > 0.0 ? base + 2.5 * contrast * sum / norm : base;
    }
  }
  return base;
}

namespace {

struct LocalHit {
  double t;
  Eigen::Vector3d n;  // local
};

std::optional<LocalHit> intersect(const Primitive& prim, const Eigen::Vector3d& o,
                                  const Eigen::Vector3d& d) {
  constexpr double eps = 1e-9;
  switch (prim.shape) {
    case Shape::Plane: {
      if (std::abs(d.z()) < 1e-15) return std::nullopt;
      const double t = -o.z() / d.z();
      if (!(t > eps)) return std::nullopt;
      const Eigen::Vector3d p = o + t * d;
      if (prim.size.x() > 0 && std::abs(p.x()) > prim.size.x()) return std::nullopt;
      if (prim.size.y() > 0 && std::abs(p.y()) > prim.size.y()) return std::nullopt;
      return LocalHit{t, Eigen::Vector3d(0, 0, d.z() < 0 ? 1.0 : -1.0)};
    }
    case Shape::Sphere: {
      const double r = prim.size.x();
      const double b = o.dot(d);
      const double c = o.squaredNorm() - r * r;
      const double disc = b * b - c;
      if (disc < 0) return std::nullopt;
      const double s = std::sqrt(disc);
      double t = -b - s;
      if (!(t > eps)) t = -b + s;
      if (!(t > eps)) return std::nullopt;
      const Eigen::Vector3d n = (o + t * d) / r;
      return LocalHit{t, c < 0 ? Eigen::Vector3d(-n) : n};
    }
    case Shape::Box: {
      double t0 = -std::numeric_limits<double>::infinity();
      double t1 = std::numeric_limits<double>::infinity();
      int a0 = -1, a1 = -1;
      double s0 = 0, s1 = 0;
      for (int k = 0; k < 3; ++k) {
        const double h = prim.size[k];
        if (std::abs(d[k]) < 1e-15) {
          if (std::abs(o[k]) > h) return std::nullopt;
          continue;
        }
        double ta = (-h - o[k]) / d[k], tb = (h - o[k]) / d[k];
        double sa = -1, sb = 1;  // outward sign of the face hit at ta / tb
        if (ta > tb) {
          std::swap(ta, tb);
          std::swap(sa, sb);
        }
        if (ta > t0) t0 = ta, a0 = k, s0 = sa;
        if (tb < t1) t1 = tb, a1 = k, s1 = sb;
      }
      if (t0 > t1) return std::nullopt;
      if (t0 > eps && a0 >= 0) {
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        n[a0] = s0;
        return LocalHit{t0, n};
      }
      if (t1 > eps && a1 >= 0) {  // from inside
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        n[a1] = -s1;
        return LocalHit{t1, n};
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Hit> castRay(const SceneSpec& scene, const std::vector<Pose>& T_PW,
                           const Eigen::Vector3d& o_W, const Eigen::Vector3d& d_W) {
  std::optional<Hit> best;
  const Primitive* best_prim = nullptr;
  Eigen::Vector3d best_local;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const Primitive& prim = scene.primitives[i];
    const Eigen::Matrix3d R = T_PW[i].rotationMatrix();
    const Eigen::Vector3d o = R * o_W + T_PW[i].translation();
    const Eigen::Vector3d d = R * d_W;
    const auto h = intersect(prim, o, d);
    if (!h || (best && h->t >= best->t)) continue;
    best = Hit{h->t, R.transpose() * h->n, 0.0, prim.instance};
    best_prim = &prim;
    best_local = o + h->t * d;
  }
  if (best) {
    const double shade = std::max(0.0, -best->normal.dot(scene.light_dir));
    best->intensity = best_prim->texture.albedo(best_local) *
                      (scene.ambient + (1.0 - scene.ambient) * shade);
  }
  return best;
}

RenderedFrame renderFrame(const SceneSpec& scene, double t, const Pose& T_WC,
                          const CameraIntrinsics& K, const RenderNoise& noise,
                          std::mt19937_64* rng) {
  RenderedFrame f{ImageF(K.width, K.height, 0.0f), ImageF(K.width, K.height, 0.0f),
                  ImageU16(K.width, K.height, 0)};
  std::vector<Pose> T_PW;
  for (const auto& p : scene.primitives) T_PW.push_back(p.trajectory.pose(t).inverse());
  const Eigen::Matrix3d R_WC = T_WC.rotationMatrix();
  const Eigen::Vector3d o_W = T_WC.translation();
  std::normal_distribution<double> n01(0.0, 1.0);
  const bool noisy = rng && (noise.depth || noise.sigma_intensity > 0.0);

  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Eigen::Vector3d ray_C((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d dir_C = ray_C.normalized();
      const auto hit = castRay(scene, T_PW, o_W, R_WC * dir_C);
      if (!hit) continue;
      double depth = hit->t * dir_C.z();
      double intensity = hit->intensity;
      if (noisy && noise.depth) {
        const Eigen::Vector3d jr((x + K.sigma_xy * n01(*rng) - K.cx) / K.fx,
                                 (y + K.sigma_xy * n01(*rng) - K.cy) / K.fy, 1.0);
        const Eigen::Vector3d jd = jr.normalized();
        const auto jh = castRay(scene, T_PW, o_W, R_WC * jd);
        depth = jh ? jh->t * jd.z() : 0.0;
        if (depth > 0.0) depth += depth * depth / (K.fx * K.baseline) * K.sigma_z * n01(*rng);
        if (depth < 0.0) depth = 0.0;
      }
      if (noisy && noise.sigma_intensity > 0.0) intensity += noise.sigma_intensity * n01(*rng);
      f.depth(x, y) = static_cast<float>(depth);
      f.intensity(x, y) = static_cast<float>(std::clamp(intensity, 0.0, 1.0));
      f.instance(x, y) = static_cast<unsigned short>(hit->instance);
    }
  }
  return f;
}

std::vector<ImuMeasurement> synthesizeImu(const TrajectorySpec& cam, const Pose& T_SC,
                                          double rate_hz, double t0, double t1,
                                          const Eigen::Vector3d& g_W,
                                          const ImuSynthesisNoise& noise, std::mt19937_64* rng) {
  std::vector<ImuMeasurement> out;
  const Eigen::Matrix3d R_SC = T_SC.rotationMatrix();
  const Eigen::Vector3d t_CS = T_SC.inverse().translation();  // sensor origin in C
  const double dt = 1.0 / rate_hz;
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Vector3d b_g = Eigen::Vector3d::Zero(), b_a = Eigen::Vector3d::Zero();
  const bool noisy = noise.enabled && rng;
  for (long k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    if (t > t1 + 1e-12) break;
    const Pose T_WC = cam.pose(t);
    const Eigen::Matrix3d R_WC = T_WC.rotationMatrix();
    const Eigen::Vector3d w = cam.omegaBody(t);
    const Eigen::Vector3d w_dot = cam.omegaDotBody(t);
    const Eigen::Vector3d acc_S_W =
        cam.acceleration(t) + R_WC * (skew(w_dot) * t_CS + skew(w) * (skew(w) * t_CS));
    const Eigen::Matrix3d R_WS = R_WC * R_SC.transpose();
    ImuMeasurement m;
    m.timestamp_ns = std::llround(t * 1e9);
    m.gyro = R_SC * w;
    m.accel = R_WS.transpose() * (acc_S_W - g_W);
    if (noisy) {
      const auto& p = noise.params;
      Eigen::Vector3d ng(n01(*rng), n01(*rng), n01(*rng)), na(n01(*rng), n01(*rng), n01(*rng));
      m.gyro += b_g + p.sigma_g / std::sqrt(dt) * ng;
      m.accel += b_a + p.sigma_a / std::sqrt(dt) * na;
      Eigen::Vector3d wg(n01(*rng), n01(*rng), n01(*rng)), wa(n01(*rng), n01(*rng), n01(*rng));
      b_g += p.sigma_bg * std::sqrt(dt) * wg;
      b_a += p.sigma_ba * std::sqrt(dt) * wa;
    }
    out.push_back(m);
  }
  return out;
}

StateVector trueState(const TrajectorySpec& cam, const Pose& T_SC, double t) {
  StateVector x;
  const Pose T_WC = cam.pose(t);
  x.setPose(T_WC);
  const Eigen::Matrix3d R_WC = T_WC.rotationMatrix();
  const Eigen::Vector3d t_CS = T_SC.inverse().translation();
  const Eigen::Vector3d v_W = cam.velocity(t) + R_WC * cam.omegaBody(t).cross(t_CS);
  const Eigen::Matrix3d R_WS = R_WC * T_SC.rotationMatrix().transpose();
  x.v_S = R_WS.transpose() * v_W;
  return x;
}

}  // namespace dynvio::sim
