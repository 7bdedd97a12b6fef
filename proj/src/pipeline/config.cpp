// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/pipeline/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace dynvio {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Key {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

double parseDouble(const std::string& name, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(d)) {
    throw std::runtime_error("config: " + name + ": expected a number, got '" + v + "'");
  }
  return d;
}

long long parseInt(const std::string& name, const std::string& v) {
  std::size_t used = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) {
    throw std::runtime_error("config: " + name + ": expected an integer, got '" + v + "'");
  }
  return i;
}

bool parseBool(const std::string& name, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config: " + name + ": expected a boolean, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check(bool ok, const std::string& name, const std::string& range) {
  if (!ok) throw std::runtime_error("config: " + name + " must be " + range);
}

class Registry {
 public:
  void real(const std::string& name, double& ref, double lo, double hi, bool lo_open = true,
            double scale = 1.0) {
    keys_[name] = {[&ref, name, lo, hi, lo_open, scale](const std::string& v) {
                     const double d = parseDouble(name, v);
                     check(lo_open ? d > lo : d >= lo, name,
                           (lo_open ? "> " : ">= ") + fmt(lo));
                     check(d <= hi, name, "<= " + fmt(hi));
                     ref = d * scale;
                   },
                   [&ref, scale] { return fmt(ref / scale); }};
    order_.push_back(name);
  }
  void real(const std::string& name, float& ref, double lo, double hi) {
    keys_[name] = {[&ref, name, lo, hi](const std::string& v) {
                     const double d = parseDouble(name, v);
                     check(d > lo && d <= hi, name, "in (" + fmt(lo) + ", " + fmt(hi) + "]");
                     ref = static_cast<float>(d);
                   },
                   [&ref] { return fmt(ref); }};
    order_.push_back(name);
  }
  void integer(const std::string& name, int& ref, long long lo, long long hi) {
    keys_[name] = {[&ref, name, lo, hi](const std::string& v) {
                     const long long i = parseInt(name, v);
                     check(i >= lo && i <= hi, name,
                           "in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
                     ref = static_cast<int>(i);
                   },
                   [&ref] { return std::to_string(ref); }};
    order_.push_back(name);
  }
  void u64(const std::string& name, std::uint64_t& ref) {
    keys_[name] = {[&ref, name](const std::string& v) {
                     std::size_t used = 0;
                     unsigned long long u = 0;
                     try {
                       if (!v.empty() && v[0] == '-') throw std::invalid_argument("");
                       u = std::stoull(v, &used);
                     } catch (const std::exception&) {
                       used = 0;
                     }
                     if (used == 0 || used != v.size()) {
                       throw std::runtime_error("config: " + name + ": expected a non-negative integer");
                     }
                     ref = u;
                   },
                   [&ref] { return std::to_string(ref); }};
    order_.push_back(name);
  }
  void boolean(const std::string& name, bool& ref) {
    keys_[name] = {[&ref, name](const std::string& v) { ref = parseBool(name, v); },
                   [&ref] { return std::string(ref ? "true" : "false"); }};
    order_.push_back(name);
  }

  void set(const std::string& name, const std::string& value) {
    const auto it = keys_.find(name);
    if (it == keys_.end()) throw std::runtime_error("config: unknown key '" + name + "'");
    it->second.set(value);
  }

  std::string format() const {
    std::ostringstream os;
    std::string section;
    for (const auto& name : order_) {
      const auto dot = name.find('.');
      const std::string s = name.substr(0, dot);
      if (s != section) {
        if (!section.empty()) os << '\n';
        os << '[' << s << "]\n";
        section = s;
      }
      os << name.substr(dot + 1) << " = " << keys_.at(name).get() << '\n';
    }
    return os.str();
  }

 private:
  std::map<std::string, Key> keys_;
  std::vector<std::string> order_;
};

void registerAll(Registry& r, SessionConfig& c) {
  r.u64("session.seed", c.seed);

  auto& t = c.tracking;
  r.integer("tracking.levels", t.levels, 1, 6);
  r.integer("tracking.max_iterations", t.max_iterations, 1, 100);
  r.real("tracking.tolerance", t.tolerance, 0.0, 1.0);
  r.real("tracking.sigma_photo", t.sigma_photo, 0.0, 1.0);
  r.real("tracking.c_photo", t.c_photo, 0.0, 10.0);
  r.real("tracking.c_icp", t.c_icp, 0.0, 10.0);
  r.real("tracking.c_inertial", t.c_inertial, 0.0, 100.0);
  r.real("tracking.icp_max_distance", t.gate.max_distance, 0.0, 1.0);
  r.real("tracking.icp_max_angle_deg", t.gate.max_angle, 0.0, 90.0, true, kDeg);
  r.real("tracking.w_max", t.w_max, 0.0, 1e12);
  r.integer("tracking.min_residuals", t.min_residuals, 1, 1000000);
  r.boolean("tracking.use_photometric", t.use_photometric);
  r.boolean("tracking.use_icp", t.use_icp);
  r.boolean("tracking.use_inertial", t.use_inertial);

  r.real("imu.sigma_g", c.imu.sigma_g, 0.0, 1.0);
  r.real("imu.sigma_a", c.imu.sigma_a, 0.0, 10.0);
  r.real("imu.sigma_bg", c.imu.sigma_bg, 0.0, 1.0);
  r.real("imu.sigma_ba", c.imu.sigma_ba, 0.0, 10.0);

  r.real("init.sigma_r", c.initial.r, 0.0, 10.0);
  r.real("init.sigma_tilt", c.initial.tilt, 0.0, M_PI);
  r.real("init.sigma_yaw", c.initial.yaw, 0.0, 10.0);
  r.real("init.sigma_v", c.initial.v, 0.0, 10.0);
  r.real("init.sigma_bg", c.initial.bg, 0.0, 1.0);
  r.real("init.sigma_ba", c.initial.ba, 0.0, 10.0);

  r.real("map.background_voxel", c.background.voxel_size, 0.0, 1.0);
  r.real("map.background_truncation", c.background.truncation, 0.0, 2.0);
  r.real("map.object_voxel", c.object.voxel_size, 0.0, 1.0);
  r.real("map.object_truncation", c.object.truncation, 0.0, 2.0);
  r.real("map.max_weight", c.background.max_weight, 0.0, 1e6);
  r.real("map.raycast_near", c.raycast.near, 0.0, 10.0);
  r.real("map.raycast_far", c.raycast.far, 0.0, 100.0);

  auto& o = c.objects;
  r.real("objects.iou_threshold", o.iou_threshold, 0.0, 1.0, false);
  r.integer("objects.min_valid_depth", o.min_valid_depth, 1, 10000000);
  r.real("objects.keyframe_angle_deg", o.keyframe_angle_deg, 0.0, 180.0, false);
  r.real("objects.motion_gate_sigma", o.motion_gate_sigma, 0.0, 100.0);
  r.real("objects.static_ratio", o.static_ratio, 0.0, 1.0, false);
  r.integer("objects.motion_min_pixels", o.motion_min_pixels, 1, 10000000);
  r.integer("objects.unknown_frames", o.unknown_frames, 0, 100000);
  r.integer("objects.person_class", o.person_class, -1, 1000000);
  r.real("objects.refine_gate_sigma", o.refine_gate_sigma, 0.0, 100.0);
  r.real("objects.sigma_photo", o.sigma_photo, 0.0, 1.0, false);
  r.integer("objects.reference_erosion", o.reference_erosion, 0, 50);
  r.integer("objects.young_duplicate_frames", c.young_duplicate_frames, 0, 100000);

  auto& l = c.reloc;
  r.real("reloc.min_size_ratio", l.min_size_ratio, 0.0, 1.0, false);
  r.integer("reloc.border_margin", l.border_margin, 0, 10000);
  r.integer("reloc.max_corners", l.features.max_corners, 1, 100000);
  r.integer("reloc.max_hamming", l.match.max_hamming, 0, 256);
  r.real("reloc.ratio_test", l.match.ratio, 0.0, 1.0);
  r.integer("reloc.min_matches", l.match.min_matches, 3, 100000);
  r.integer("reloc.ransac_iterations", l.pnp.iterations, 1, 1000000);
  r.real("reloc.inlier_px", l.pnp.inlier_px, 0.0, 100.0);
  r.integer("reloc.min_inliers", l.pnp.min_inliers, 3, 100000);
  r.real("reloc.max_mean_residual", l.max_mean_residual, 0.0, 1.0);
  r.real("reloc.min_valid_ratio", l.min_valid_ratio, 0.0, 1.0, false);
  r.integer("reloc.max_attempts_per_frame", l.max_attempts_per_frame, 0, 100000);
}

}  // namespace

SessionConfig parseConfig(const std::string& text) {
  SessionConfig c;
  Registry reg;
  registerAll(reg, c);
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::runtime_error("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw std::runtime_error("config: key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw std::runtime_error("config: nested key under " + section);
      reg.set(section + "." + key, value.data());
    }
  }
  check(c.raycast.far > c.raycast.near, "map.raycast_far", "> map.raycast_near");
  check(c.background.truncation >= c.background.voxel_size, "map.background_truncation",
        ">= map.background_voxel");
  check(c.object.truncation >= c.object.voxel_size, "map.object_truncation", ">= map.object_voxel");
  check(c.reloc.pnp.min_inliers <= c.reloc.match.min_matches, "reloc.min_inliers",
        "<= reloc.min_matches");
  c.object.max_weight = c.background.max_weight;
  return c;
}

SessionConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parseConfig(ss.str());
}

std::string formatConfig(const SessionConfig& config) {
  SessionConfig copy = config;
  Registry reg;
  registerAll(reg, copy);
  return reg.format();
}

}  // namespace dynvio
