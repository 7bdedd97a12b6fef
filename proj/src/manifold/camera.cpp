// SPDX-License-Identifier: BSD-3-Clause
#include "dynvio/manifold/camera.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace dynvio {

bool CameraIntrinsics::isValid() const {
  return fx > 0.0 && fy > 0.0 && baseline > 0.0 && width > 0 && height > 0 && cx >= 0.0 &&
         cy >= 0.0 && cx <= width - 1 && cy <= height - 1 && sigma_xy >= 0.0 && sigma_z >= 0.0;
}

CameraIntrinsics CameraIntrinsics::downsampled() const {
  CameraIntrinsics k = *this;
  k.fx = 0.5 * fx;
  k.fy = 0.5 * fy;
  k.cx = 0.5 * (cx + 0.5) - 0.5;
  k.cy = 0.5 * (cy + 0.5) - 0.5;
  k.width = width / 2;
  k.height = height / 2;
  return k;
}

std::optional<Eigen::Vector2d> CameraIntrinsics::project(const Eigen::Vector3d& p) const {
  if (!(p.z() > 0.0)) return std::nullopt;
  return Eigen::Vector2d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

Eigen::Matrix<double, 2, 3> CameraIntrinsics::projectJacobian(const Eigen::Vector3d& p) const {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> J;
  J << fx * iz, 0.0, -fx * p.x() * iz * iz,
       0.0, fy * iz, -fy * p.y() * iz * iz;
  return J;
}

std::optional<Eigen::Vector3d> CameraIntrinsics::backproject(const Eigen::Vector2d& u,
                                                             double depth) const {
  if (!(depth > 0.0)) return std::nullopt;
  return Eigen::Vector3d((u.x() - cx) / fx * depth, (u.y() - cy) / fy * depth, depth);
}

namespace {

Eigen::Vector3d parseVec3(const std::string& s, const std::string& key) {
  std::istringstream is(s);
  Eigen::Vector3d v;
  if (!(is >> v.x() >> v.y() >> v.z())) {
    throw std::runtime_error("calibration: malformed vector for key '" + key + "'");
  }
  return v;
}

}  // namespace

Calibration readCalibration(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::runtime_error("calibration: " + std::string(e.what()));
  }
  Calibration c;
  try {
    auto& k = c.camera;
    k.fx = tree.get<double>("fx");
    k.fy = tree.get<double>("fy");
    k.cx = tree.get<double>("cx");
    k.cy = tree.get<double>("cy");
    k.width = tree.get<int>("width");
    k.height = tree.get<int>("height");
    k.baseline = tree.get<double>("baseline");
    k.sigma_xy = tree.get<double>("sigma_xy");
    k.sigma_z = tree.get<double>("sigma_z");
    const Eigen::Vector3d t = parseVec3(tree.get<std::string>("T_SC_t"), "T_SC_t");
    std::istringstream qs(tree.get<std::string>("T_SC_q"));
    double qx, qy, qz, qw;
    if (!(qs >> qx >> qy >> qz >> qw)) {
      throw std::runtime_error("calibration: malformed quaternion for key 'T_SC_q'");
    }
    c.T_SC = Pose(Quaternion(qw, qx, qy, qz), t);
  } catch (const pt::ptree_error& e) {
    throw std::runtime_error("calibration: " + std::string(e.what()));
  }
  if (!c.camera.isValid()) {
    throw std::runtime_error("calibration: invalid camera intrinsics in " + path);
  }
  return c;
}

void writeCalibration(const std::string& path, const Calibration& c) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write calibration file " + path);
  os << std::setprecision(17);
  const auto& k = c.camera;
  os << "fx = " << k.fx << "\nfy = " << k.fy << "\ncx = " << k.cx << "\ncy = " << k.cy
     << "\nwidth = " << k.width << "\nheight = " << k.height << "\nbaseline = " << k.baseline
     << "\nsigma_xy = " << k.sigma_xy << "\nsigma_z = " << k.sigma_z << "\n";
  const auto& t = c.T_SC.translation();
  const auto& q = c.T_SC.rotation();
  os << "T_SC_t = " << t.x() << ' ' << t.y() << ' ' << t.z() << "\n";
  os << "T_SC_q = " << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << "\n";
  if (!os) throw std::runtime_error("failed writing calibration file " + path);
}

}  // namespace dynvio
