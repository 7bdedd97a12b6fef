// SPDX-License-Identifier: BSD-3-Clause
#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace dynvio {

/// Dense row-major image. Pixel (x, y) is column x, row y.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, const T& fill = T())
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) {
    assert(inside(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(inside(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && data_ == o.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageU8 = Image<unsigned char>;
using ImageU16 = Image<unsigned short>;
using Mask = Image<unsigned char>;
using VertexMap = Image<Eigen::Vector3f>;

/// Bilinear lookup at sub-pixel position (pixel centres at integer coordinates).
/// Returns nullopt when any of the four taps falls outside the image.
inline std::optional<float> bilinear(const ImageF& img, double u, double v) {
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  if (x0 < 0 || y0 < 0 || x0 + 1 >= img.width() || y0 + 1 >= img.height()) {
    return std::nullopt;
  }
  const double ax = u - x0;
  const double ay = v - y0;
  const double top = (1.0 - ax) * img(x0, y0) + ax * img(x0 + 1, y0);
  const double bot = (1.0 - ax) * img(x0, y0 + 1) + ax * img(x0 + 1, y0 + 1);
  return static_cast<float>((1.0 - ay) * top + ay * bot);
}

/// Bilinear value together with its analytic gradient (d/du, d/dv) of the
/// interpolant, evaluated inside the same cell.
struct BilinearSample {
  double value;
  Eigen::Vector2d gradient;
};

inline std::optional<BilinearSample> bilinearWithGradient(const ImageF& img, double u, double v) {
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  if (x0 < 0 || y0 < 0 || x0 + 1 >= img.width() || y0 + 1 >= img.height()) {
    return std::nullopt;
  }
  const double ax = u - x0;
  const double ay = v - y0;
  const double i00 = img(x0, y0), i10 = img(x0 + 1, y0);
  const double i01 = img(x0, y0 + 1), i11 = img(x0 + 1, y0 + 1);
  const double top = (1.0 - ax) * i00 + ax * i10;
  const double bot = (1.0 - ax) * i01 + ax * i11;
  BilinearSample s;
  s.value = (1.0 - ay) * top + ay * bot;
  s.gradient.x() = (1.0 - ay) * (i10 - i00) + ay * (i11 - i01);
  s.gradient.y() = bot - top;
  return s;
}

}  // namespace dynvio
