#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "depthtransfer/common.hpp"

namespace dt {

// Row-major interleaved raster with an arbitrary number of channels.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw Error("raster dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.channels_ == b.channels_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using Plane = Raster<double>;
using Mask = Raster<std::uint8_t>;

// RGB image with channel values in [0,1].
class ImageRGB : public Raster<double> {
 public:
  ImageRGB() = default;
  ImageRGB(int width, int height, double fill = 0.0) : Raster<double>(width, height, 3, fill) {}
  explicit ImageRGB(Raster<double> raster) : Raster<double>(std::move(raster)) {
    if (channels() != 3) throw Error("ImageRGB requires exactly 3 channels");
  }
};

// Single-channel luminance image in [0,1].
class GrayImage : public Raster<double> {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0) : Raster<double>(width, height, 1, fill) {}
  explicit GrayImage(Raster<double> raster) : Raster<double>(std::move(raster)) {
    if (channels() != 1) throw Error("GrayImage requires exactly 1 channel");
  }
};

// Per-pixel metric depth plus an explicit validity mask. Invalid pixels keep
// whatever value sits in `depth`; readers must consult `valid`.
struct DepthMap {
  Plane depth;
  Mask valid;

  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0)
      : depth(width, height, 1, fill), valid(width, height, 1, fill > 0.0 ? 1 : 0) {}

  // Every strictly positive finite value becomes a valid sample.
  static DepthMap from_plane(Plane values);

  int width() const noexcept { return depth.width(); }
  int height() const noexcept { return depth.height(); }
  bool is_valid(int x, int y) const noexcept { return valid(x, y) != 0; }
  std::size_t valid_count() const noexcept;
  // Throws if a valid pixel is non-positive or non-finite.
  void check() const;
};

// 3x3 projective transform, stored row-major and normalized so h[8] == 1.
class Homography {
 public:
  Homography() : h_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
  explicit Homography(const std::array<double, 9>& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);

  double operator()(int r, int c) const noexcept { return h_[r * 3 + c]; }
  const std::array<double, 9>& matrix() const noexcept { return h_; }

  std::pair<double, double> apply(double x, double y) const noexcept;
  Homography inverse() const;
  Homography compose(const Homography& rhs) const;  // this * rhs
  double max_abs_difference(const Homography& other) const noexcept;

 private:
  std::array<double, 9> h_;
};

}  // namespace dt
