#include "depthtransfer/raster.hpp"

#include <cmath>

namespace dt {

DepthMap DepthMap::from_plane(Plane values) {
  if (values.channels() != 1) throw Error("depth plane must have one channel");
  DepthMap d;
  d.valid = Mask(values.width(), values.height(), 1, 0);
  for (std::size_t i = 0; i < values.pixel_count(); ++i) {
    const double v = values[i];
    d.valid[i] = (std::isfinite(v) && v > 0.0) ? 1 : 0;
  }
  d.depth = std::move(values);
  return d;
}

std::size_t DepthMap::valid_count() const noexcept {
  std::size_t n = 0;
  for (auto v : valid.values()) n += v != 0;
  return n;
}

void DepthMap::check() const {
  if (!depth.same_shape(valid)) throw Error("depth and validity mask differ in shape");
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    if (valid[i] && !(std::isfinite(depth[i]) && depth[i] > 0.0)) {
      throw Error("valid depth sample is not strictly positive");
    }
  }
}

Homography::Homography(const std::array<double, 9>& m) : h_(m) {
  const double s = h_[8];
  if (!std::isfinite(s) || std::abs(s) < 1e-12) {
    throw Error("homography bottom-right entry must be non-zero");
  }
  for (auto& v : h_) v /= s;
}

Homography Homography::translation(double tx, double ty) {
  return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
}

std::pair<double, double> Homography::apply(double x, double y) const noexcept {
  const double w = h_[6] * x + h_[7] * y + h_[8];
  return {(h_[0] * x + h_[1] * y + h_[2]) / w, (h_[3] * x + h_[4] * y + h_[5]) / w};
}

Homography Homography::inverse() const {
  const auto& a = h_;
  const double c00 = a[4] * a[8] - a[5] * a[7];
  const double c01 = a[5] * a[6] - a[3] * a[8];
  const double c02 = a[3] * a[7] - a[4] * a[6];
  const double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale * scale * scale) {
    throw Error("homography is singular");
  }
  std::array<double, 9> inv{
      c00,
      a[2] * a[7] - a[1] * a[8],
      a[1] * a[5] - a[2] * a[4],
      c01,
      a[0] * a[8] - a[2] * a[6],
      a[2] * a[3] - a[0] * a[5],
      c02,
      a[1] * a[6] - a[0] * a[7],
      a[0] * a[4] - a[1] * a[3],
  };
  for (auto& v : inv) v /= det;
  return Homography(inv);
}

Homography Homography::compose(const Homography& rhs) const {
  std::array<double, 9> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += h_[r * 3 + k] * rhs.h_[k * 3 + c];
      m[r * 3 + c] = s;
    }
  }
  return Homography(m);
}

double Homography::max_abs_difference(const Homography& other) const noexcept {
  double d = 0.0;
  for (int i = 0; i < 9; ++i) d = std::max(d, std::abs(h_[i] - other.h_[i]));
  return d;
}

}  // namespace dt
