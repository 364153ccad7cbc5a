#include "depthtransfer/viewsynth.hpp"

#include <algorithm>
#include <cmath>

#include "depthtransfer/imagecore.hpp"

namespace dt {

double depth_percentile(const DepthMap& depth, double q) {
  std::vector<double> v;
  v.reserve(depth.valid_count());
  for (std::size_t i = 0; i < depth.depth.pixel_count(); ++i) {
    if (depth.valid[i]) v.push_back(depth.depth[i]);
  }
  if (v.empty()) throw Error("depth_percentile: no valid depth");
  std::sort(v.begin(), v.end());
  const double pos = clamp_value(q, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

DisparityMap depth_to_disparity(const DepthMap& depth, const StereoParams& sp) {
  if (sp.max_disparity < 0.0) throw Error("depth_to_disparity: max disparity must be >= 0");
  DisparityMap out(depth.width(), depth.height());
  if (depth.valid_count() == 0) return out;
  const double near = depth_percentile(depth, 1.0);
  const double far = depth_percentile(depth, 99.0);
  if (!(far - near > 1e-12 * std::max(1.0, far))) return out;
  const double inv_near = 1.0 / near;
  const double inv_far = 1.0 / far;
  auto mapped = [&](double d) {
    const double c = clamp_value(d, near, far);
    return sp.max_disparity * (1.0 / c - inv_far) / (inv_near - inv_far);
  };
  const double zero = mapped(depth_percentile(depth, sp.convergence_percentile));
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    out[i] = depth.valid[i] ? clamp_value(mapped(depth.depth[i]) - zero, -sp.max_disparity, sp.max_disparity) : 0.0;
  }
  return out;
}

RenderedView render_view(const ImageRGB& image, const DisparityMap& disparity) {
  if (!image.same_shape(disparity)) throw Error("render_view: image and disparity sizes differ");
  const int w = image.width();
  const int h = image.height();
  RenderedView out{ImageRGB(w, h), Mask(w, h)};
  Mask filled(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<int> src(static_cast<std::size_t>(w), -1);
    for (int x = 0; x < w; ++x) {
      const long tx = x - std::lround(disparity(x, y));
      if (tx < 0 || tx >= w) continue;
      int& s = src[static_cast<std::size_t>(tx)];
      if (s < 0 || disparity(x, y) > disparity(s, y)) s = x;
    }
    for (int x = 0; x < w; ++x) {
      const int s = src[static_cast<std::size_t>(x)];
      if (s < 0) continue;
      for (int c = 0; c < 3; ++c) out.image(x, y, c) = image(s, y, c);
    }
    // Hole runs take the neighbour with the smaller disparity (background).
    for (int x = 0; x < w;) {
      if (src[static_cast<std::size_t>(x)] >= 0) {
        ++x;
        continue;
      }
      int end = x;
      while (end < w && src[static_cast<std::size_t>(end)] < 0) ++end;
      const int left = x > 0 ? src[static_cast<std::size_t>(x - 1)] : -1;
      const int right = end < w ? src[static_cast<std::size_t>(end)] : -1;
      int from = -1;
      if (left >= 0 && right >= 0) {
        from = disparity(left, y) <= disparity(right, y) ? x - 1 : end;
      } else if (left >= 0) {
        from = x - 1;
      } else if (right >= 0) {
        from = end;
      }
      for (int k = x; k < end; ++k) {
        if (from >= 0) {
          for (int c = 0; c < 3; ++c) out.image(k, y, c) = out.image(from, y, c);
        }
        filled(k, y) = 1;
        if (left >= 0 && right >= 0) out.holes(k, y) = 1;
      }
      x = end;
    }
  });
  const ImageRGB before = out.image;
  std::vector<double> window;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!filled(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        window.clear();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (before.contains(x + dx, y + dy)) window.push_back(before(x + dx, y + dy, c));
          }
        }
        const std::size_t k = (window.size() - 1) / 2;
        std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(k), window.end());
        out.image(x, y, c) = window[k];
      }
    }
  }
  return out;
}

ImageRGB compose_anaglyph(const ImageRGB& left, const ImageRGB& right) {
  if (!left.same_shape(right)) throw Error("compose_anaglyph: view sizes differ");
  ImageRGB out = right;
  for (int y = 0; y < left.height(); ++y) {
    for (int x = 0; x < left.width(); ++x) out(x, y, 0) = left(x, y, 0);
  }
  return out;
}

ImageRGB compose_side_by_side(const ImageRGB& left, const ImageRGB& right) {
  if (!left.same_shape(right)) throw Error("compose_side_by_side: view sizes differ");
  const int w = left.width();
  ImageRGB out(2 * w, left.height());
  for (int y = 0; y < left.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out(x, y, c) = left(x, y, c);
        out(x + w, y, c) = right(x, y, c);
      }
    }
  }
  return out;
}

std::vector<DisparityMap> temporal_filter_disparity(const std::vector<DisparityMap>& d,
                                                    const std::vector<FlowField>& flows,
                                                    const std::vector<Plane>& confidence) {
  const std::size_t n = d.size();
  if (n <= 1) return d;
  if (flows.size() != n - 1 || confidence.size() != n - 1) {
    throw Error("temporal_filter_disparity: expected frames - 1 flows and confidences");
  }
  std::vector<DisparityMap> out(n);
  parallel_for(n, [&](std::size_t t) {
    const int w = d[t].width();
    const int h = d[t].height();
    out[t] = DisparityMap(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sum = 0.5 * d[t](x, y);
        double wsum = 0.5;
        if (t + 1 < n && flows[t].valid(x, y)) {
          const auto v = sample_bilinear(d[t + 1], x + flows[t].u(x, y), y + flows[t].v(x, y));
          if (v) {
            const double g = 0.25 * confidence[t](x, y);
            sum += g * *v;
            wsum += g;
          }
        }
        if (t > 0) {
          // The previous frame is reached by stepping back along its forward
          // flow sampled at this pixel.
          const FlowField& f = flows[t - 1];
          const auto v = sample_bilinear(d[t - 1], x - f.u(x, y), y - f.v(x, y));
          if (v) {
            const double g = 0.25 * confidence[t - 1](x, y);
            sum += g * *v;
            wsum += g;
          }
        }
        out[t](x, y) = sum / wsum;
      }
    }
  });
  return out;
}

}  // namespace dt
