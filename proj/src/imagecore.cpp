#include "depthtransfer/imagecore.hpp"

#include <array>
#include <cmath>
#include <numeric>

namespace dt {

namespace {

struct Tap {
  int index;
  double weight;
};

// Bilinear taps when upsampling, box-area taps when shrinking.
std::vector<std::vector<Tap>> resample_taps(int src, int dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int o = 0; o < dst; ++o) {
    auto& t = taps[o];
    if (scale <= 1.0) {
      const double s = clamp_value((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const double f = s - i0;
      t.push_back({i0, 1.0 - f});
      if (f > 0.0 && i0 + 1 < src) t.push_back({i0 + 1, f});
    } else {
      const double a = o * scale;
      const double b = (o + 1) * scale;
      for (int i = static_cast<int>(std::floor(a)); i < static_cast<int>(std::ceil(b)) && i < src; ++i) {
        const double w = std::min(b, i + 1.0) - std::max(a, static_cast<double>(i));
        if (w > 1e-12) t.push_back({i, w / scale});
      }
    }
  }
  return taps;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

GrayImage to_grayscale(const ImageRGB& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    out[i] = 0.299 * img[3 * i] + (0.587 * img[3 * i + 1] + 0.114 * img[3 * i + 2]);
  }
  return out;
}

Gradients gradients(const Raster<double>& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 2 || h < 2) throw Error("gradients require at least 2x2 pixels");
  const int nc = img.channels();
  Gradients g{Plane(w, h, nc), Plane(w, h, nc)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        if (x + 1 < w) g.gx(x, y, c) = img(x + 1, y, c) - img(x, y, c);
        if (y + 1 < h) g.gy(x, y, c) = img(x, y + 1, c) - img(x, y, c);
      }
    }
  }
  return g;
}

std::optional<double> sample_bilinear(const Raster<double>& img, double x, double y, int c) {
  constexpr double kSlack = 1e-9;
  const int w = img.width();
  const int h = img.height();
  if (!(x >= -kSlack && y >= -kSlack && x <= w - 1 + kSlack && y <= h - 1 + kSlack)) {
    return std::nullopt;
  }
  x = clamp_value(x, 0.0, static_cast<double>(w - 1));
  y = clamp_value(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img(x0, y0, c) + fx * img(x1, y0, c);
  const double bottom = (1.0 - fx) * img(x0, y1, c) + fx * img(x1, y1, c);
  return (1.0 - fy) * top + fy * bottom;
}

Warped<Raster<double>> warp_bilinear(const Raster<double>& img, const Homography& h) {
  const Homography inv = h.inverse();
  const int w = img.width();
  const int ht = img.height();
  const int nc = img.channels();
  Warped<Raster<double>> out{Raster<double>(w, ht, nc), Mask(w, ht, 1, 0)};
  parallel_for(static_cast<std::size_t>(ht), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      bool covered = true;
      for (int c = 0; c < nc && covered; ++c) {
        const auto v = sample_bilinear(img, sx, sy, c);
        if (!v) {
          covered = false;
        } else {
          out.image(x, y, c) = *v;
        }
      }
      out.coverage(x, y) = covered ? 1 : 0;
    }
  });
  return out;
}

GrayImage histogram_match(const GrayImage& src, const GrayImage& reference) {
  if (src.empty() || reference.empty()) throw Error("histogram_match requires non-empty images");
  auto bin_of = [](double v) {
    return clamp_value(static_cast<int>(std::lround(v * 255.0)), 0, 255);
  };
  std::array<double, 256> hs{}, hr{};
  for (double v : src.values()) hs[bin_of(v)] += 1.0;
  for (double v : reference.values()) hr[bin_of(v)] += 1.0;
  const double ns = static_cast<double>(src.pixel_count());
  const double nr = static_cast<double>(reference.pixel_count());
  std::array<double, 256> cdf_ref{};
  double acc = 0.0;
  for (int b = 0; b < 256; ++b) {
    acc += hr[b] / nr;
    cdf_ref[b] = acc;
  }
  cdf_ref[255] = 1.0;

  std::array<double, 256> lut{};
  acc = 0.0;
  for (int b = 0; b < 256; ++b) {
    const double p = hs[b] / ns;
    const double mid = acc + 0.5 * p;
    acc += p;
    int r = 0;
    while (r < 255 && cdf_ref[r] < mid - 1e-12) ++r;
    lut[b] = r / 255.0;
  }
  GrayImage out(src.width(), src.height());
  for (std::size_t i = 0; i < src.pixel_count(); ++i) out[i] = lut[bin_of(src[i])];
  return out;
}

Raster<double> resize_bilinear(const Raster<double>& img, int width, int height) {
  if (width <= 0 || height <= 0) throw Error("resize target must be positive");
  if (width == img.width() && height == img.height()) return img;
  const auto tx = resample_taps(img.width(), width);
  const auto ty = resample_taps(img.height(), height);
  const int nc = img.channels();
  Raster<double> horiz(width, img.height(), nc);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (const auto& t : tx[x]) s += t.weight * img(t.index, y, c);
        horiz(x, y, c) = s;
      }
    }
  }
  Raster<double> out(width, height, nc);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (const auto& t : ty[y]) s += t.weight * horiz(x, t.index, c);
        out(x, y, c) = s;
      }
    }
  }
  return out;
}

Raster<double> gaussian_blur(const Raster<double>& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width();
  const int h = img.height();
  const int nc = img.channels();
  Raster<double> tmp(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * img(clamp_value(x + i, 0, w - 1), y, c);
        tmp(x, y, c) = s;
      }
    }
  }
  Raster<double> out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp(x, clamp_value(y + i, 0, h - 1), c);
        out(x, y, c) = s;
      }
    }
  }
  return out;
}

int max_pyramid_levels(int width, int height, int max_levels, double factor, int min_size) {
  int levels = 1;
  double w = width;
  double h = height;
  while (levels < max_levels) {
    w = std::round(w * factor);
    h = std::round(h * factor);
    if (w < min_size || h < min_size) break;
    ++levels;
  }
  return levels;
}

std::vector<Raster<double>> build_pyramid(const Raster<double>& img, int levels, double factor) {
  if (levels < 1) throw Error("pyramid needs at least one level");
  if (!(factor > 0.0 && factor < 1.0)) throw Error("pyramid factor must lie in (0,1)");
  if (img.width() < 8 || img.height() < 8) throw Error("pyramid input below 8x8");
  if (max_pyramid_levels(img.width(), img.height(), levels, factor) < levels) {
    throw Error("requested pyramid would shrink below 8x8");
  }
  std::vector<Raster<double>> pyr;
  pyr.reserve(levels);
  pyr.push_back(img);
  const double sigma = 1.0 / factor - 1.0;
  for (int k = 1; k < levels; ++k) {
    const auto& prev = pyr.back();
    const int w = static_cast<int>(std::round(prev.width() * factor));
    const int h = static_cast<int>(std::round(prev.height() * factor));
    pyr.push_back(resize_bilinear(gaussian_blur(prev, sigma), w, h));
  }
  return pyr;
}

DepthMap resize_depth(const DepthMap& depth, int width, int height) {
  if (width == depth.width() && height == depth.height()) return depth;
  const auto tx = resample_taps(depth.width(), width);
  const auto ty = resample_taps(depth.height(), height);
  DepthMap out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      double wv = 0.0;
      double wt = 0.0;
      for (const auto& a : ty[y]) {
        for (const auto& b : tx[x]) {
          const double w = a.weight * b.weight;
          wt += w;
          if (depth.valid(b.index, a.index)) {
            s += w * depth.depth(b.index, a.index);
            wv += w;
          }
        }
      }
      if (wv > 0.5 * wt && wv > 0.0) {
        out.depth(x, y) = s / wv;
        out.valid(x, y) = 1;
      }
    }
  }
  return out;
}

Raster<double> channel(const Raster<double>& img, int c) {
  Raster<double> out(img.width(), img.height(), 1);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    out[i] = img[i * img.channels() + c];
  }
  return out;
}

double mean_value(const Raster<double>& img) {
  if (img.empty()) return 0.0;
  return std::accumulate(img.values().begin(), img.values().end(), 0.0) /
         static_cast<double>(img.values().size());
}

}  // namespace dt
