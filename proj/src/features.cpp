#include "depthtransfer/features.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "depthtransfer/imagecore.hpp"

namespace dt {

namespace {

constexpr int kGistSide = 128;
constexpr int kGistPad = 32;
constexpr int kGistFft = kGistSide + 2 * kGistPad;
constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread safe.
std::mutex g_fftw_mutex;

double gabor_peak_frequency(int scale) { return 0.3 / std::pow(1.85, scale); }

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

int mirror_index(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

class Fft2d {
 public:
  explicit Fft2d(int n) : n_(n) {
    std::lock_guard lock(g_fftw_mutex);
    buf_ = fftw_alloc_complex(static_cast<std::size_t>(n) * n);
    forward_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_2d(n, n, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft2d() {
    std::lock_guard lock(g_fftw_mutex);
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buf_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_); }
  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

 private:
  int n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace

double gabor_response(int scale, int orientation, double fx, double fy) {
  const double fr = std::hypot(fx, fy);
  const double theta = kPi * orientation / kGistOrientations;
  const double tr = wrap_angle(std::atan2(fy, fx) - theta);
  const double radial = fr / gabor_peak_frequency(scale) - 1.0;
  const double angular_width = 16.0 * kGistOrientations * kGistOrientations / (32.0 * 32.0);
  return std::exp(-10.0 * 0.35 * radial * radial - 2.0 * angular_width * kPi * tr * tr);
}

GistDescriptor compute_gist(const GrayImage& img) {
  if (img.width() < 32 || img.height() < 32) throw Error("compute_gist: image smaller than 32x32");
  const Plane small = resize_bilinear(img, kGistSide, kGistSide);
  const double mean = mean_value(small);

  Fft2d fft(kGistFft);
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(kGistFft) * kGistFft);
  {
    auto* d = fft.data();
    for (int y = 0; y < kGistFft; ++y) {
      for (int x = 0; x < kGistFft; ++x) {
        const int sx = mirror_index(x - kGistPad, kGistSide);
        const int sy = mirror_index(y - kGistPad, kGistSide);
        d[y * kGistFft + x] = small(sx, sy) - mean;
      }
    }
    fft.forward();
    std::copy(d, d + spectrum.size(), spectrum.begin());
  }

  GistDescriptor g;
  constexpr int block = kGistSide / kGistBlocks;
  const double norm = 1.0 / (static_cast<double>(kGistFft) * kGistFft);
  for (int s = 0; s < kGistScales; ++s) {
    for (int o = 0; o < kGistOrientations; ++o) {
      auto* d = fft.data();
      for (int ky = 0; ky < kGistFft; ++ky) {
        const double fy = static_cast<double>(ky < kGistFft / 2 ? ky : ky - kGistFft) / kGistFft;
        for (int kx = 0; kx < kGistFft; ++kx) {
          const double fx = static_cast<double>(kx < kGistFft / 2 ? kx : kx - kGistFft) / kGistFft;
          const std::size_t i = static_cast<std::size_t>(ky) * kGistFft + kx;
          d[i] = spectrum[i] * gabor_response(s, o, fx, fy);
        }
      }
      fft.backward();
      const int filter = s * kGistOrientations + o;
      for (int by = 0; by < kGistBlocks; ++by) {
        for (int bx = 0; bx < kGistBlocks; ++bx) {
          double acc = 0.0;
          for (int y = 0; y < block; ++y) {
            for (int x = 0; x < block; ++x) {
              const int px = kGistPad + bx * block + x;
              const int py = kGistPad + by * block + y;
              acc += std::abs(d[py * kGistFft + px]) * norm;
            }
          }
          g.values[filter * kGistBlocks * kGistBlocks + by * kGistBlocks + bx] = acc / (block * block);
        }
      }
    }
  }
  double n2 = 0.0;
  for (double v : g.values) n2 += v * v;
  const double n = std::sqrt(n2);
  // A flat input leaves only rounding noise in the band-pass responses.
  if (n < 1e-9) {
    g.values.fill(0.0);
  } else {
    for (auto& v : g.values) v /= n;
  }
  return g;
}

GistDescriptor compute_gist(const ImageRGB& img) { return compute_gist(to_grayscale(img)); }

DescriptorGrid compute_dense_sift(const GrayImage& img, int cell) {
  const int w = img.width();
  const int h = img.height();
  if (cell < 1) throw Error("compute_dense_sift: cell must be positive");
  if (w < 4 * cell || h < 4 * cell) throw Error("compute_dense_sift: image too small for the cell size");

  // Orientation planes with bilinear voting between adjacent bins, zero-padded
  // by two cells on every side.
  const int pad = 2 * cell;
  const int pw = w + 2 * pad;
  const int ph = h + 2 * pad;
  std::vector<double> orient(static_cast<std::size_t>(8) * pw * ph, 0.0);
  auto oidx = [&](int k, int x, int y) { return (static_cast<std::size_t>(k) * ph + y) * pw + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (img(std::min(x + 1, w - 1), y) - img(std::max(x - 1, 0), y));
      const double gy = 0.5 * (img(x, std::min(y + 1, h - 1)) - img(x, std::max(y - 1, 0)));
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += 2.0 * kPi;
      const double f = angle / (2.0 * kPi) * 8.0;
      const int k0 = static_cast<int>(std::floor(f)) % 8;
      const int k1 = (k0 + 1) % 8;
      const double w1 = f - std::floor(f);
      orient[oidx(k0, x + pad, y + pad)] += mag * (1.0 - w1);
      orient[oidx(k1, x + pad, y + pad)] += mag * w1;
    }
  }
  // Cell sums anchored at the top-left corner, accumulated in a fixed
  // relative order so translated content produces bit-identical sums.
  std::vector<double> rows(orient.size(), 0.0), cells(orient.size(), 0.0);
  for (int k = 0; k < 8; ++k) {
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x + cell <= pw; ++x) {
        double s = 0.0;
        for (int i = 0; i < cell; ++i) s += orient[oidx(k, x + i, y)];
        rows[oidx(k, x, y)] = s;
      }
    }
    for (int y = 0; y + cell <= ph; ++y) {
      for (int x = 0; x < pw; ++x) {
        double s = 0.0;
        for (int j = 0; j < cell; ++j) s += rows[oidx(k, x, y + j)];
        cells[oidx(k, x, y)] = s;
      }
    }
  }

  DescriptorGrid grid(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::array<double, kSiftLength> d{};
    for (int x = 0; x < w; ++x) {
      for (int cy = 0; cy < 4; ++cy) {
        for (int cx = 0; cx < 4; ++cx) {
          const int ax = x + (cx - 2) * cell + pad;
          const int ay = y + (cy - 2) * cell + pad;
          for (int k = 0; k < 8; ++k) d[(cy * 4 + cx) * 8 + k] = cells[oidx(k, ax, ay)];
        }
      }
      auto normalize = [&d] {
        double n2 = 0.0;
        for (double v : d) n2 += v * v;
        if (n2 <= 1e-24) return false;
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& v : d) v *= inv;
        return true;
      };
      auto out = grid.descriptor(x, y);
      if (!normalize()) {
        std::fill(out.begin(), out.end(), 0);
        continue;
      }
      for (auto& v : d) v = std::min(v, DescriptorGrid::kMaxComponent);
      normalize();
      for (int k = 0; k < kSiftLength; ++k) {
        const double q = std::floor(std::min(d[k], DescriptorGrid::kMaxComponent) / DescriptorGrid::kStep + 1e-7);
        out[k] = static_cast<std::uint8_t>(clamp_value(q, 0.0, 255.0));
      }
    }
  });
  return grid;
}

DescriptorGrid compute_dense_sift(const ImageRGB& img, int cell) {
  return compute_dense_sift(to_grayscale(img), cell);
}

FlowHistogram compute_flow_histogram(const FlowField& flow) {
  FlowHistogram hist;
  double total = 0.0;
  for (std::size_t i = 0; i < flow.u.pixel_count(); ++i) {
    if (!flow.valid[i]) continue;
    const double u = flow.u[i];
    const double v = flow.v[i];
    double angle = std::atan2(v, u);
    if (angle < 0.0) angle += 2.0 * kPi;
    const int octant = std::min(7, static_cast<int>(angle / (kPi / 4.0)));
    const int large = std::hypot(u, v) >= 1.0 ? 1 : 0;
    hist.bins[2 * octant + large] += 1.0;
    total += 1.0;
  }
  if (total > 0.0) {
    for (auto& b : hist.bins) b /= total;
  }
  return hist;
}

double match_distance(const FeatureSet& a, const FeatureSet& b, double flow_weight) {
  double d = 0.0;
  for (int i = 0; i < kGistLength; ++i) {
    const double diff = a.gist.values[i] - b.gist.values[i];
    d += diff * diff;
  }
  if (a.flow && b.flow) {
    double f = 0.0;
    for (int i = 0; i < kFlowBins; ++i) {
      const double diff = a.flow->bins[i] - b.flow->bins[i];
      f += diff * diff;
    }
    d += flow_weight * f;
  }
  return d;
}

}  // namespace dt
