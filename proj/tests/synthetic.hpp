#pragma once

// Procedural scenes and textures shared by the unit and acceptance tests.
// Everything is a closed-form function of continuous coordinates, so shifted
// or warped copies are exact rather than resampled.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "depthtransfer/io.hpp"
#include "depthtransfer/raster.hpp"

namespace dt::test {

// Sum of random oriented sinusoids: smooth, non-periodic over test-sized
// images, with texture at every orientation.
class Texture {
 public:
  Texture(std::uint32_t seed, double wavelength = 8.0, int terms = 12, double amplitude = 0.25, double mean = 0.5)
      : mean_(mean) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> scale(0.6, 1.8);
    for (int i = 0; i < terms; ++i) {
      const double th = angle(rng);
      const double k = 2.0 * std::numbers::pi / (wavelength * scale(rng));
      waves_.push_back({k * std::cos(th), k * std::sin(th), angle(rng), amplitude / std::sqrt(terms / 2.0)});
    }
  }

  double operator()(double x, double y) const {
    double v = mean_;
    for (const auto& w : waves_) v += w.a * std::sin(w.kx * x + w.ky * y + w.phase);
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  struct Wave {
    double kx, ky, phase, a;
  };
  double mean_;
  std::vector<Wave> waves_;
};

// Gray image sampled from a texture at (x + dx, y + dy).
inline GrayImage render_texture(const Texture& t, int w, int h, double dx = 0.0, double dy = 0.0) {
  GrayImage g(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) g(x, y) = t(x + dx, y + dy);
  }
  return g;
}

inline ImageRGB gray_to_rgb(const GrayImage& g) {
  ImageRGB out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      for (int c = 0; c < 3; ++c) out(x, y, c) = g(x, y);
    }
  }
  return out;
}

struct Box {
  double depth;   // metres
  double center;  // fraction of the width
  double width;   // metres
  double height;  // metres
  double tint[3];
};

struct SceneSpec {
  int width = 64;
  int height = 48;
  double horizon = 0.35;    // fraction of the height
  double wall = 7.0;        // metres
  double camera_height = 1.5;
  double focal = 48.0;      // pixels
  double wall_tint[3] = {0.8, 0.75, 0.6};
  double floor_tint[3] = {0.45, 0.35, 0.3};
  std::uint32_t texture_seed = 1;
  std::vector<Box> boxes;
};

struct Scene {
  ImageRGB image;
  DepthMap depth;
};

// Random room: a textured floor receding to a back wall, plus boxes standing
// on the floor.
inline SceneSpec random_scene(std::uint32_t seed, int width = 64, int height = 48) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SceneSpec s;
  s.width = width;
  s.height = height;
  s.focal = 0.75 * width;
  s.horizon = 0.25 + 0.2 * u(rng);
  s.wall = 4.0 + 5.0 * u(rng);
  s.camera_height = 1.2 + 0.6 * u(rng);
  for (double& c : s.wall_tint) c = 0.4 + 0.5 * u(rng);
  for (double& c : s.floor_tint) c = 0.2 + 0.4 * u(rng);
  s.texture_seed = seed * 7919u + 17u;
  const int boxes = static_cast<int>(u(rng) * 3.0);
  for (int i = 0; i < boxes; ++i) {
    Box b;
    b.depth = 2.0 + (s.wall - 2.5) * u(rng);
    b.center = 0.15 + 0.7 * u(rng);
    b.width = 0.6 + 0.8 * u(rng);
    b.height = 0.5 + 1.0 * u(rng);
    for (double& c : b.tint) c = 0.1 + 0.8 * u(rng);
    s.boxes.push_back(b);
  }
  return s;
}

// Depth of the empty room (floor capped by the wall) at a pixel row.
inline double room_depth(const SceneSpec& s, double y) {
  const double yh = s.horizon * s.height;
  if (y <= yh) return s.wall;
  return std::min(s.wall, s.focal * s.camera_height / (y - yh));
}

inline Scene render_scene(const SceneSpec& s, double shift_x = 0.0) {
  Scene out{ImageRGB(s.width, s.height), DepthMap(s.width, s.height, 1.0)};
  const Texture wall_tex(s.texture_seed, 6.0);
  const Texture floor_tex(s.texture_seed + 1, 4.0);
  const Texture box_tex(s.texture_seed + 2, 3.0);
  const double yh = s.horizon * s.height;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double fx = x + shift_x;
      double z = room_depth(s, y);
      const bool floor = z < s.wall;
      const double* tint = floor ? s.floor_tint : s.wall_tint;
      double shade = floor ? floor_tex(fx * z / s.focal * 8.0, z * 4.0) : wall_tex(fx, y);
      for (const auto& b : s.boxes) {
        const double bottom = yh + s.focal * s.camera_height / b.depth;
        const double top = bottom - s.focal * b.height / b.depth;
        const double half = 0.5 * s.focal * b.width / b.depth;
        const double cx = b.center * s.width;
        if (y >= top && y <= bottom && fx >= cx - half && fx <= cx + half && b.depth < z) {
          z = b.depth;
          tint = b.tint;
          shade = box_tex(fx, y);
        }
      }
      for (int c = 0; c < 3; ++c) out.image(x, y, c) = std::clamp(tint[c] * (0.5 + shade), 0.0, 1.0);
      out.depth.depth(x, y) = z;
    }
  }
  return out;
}

// Writes scenes as <root>/<source>/img_%05d.png + depth_%05d.png.
inline void write_frame(const std::filesystem::path& dir, int frame, const Scene& s) {
  std::filesystem::create_directories(dir);
  char img[32], dep[32];
  std::snprintf(img, sizeof img, "img_%05d.png", frame);
  std::snprintf(dep, sizeof dep, "depth_%05d.png", frame);
  io::write_rgb(dir / img, s.image);
  io::write_depth_png(dir / dep, s.depth);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dt_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace dt::test
