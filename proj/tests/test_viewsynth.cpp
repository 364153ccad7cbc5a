#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "depthtransfer/eval.hpp"
#include "depthtransfer/viewsynth.hpp"
#include "synthetic.hpp"

namespace dt {
namespace {

ImageRGB textured_rgb(std::uint32_t seed, int w, int h, double wavelength = 8.0) {
  ImageRGB img(w, h);
  for (int c = 0; c < 3; ++c) {
    const test::Texture t(seed * 3 + c, wavelength);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) img(x, y, c) = t(x, y);
    }
  }
  return img;
}

std::size_t count(const Mask& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.pixel_count(); ++i) n += m[i] != 0;
  return n;
}

TEST(Disparity, ConstantDepthGivesZero) {
  const DisparityMap d = depth_to_disparity(DepthMap(10, 8, 3.0));
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
}

TEST(Disparity, NearEndpointReachesMaximum) {
  DepthMap depth(100, 1, 1.0);
  for (int x = 0; x < 100; ++x) depth.depth(x, 0) = 1.0 + x;
  const double near = depth_percentile(depth, 1.0);
  StereoParams sp;
  sp.convergence_percentile = 99.0;
  depth.depth(0, 0) = near;
  const DisparityMap d = depth_to_disparity(depth, sp);
  EXPECT_NEAR(d(0, 0), sp.max_disparity, 1e-9);
  EXPECT_NEAR(d(99, 0), 0.0, 1e-9);
}

TEST(Disparity, MatchesScalarFormula) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.5, 30.0);
  DepthMap depth(23, 17, 1.0);
  for (double& v : depth.depth.values()) v = u(rng);
  depth.valid(4, 4) = 0;
  StereoParams sp;
  sp.max_disparity = 12.0;
  const DisparityMap d = depth_to_disparity(depth, sp);

  std::vector<double> sorted;
  for (std::size_t i = 0; i < depth.depth.pixel_count(); ++i) {
    if (depth.valid[i]) sorted.push_back(depth.depth[i]);
  }
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double q) {
    const double pos = q / 100.0 * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    return sorted[lo] + (pos - lo) * (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]);
  };
  const double dn = pct(1.0), df = pct(99.0), dc = pct(50.0);
  auto f = [&](double z) {
    z = std::clamp(z, dn, df);
    return 12.0 * (1.0 / z - 1.0 / df) / (1.0 / dn - 1.0 / df);
  };
  for (std::size_t i = 0; i < d.pixel_count(); ++i) {
    if (!depth.valid[i]) continue;
    ASSERT_NEAR(d[i], f(depth.depth[i]) - f(dc), 1e-6);
    ASSERT_LE(std::abs(d[i]), 12.0);
  }
}

TEST(Render, ZeroDisparityIsIdentity) {
  const ImageRGB img = textured_rgb(1, 40, 30);
  const RenderedView v = render_view(img, DisparityMap(40, 30));
  for (std::size_t i = 0; i < img.values().size(); ++i) ASSERT_EQ(v.image.values()[i], img.values()[i]);
  EXPECT_EQ(count(v.holes), 0u);
}

TEST(Render, ConstantDisparityShiftsRigidly) {
  const int w = 40, h = 20;
  const ImageRGB img = textured_rgb(2, w, h);
  const RenderedView v = render_view(img, DisparityMap(w, h, 1, 5.0));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 5 < w; ++x) {
      for (int c = 0; c < 3; ++c) ASSERT_EQ(v.image(x, y, c), img(x + 5, y, c));
    }
  }
  // The uncovered border strip is extended from its only neighbour, then
  // median filtered over 3x3 windows of the extended image.
  ImageRGB extended = v.image;
  for (int y = 0; y < h; ++y) {
    for (int x = w - 5; x < w; ++x) {
      for (int c = 0; c < 3; ++c) extended(x, y, c) = img(w - 1, y, c);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = w - 5; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        std::vector<double> win;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (extended.contains(x + dx, y + dy)) win.push_back(extended(x + dx, y + dy, c));
          }
        }
        std::sort(win.begin(), win.end());
        EXPECT_EQ(v.image(x, y, c), win[(win.size() - 1) / 2]) << x << "," << y;
      }
    }
  }
  EXPECT_EQ(count(v.holes), 0u);
}

TEST(Render, TwoLayerSceneMatchesZBufferOracle) {
  const int w = 96, h = 40;
  const double bg_disp = 2.0, fg_disp = 8.0;
  const int fg_lo = 30, fg_hi = 52;
  // Smooth background so extension-filled holes stay close to the truth.
  const test::Texture bg(11, 30.0, 10, 0.15, 0.5);
  const test::Texture fg(12, 6.0, 12, 0.25, 0.5);
  auto scene = [&](double x, double y, bool front, int c) {
    return front ? fg(x + 40 * c, y) : bg(x + 40 * c, y);
  };
  ImageRGB left(w, h);
  DisparityMap disp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool front = x >= fg_lo && x < fg_hi;
      disp(x, y) = front ? fg_disp : bg_disp;
      for (int c = 0; c < 3; ++c) left(x, y, c) = scene(x, y, front, c);
    }
  }
  const RenderedView v = render_view(left, disp);

  // Brute-force splat: every source pixel competes for its target column.
  ImageRGB truth(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = -1;
      for (int s = 0; s < w; ++s) {
        if (s - static_cast<int>(std::lround(disp(s, y))) != x) continue;
        if (best < 0 || disp(s, y) > disp(best, y)) best = s;
      }
      if (best >= 0) {
        for (int c = 0; c < 3; ++c) ASSERT_EQ(v.image(x, y, c), left(best, y, c)) << x << "," << y;
        for (int c = 0; c < 3; ++c) truth(x, y, c) = left(best, y, c);
      } else {
        // Disoccluded background as the true right view would show it.
        for (int c = 0; c < 3; ++c) truth(x, y, c) = scene(x + bg_disp, y, false, c);
      }
    }
  }
  EXPECT_GE(psnr(v.image, truth), 30.0);
  // The only interior disocclusion sits to the right of the strip.
  EXPECT_EQ(count(v.holes), static_cast<std::size_t>(6 * h));
  EXPECT_TRUE(v.holes(fg_hi - 8, 5));
  EXPECT_FALSE(v.holes(fg_lo - 8, 5));
}

TEST(Render, HolesOnlyWhereDisparityVaries) {
  const ImageRGB img = textured_rgb(3, 30, 10);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double c = u(rng);
    EXPECT_EQ(count(render_view(img, DisparityMap(30, 10, 1, c)).holes), 0u);
  }
  DisparityMap step(30, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 15; x < 30; ++x) step(x, y) = -4.0;
  }
  EXPECT_GT(count(render_view(img, step).holes), 0u);
}

TEST(Render, SizeMismatchThrows) {
  EXPECT_THROW(render_view(ImageRGB(4, 4), DisparityMap(5, 4)), Error);
}

TEST(Anaglyph, ChannelDefinition) {
  const ImageRGB a = textured_rgb(5, 20, 10);
  const ImageRGB same = compose_anaglyph(a, a);
  for (std::size_t i = 0; i < a.values().size(); ++i) ASSERT_EQ(same.values()[i], a.values()[i]);

  ImageRGB red(3, 2), cyan(3, 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 3; ++x) {
      red(x, y, 0) = 1.0;
      cyan(x, y, 1) = cyan(x, y, 2) = 1.0;
    }
  }
  const ImageRGB white = compose_anaglyph(red, cyan);
  for (double v : white.values()) EXPECT_EQ(v, 1.0);

  const ImageRGB b = textured_rgb(6, 20, 10);
  const ImageRGB mix = compose_anaglyph(a, b);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 20; ++x) {
      ASSERT_EQ(mix(x, y, 0), a(x, y, 0));
      ASSERT_EQ(mix(x, y, 1), b(x, y, 1));
      ASSERT_EQ(mix(x, y, 2), b(x, y, 2));
    }
  }
  EXPECT_THROW(compose_anaglyph(a, ImageRGB(3, 3)), Error);
}

TEST(SideBySide, PlacesViewsNextToEachOther) {
  const ImageRGB a = textured_rgb(7, 8, 4);
  const ImageRGB b = textured_rgb(8, 8, 4);
  const ImageRGB s = compose_side_by_side(a, b);
  ASSERT_EQ(s.width(), 16);
  EXPECT_EQ(s(3, 2, 1), a(3, 2, 1));
  EXPECT_EQ(s(11, 2, 1), b(3, 2, 1));
}

std::vector<FlowField> still_flows(std::size_t n, int w, int h) { return std::vector<FlowField>(n - 1, FlowField(w, h)); }

TEST(TemporalFilter, ConstantSequenceUnchanged) {
  const std::vector<DisparityMap> d(5, DisparityMap(6, 4, 1, 3.5));
  const auto out = temporal_filter_disparity(d, still_flows(5, 6, 4), std::vector<Plane>(4, Plane(6, 4, 1, 1.0)));
  for (const auto& f : out) {
    for (double v : f.values()) EXPECT_DOUBLE_EQ(v, 3.5);
  }
}

TEST(TemporalFilter, SingleFrameIsIdentity) {
  DisparityMap d(3, 3);
  d(1, 1) = 7.0;
  const auto out = temporal_filter_disparity({d}, {}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0](1, 1), 7.0);
}

TEST(TemporalFilter, AlternatingSignIsDamped) {
  std::vector<DisparityMap> d;
  for (int t = 0; t < 6; ++t) d.emplace_back(4, 4, 1, t % 2 ? -1.0 : 1.0);
  const auto out = temporal_filter_disparity(d, still_flows(6, 4, 4), std::vector<Plane>(5, Plane(4, 4, 1, 1.0)));
  for (const auto& f : out) {
    for (double v : f.values()) EXPECT_LE(std::abs(v), 0.5);
  }
  EXPECT_NEAR(out[2](1, 1), 0.0, 1e-12);
  EXPECT_NEAR(out[0](1, 1), (0.5 - 0.25) / 0.75, 1e-12);
}

TEST(TemporalFilter, ZeroConfidenceLeavesFramesAlone) {
  std::vector<DisparityMap> d;
  for (int t = 0; t < 3; ++t) d.emplace_back(4, 4, 1, static_cast<double>(t));
  const auto out = temporal_filter_disparity(d, still_flows(3, 4, 4), std::vector<Plane>(2, Plane(4, 4)));
  for (int t = 0; t < 3; ++t) EXPECT_EQ(out[t](2, 2), t);
}

}  // namespace
}  // namespace dt
