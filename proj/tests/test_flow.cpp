#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "depthtransfer/flow.hpp"
#include "synthetic.hpp"

namespace dt {
namespace {

struct MeanFlow {
  double u = 0.0, v = 0.0;
};

MeanFlow interior_mean(const FlowField& f, int margin) {
  MeanFlow m;
  int n = 0;
  for (int y = margin; y < f.height() - margin; ++y) {
    for (int x = margin; x < f.width() - margin; ++x) {
      m.u += f.u(x, y);
      m.v += f.v(x, y);
      ++n;
    }
  }
  m.u /= n;
  m.v /= n;
  return m;
}

// b(x) = a(x - d), so every pixel of a moves by +d.
std::pair<GrayImage, GrayImage> shifted_pair(std::uint32_t seed, double dx, double dy, int w = 64, int h = 48) {
  const test::Texture tex(seed, 10.0);
  return {test::render_texture(tex, w, h), test::render_texture(tex, w, h, -dx, -dy)};
}

TEST(EstimateFlow, IdenticalFramesGiveZeroFlow) {
  const auto [a, b] = shifted_pair(1, 0.0, 0.0);
  const auto f = estimate_flow(a, b);
  for (std::size_t i = 0; i < f.u.pixel_count(); ++i) {
    ASSERT_LE(std::abs(f.u[i]), 1e-3);
    ASSERT_LE(std::abs(f.v[i]), 1e-3);
  }
}

TEST(EstimateFlow, HorizontalShift) {
  const auto [a, b] = shifted_pair(2, 2.0, 0.0);
  const auto m = interior_mean(estimate_flow(a, b), 8);
  EXPECT_NEAR(m.u, 2.0, 0.25);
  EXPECT_NEAR(m.v, 0.0, 0.25);
}

TEST(EstimateFlow, VerticalShift) {
  const auto [a, b] = shifted_pair(3, 0.0, -3.0);
  const auto m = interior_mean(estimate_flow(a, b), 8);
  EXPECT_NEAR(m.u, 0.0, 0.25);
  EXPECT_NEAR(m.v, -3.0, 0.25);
}

TEST(EstimateFlow, ApproximatelyAntisymmetric) {
  const auto [a, b] = shifted_pair(4, 2.5, 1.5);
  const auto f = estimate_flow(a, b), g = estimate_flow(b, a);
  std::vector<double> err;
  for (int y = 8; y < 40; ++y) {
    for (int x = 8; x < 56; ++x) err.push_back(std::hypot(f.u(x, y) + g.u(x, y), f.v(x, y) + g.v(x, y)));
  }
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  EXPECT_LE(err[err.size() / 2], 0.5);
}

TEST(EstimateFlow, ValidityFollowsBounds) {
  const auto [a, b] = shifted_pair(5, 3.0, 0.0);
  const auto f = estimate_flow(a, b);
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      const double tx = x + f.u(x, y), ty = y + f.v(x, y);
      const bool inside = tx >= 0 && ty >= 0 && tx <= f.width() - 1 && ty <= f.height() - 1;
      ASSERT_EQ(f.valid(x, y) != 0, inside);
    }
  }
}

TEST(EstimateFlow, SizeMismatchThrows) { EXPECT_THROW(estimate_flow(GrayImage(32, 32), GrayImage(32, 31)), Error); }

FlowField random_flow(int w, int h, std::uint32_t seed, double amplitude) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  FlowField f(w, h);
  for (std::size_t i = 0; i < f.u.pixel_count(); ++i) {
    f.u[i] = u(rng);
    f.v[i] = u(rng);
  }
  f.update_validity();
  return f;
}

Plane random_plane(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Plane p(w, h);
  for (double& v : p.values()) v = u(rng);
  return p;
}

TEST(FlowDifference, ConstantFieldGivesZero) {
  const std::vector<Plane> fields{Plane(10, 8, 1, 2.0), Plane(10, 8, 1, 2.0)};
  const std::vector<FlowField> flows{random_flow(10, 8, 1, 2.0)};
  const auto d = flow_difference(fields, flows, 0);
  for (std::size_t i = 0; i < d.values.pixel_count(); ++i) {
    if (d.valid[i]) EXPECT_NEAR(d.values[i], 0.0, 1e-12);
  }
}

TEST(FlowDifference, ZeroFlowIsPlainDifference) {
  const std::vector<Plane> fields{random_plane(6, 5, 1), random_plane(6, 5, 2)};
  const std::vector<FlowField> flows{FlowField(6, 5)};
  const auto d = flow_difference(fields, flows, 0);
  for (std::size_t i = 0; i < d.values.pixel_count(); ++i) {
    EXPECT_TRUE(d.valid[i]);
    EXPECT_EQ(d.values[i], fields[1][i] - fields[0][i]);
  }
}

TEST(FlowDifference, MatchesDirectSampling) {
  const int w = 12, h = 9;
  const std::vector<Plane> fields{random_plane(w, h, 3), random_plane(w, h, 4)};
  const std::vector<FlowField> flows{random_flow(w, h, 5, 1.5)};
  const auto d = flow_difference(fields, flows, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = x + flows[0].u(x, y), sy = y + flows[0].v(x, y);
      const bool inside = sx >= 0 && sy >= 0 && sx <= w - 1 && sy <= h - 1;
      ASSERT_EQ(d.valid(x, y) != 0, inside);
      if (!inside) continue;
      const int x0 = std::min(static_cast<int>(sx), w - 2), y0 = std::min(static_cast<int>(sy), h - 2);
      const double fx = sx - x0, fy = sy - y0;
      const Plane& f1 = fields[1];
      const double s = (1 - fx) * (1 - fy) * f1(x0, y0) + fx * (1 - fy) * f1(x0 + 1, y0) +
                       (1 - fx) * fy * f1(x0, y0 + 1) + fx * fy * f1(x0 + 1, y0 + 1);
      EXPECT_NEAR(d.values(x, y), s - fields[0](x, y), 1e-6);
    }
  }
}

TEST(FlowDifference, IsLinearInTheField) {
  const int w = 10, h = 7;
  const std::vector<Plane> a{random_plane(w, h, 6), random_plane(w, h, 7)};
  const std::vector<Plane> b{random_plane(w, h, 8), random_plane(w, h, 9)};
  std::vector<Plane> mix(2, Plane(w, h));
  for (int t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < mix[t].pixel_count(); ++i) mix[t][i] = 3.0 * a[t][i] - 2.0 * b[t][i];
  }
  const std::vector<FlowField> flows{random_flow(w, h, 10, 1.0)};
  const auto da = flow_difference(a, flows, 0), db = flow_difference(b, flows, 0), dm = flow_difference(mix, flows, 0);
  for (std::size_t i = 0; i < dm.values.pixel_count(); ++i) {
    if (dm.valid[i]) EXPECT_NEAR(dm.values[i], 3.0 * da.values[i] - 2.0 * db.values[i], 1e-12);
  }
}

TEST(FlowDifference, IndexOutOfRangeThrows) {
  const std::vector<Plane> fields{Plane(4, 4), Plane(4, 4)};
  const std::vector<FlowField> flows{FlowField(4, 4)};
  EXPECT_THROW(flow_difference(fields, flows, 1), Error);
}

TEST(FlowConfidence, ClosedFormValues) {
  const GrayImage a(8, 8, 0.5);
  EXPECT_NEAR(flow_confidence(a, a, FlowField(8, 8))(3, 3), 1.0 / (1.0 + std::exp(-5.0)), 1e-4);
  EXPECT_NEAR(flow_confidence(a, GrayImage(8, 8, 0.55), FlowField(8, 8))(3, 3), 0.5, 1e-9);
  EXPECT_NEAR(flow_confidence(a, GrayImage(8, 8, 0.6), FlowField(8, 8))(3, 3), 1.0 / (1.0 + std::exp(5.0)), 1e-4);
}

TEST(FlowConfidence, MonotoneAndBounded) {
  double last = 1.0;
  for (int k = 0; k <= 20; ++k) {
    const double s = flow_confidence(GrayImage(4, 4, 0.2), GrayImage(4, 4, 0.2 + 0.01 * k), FlowField(4, 4))(1, 1);
    EXPECT_LE(s, last);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    last = s;
  }
}

TEST(FlowConfidence, InvalidPixelsGetZero) {
  FlowField f(6, 6);
  for (int y = 0; y < 6; ++y) f.u(5, y) = 2.0;
  f.update_validity();
  const auto s = flow_confidence(GrayImage(6, 6, 0.5), GrayImage(6, 6, 0.5), f);
  for (int y = 0; y < 6; ++y) EXPECT_EQ(s(5, y), 0.0);
}

}  // namespace
}  // namespace dt
