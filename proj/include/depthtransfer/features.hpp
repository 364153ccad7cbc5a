#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "depthtransfer/flow.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

inline constexpr int kGistScales = 4;
inline constexpr int kGistOrientations = 8;
inline constexpr int kGistBlocks = 4;
inline constexpr int kGistLength = kGistScales * kGistOrientations * kGistBlocks * kGistBlocks;
inline constexpr int kFlowBins = 16;
inline constexpr int kSiftLength = 128;

// Gabor energies, layout [scale][orientation][block row][block col]. Unit L2
// norm, or all zeros for a flat image.
struct GistDescriptor {
  std::array<double, kGistLength> values{};
};

// 8 orientation octants x {magnitude < 1 px, >= 1 px}, bin = 2*octant + large.
struct FlowHistogram {
  std::array<double, kFlowBins> bins{};
};

struct FeatureSet {
  GistDescriptor gist;
  std::optional<FlowHistogram> flow;
};

// Dense per-pixel 128-d SIFT. Components live in [0, 0.2] and are stored
// quantized to 8 bits (step 0.2/255); the quantization never rounds up, so
// each descriptor keeps L2 norm <= 1.
class DescriptorGrid {
 public:
  static constexpr double kMaxComponent = 0.2;
  static constexpr double kStep = kMaxComponent / 255.0;

  DescriptorGrid() = default;
  DescriptorGrid(int width, int height)
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * kSiftLength, 0) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  std::span<const std::uint8_t> descriptor(int x, int y) const noexcept {
    return {data_.data() + offset(x, y), static_cast<std::size_t>(kSiftLength)};
  }
  std::span<std::uint8_t> descriptor(int x, int y) noexcept {
    return {data_.data() + offset(x, y), static_cast<std::size_t>(kSiftLength)};
  }
  double value(int x, int y, int k) const noexcept { return data_[offset(x, y) + k] * kStep; }

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kSiftLength;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

GistDescriptor compute_gist(const ImageRGB& img);
GistDescriptor compute_gist(const GrayImage& img);

DescriptorGrid compute_dense_sift(const ImageRGB& img, int cell = 4);
DescriptorGrid compute_dense_sift(const GrayImage& img, int cell = 4);

FlowHistogram compute_flow_histogram(const FlowField& flow);

inline constexpr double kFlowFeatureWeight = 0.5;

// |gist_a - gist_b|^2 + w * |flow_a - flow_b|^2, the flow term only when both
// sides carry a histogram.
double match_distance(const FeatureSet& a, const FeatureSet& b, double flow_weight = kFlowFeatureWeight);

// Transfer function of Gabor filter (scale, orientation) at a frequency given
// in cycles per pixel along x and y. Exposed for tests and diagnostics.
double gabor_response(int scale, int orientation, double fx, double fy);

}  // namespace dt
