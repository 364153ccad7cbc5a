#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "depthtransfer/flow.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

// Darkest frame (lowest mean) is the reference; every other frame is
// histogram-matched to it.
std::vector<GrayImage> normalize_exposure(const std::vector<GrayImage>& frames);

struct StabilizeParams {
  int max_corners = 500;
  double corner_quality = 0.01;  // relative to the strongest Harris response
  int patch_radius = 4;          // 9x9 NCC patches
  double search_radius = 40.0;
  double min_ncc = 0.8;
  double inlier_threshold = 2.0;
  int ransac_iterations = 1000;
  double ransac_confidence = 0.995;
  std::uint32_t seed = 0x5eed;
  int min_correspondences = 8;
};

struct Stabilization {
  std::size_t reference = 0;
  std::vector<Homography> to_reference;  // H_t maps frame t into the reference frame
  std::vector<GrayImage> warped;
  std::vector<Mask> coverage;
  // Per consecutive pair: fewer than min_correspondences matches, identity used.
  std::vector<bool> pair_warning;
};

Stabilization stabilize(const std::vector<GrayImage>& frames, const StabilizeParams& params = {});

struct Correspondence {
  double x0, y0;  // in the first image
  double x1, y1;  // in the second image
};

// Sub-pixel Harris corners as (x, y), strongest first.
std::vector<std::pair<double, double>> detect_corners(const GrayImage& img, const StabilizeParams& params = {});
std::vector<Correspondence> match_corners(const GrayImage& a, const GrayImage& b,
                                          const StabilizeParams& params = {});

struct HomographyFit {
  Homography h;  // maps (x0,y0) to (x1,y1)
  std::vector<bool> inliers;
  bool ok = false;
};

// Normalised direct linear transform on all given correspondences.
Homography fit_homography(std::span<const Correspondence> matches);
HomographyFit ransac_homography(std::span<const Correspondence> matches, const StabilizeParams& params = {});

struct Background {
  GrayImage image;
  Mask valid;
};

// Per-pixel temporal median over covered samples (lower median for even
// counts). Pixels never covered are invalid.
Background extract_background(const std::vector<GrayImage>& warped, const std::vector<Mask>& coverage);
ImageRGB extract_background_rgb(const std::vector<ImageRGB>& warped, const std::vector<Mask>& coverage,
                                Mask* valid = nullptr);

struct MotionParams {
  double tau = 0.01;
  double background_floor = 0.01;
  int open_radius = 1;
  int close_radius = 2;
  int min_component = 25;
};

struct MotionMask {
  Mask mask;
  Raster<int> labels;  // 0 = static, components numbered from 1 in scan order
  int components = 0;
};

// |flow| * (W - B)^2 / max(B, floor); zero where the background is invalid.
Plane motion_statistic(const GrayImage& warped, const Background& background, const FlowField& flow,
                       double background_floor = 0.01);

// Thresholds the statistic in the reference frame, maps each mask back to its
// original frame with the inverse homography, then cleans it up.
std::vector<MotionMask> segment(const std::vector<GrayImage>& warped, const std::vector<FlowField>& flows,
                                const Background& background, const std::vector<Homography>& to_reference,
                                const MotionParams& params = {});

// Complete chain: exposure normalisation, stabilisation, background, flows
// between stabilised frames, segmentation.
std::vector<MotionMask> detect_motion(const std::vector<GrayImage>& frames, const MotionParams& params = {},
                                      const StabilizeParams& stab = {});

Mask morph_open(const Mask& m, int radius);
Mask morph_close(const Mask& m, int radius);
// 4-connected labelling; components smaller than min_size are dropped.
MotionMask label_components(const Mask& m, int min_size);

struct FloorContactDepth {
  Plane depth;
  Mask defined;
};

// Per component: median first-pass depth over static pixels in the 5-row band
// below its lowest row (within its column span), falling back to the contact
// row itself; broadcast over the component.
FloorContactDepth floor_contact(const MotionMask& mask, const DepthMap& first_pass, int band = 5);

}  // namespace dt
