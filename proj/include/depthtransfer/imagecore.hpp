#pragma once

#include <optional>
#include <vector>

#include "depthtransfer/raster.hpp"

namespace dt {

GrayImage to_grayscale(const ImageRGB& img);

struct Gradients {
  Plane gx;
  Plane gy;
};

// Forward differences; the last column of gx and the last row of gy are 0.
// Applies per channel for multi-channel rasters.
Gradients gradients(const Raster<double>& img);

template <typename R>
struct Warped {
  R image;
  Mask coverage;
};

// Bilinear sample of channel c at a real position. Returns nullopt outside
// [0,w-1]x[0,h-1].
std::optional<double> sample_bilinear(const Raster<double>& img, double x, double y, int c = 0);

// Output pixel (x,y) reads the input at h^-1 (x,y).
Warped<Raster<double>> warp_bilinear(const Raster<double>& img, const Homography& h);

// 256-bin histogram specification. Each source bin maps to the first
// reference bin whose CDF reaches the source bin's mid-CDF.
GrayImage histogram_match(const GrayImage& src, const GrayImage& reference);

Raster<double> resize_bilinear(const Raster<double>& img, int width, int height);
Raster<double> gaussian_blur(const Raster<double>& img, double sigma);

// Level 0 is the input; each further level is blurred then resampled by
// `factor`. Throws if any level would fall below 8x8.
std::vector<Raster<double>> build_pyramid(const Raster<double>& img, int levels, double factor);

// Largest level count <= max_levels whose coarsest level stays >= min_size.
int max_pyramid_levels(int width, int height, int max_levels, double factor, int min_size = 8);

// Depth-aware resampling: bilinear over valid neighbours only.
DepthMap resize_depth(const DepthMap& depth, int width, int height);

// Helpers shared by several modules.
Raster<double> channel(const Raster<double>& img, int c);
double mean_value(const Raster<double>& img);

}  // namespace dt
