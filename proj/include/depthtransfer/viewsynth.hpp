#pragma once

#include <vector>

#include "depthtransfer/flow.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

struct StereoParams {
  double max_disparity = 20.0;
  // Depth percentile that lands on zero disparity.
  double convergence_percentile = 50.0;
};

// Signed horizontal disparity in pixels; positive values pop out.
using DisparityMap = Plane;

// Inverse-depth mapping between the 1st and 99th depth percentiles, shifted
// so the convergence depth sits at zero and clamped to +-max_disparity.
DisparityMap depth_to_disparity(const DepthMap& depth, const StereoParams& params = {});

// Value at percentile q (0..100) of the valid depths, linear interpolation
// between order statistics.
double depth_percentile(const DepthMap& depth, double q);

struct RenderedView {
  ImageRGB image;
  Mask holes;  // interior disocclusions that were filled
};

// Forward warp x -> x - round(d); larger disparity wins; holes filled from the
// side with the smaller disparity and then median filtered.
RenderedView render_view(const ImageRGB& image, const DisparityMap& disparity);

// Red from the left view, green and blue from the right view.
ImageRGB compose_anaglyph(const ImageRGB& left, const ImageRGB& right);
ImageRGB compose_side_by_side(const ImageRGB& left, const ImageRGB& right);

// 0.25 / 0.5 / 0.25 blend with flow-corresponded neighbours, gated per pixel
// by the flow confidence and renormalised. confidence[t] belongs to flows[t].
std::vector<DisparityMap> temporal_filter_disparity(const std::vector<DisparityMap>& disparities,
                                                    const std::vector<FlowField>& flows,
                                                    const std::vector<Plane>& confidence);

}  // namespace dt
