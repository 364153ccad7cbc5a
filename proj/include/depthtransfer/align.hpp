#pragma once

#include "depthtransfer/features.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

// Energy knobs of the dense alignment. Descriptor distances are L1 over the
// 128 components scaled by 255.
struct AlignParams {
  double data_truncation = 30.0 * 255.0;
  double displacement_weight = 0.005 * 255.0;
  double smoothness_weight = 2.0 * 255.0;
  double smoothness_truncation = 40.0 * 255.0;
  int search_radius = 5;
  int pyramid_levels = 4;
  int sweeps = 30;
};

// Pull warp from the query domain: query pixel p corresponds to candidate
// location p + (u,v). Displacements produced by align() are integers.
struct WarpField {
  Plane u;
  Plane v;
  Plane residual;  // L2 descriptor distance at the matched location
  Mask valid;      // target inside the candidate domain
  double energy = 0.0;

  WarpField() = default;
  WarpField(int width, int height)
      : u(width, height), v(width, height), residual(width, height), valid(width, height, 1, 1) {}

  int width() const noexcept { return u.width(); }
  int height() const noexcept { return u.height(); }
};

// Alignment energy of an integer displacement field (rounded if not).
double alignment_energy(const DescriptorGrid& query, const DescriptorGrid& candidate, const Plane& u,
                        const Plane& v, const AlignParams& params);

// The zero warp with residuals and energy filled in.
WarpField zero_warp(const DescriptorGrid& query, const DescriptorGrid& candidate, const AlignParams& params);

// Coarse-to-fine discrete search refined by exact dynamic programming on
// alternating row and column chains. The returned energy never exceeds the
// zero warp's.
WarpField align(const DescriptorGrid& query, const DescriptorGrid& candidate, const AlignParams& params = {});

struct WarpedScalar {
  Plane values;
  Mask valid;
};

// out(p) = bilinear sample of field at p + w(p); invalid outside the domain.
WarpedScalar warp_scalar(const Plane& field, const WarpField& warp);
// Also invalid where any contributing depth sample is invalid.
WarpedScalar warp_scalar(const DepthMap& depth, const WarpField& warp);

// w = exp(-r^2 / sigma^2) with r the matched-descriptor L2 residual and sigma
// the median residual over valid pixels (floored at 1e-3). Invalid pixels get 0.
Plane warp_confidence(const DescriptorGrid& query, const DescriptorGrid& candidate, const WarpField& warp);

// Residual-only variant used when descriptors are no longer at hand.
Plane warp_confidence(const Plane& residual, const Mask& valid);

}  // namespace dt
