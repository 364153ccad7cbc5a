#pragma once

#include <span>
#include <vector>

#include "depthtransfer/raster.hpp"

namespace dt {

// Per-pixel displacement from frame t to frame t+1.
struct FlowField {
  Plane u;
  Plane v;
  Mask valid;

  FlowField() = default;
  // Zero flow, valid everywhere.
  FlowField(int width, int height) : u(width, height), v(width, height), valid(width, height, 1, 1) {}

  int width() const noexcept { return u.width(); }
  int height() const noexcept { return u.height(); }

  // Marks pixels whose target falls outside the frame invalid.
  void update_validity();
};

struct FlowParams {
  double smoothness = 0.02;
  int pyramid_levels = 5;
  double pyramid_factor = 0.5;
  int warp_iterations = 3;
  int solver_sweeps = 30;
  double sor_omega = 1.8;
  double charbonnier_epsilon = 1e-3;
};

// Coarse-to-fine variational flow with Charbonnier data and smoothness
// penalties, solved by fixed-point iterations and SOR sweeps.
FlowField estimate_flow(const GrayImage& a, const GrayImage& b, const FlowParams& params = {});

struct FlowDifference {
  Plane values;
  Mask valid;
};

// field[t+1](i + flow[t](i)) - field[t](i), bilinear sampled; linear in field.
FlowDifference flow_difference(std::span<const Plane> fields, std::span<const FlowField> flows,
                               std::size_t t);

// Soft threshold on the luminance reprojection error: high weight when the
// error is low. Invalid pixels get 0.
Plane flow_confidence(const GrayImage& a, const GrayImage& b, const FlowField& flow,
                      double midpoint = 0.05, double slope = 0.01);

Plane flow_magnitude(const FlowField& flow);

}  // namespace dt
