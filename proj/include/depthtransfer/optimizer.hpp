#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "depthtransfer/align.hpp"
#include "depthtransfer/database.hpp"
#include "depthtransfer/flow.hpp"
#include "depthtransfer/motionseg.hpp"
#include "depthtransfer/raster.hpp"

namespace dt {

struct ObjectiveParams {
  double alpha = 10.0;   // smoothness
  double beta = 0.5;     // prior
  double gamma = 10.0;   // candidate gradient rows
  double nu = 100.0;     // temporal coherence
  double eta = 5.0;      // motion
  double epsilon = 1e-4;
  double sigmoid_midpoint = 0.05;
  double sigmoid_slope = 0.01;
  int candidates = 7;
  int max_iterations = 25;
  double inner_tolerance = 1e-6;
  double outer_tolerance = 1e-5;
  int max_inner_iterations = 2000;
  int window = 30;
  int window_overlap = 5;
  double depth_floor = 0.01;
};

// phi(x) = sqrt(x^2 + eps).
double robust_norm(double x, double epsilon = 1e-4);
// IRLS weight 1 / (2 phi(x)).
double robust_weight(double x, double epsilon = 1e-4);

struct SmoothnessWeights {
  Plane sx;
  Plane sy;
};

// Sigmoid of the forward-difference luminance gradient magnitudes.
SmoothnessWeights smoothness_weights(const ImageRGB& image, double midpoint = 0.05, double slope = 0.01);

// A candidate depth already warped into the query domain.
struct WarpedCandidate {
  Plane depth;
  Plane confidence;  // w, 0 where the warp is invalid
  Mask valid;
};

enum class BlockTag { Data, DataGradientX, DataGradientY, SmoothnessX, SmoothnessY, Prior, Coherence, Motion };
const char* block_name(BlockTag tag);

struct ResidualBlock {
  BlockTag tag;
  int frame = 0;
  int candidate = -1;
  std::size_t begin = 0;  // row range in the stacked operator
  std::size_t end = 0;
};

// Sum over rows r of weight_r * phi(J_r D - target_r).
struct AssembledProblem {
  int width = 0;
  int height = 0;
  int frames = 1;
  double epsilon = 1e-4;
  Eigen::SparseMatrix<double, Eigen::RowMajor> J;
  Eigen::VectorXd target;
  Eigen::VectorXd weight;
  std::vector<ResidualBlock> blocks;

  std::size_t unknowns() const noexcept { return static_cast<std::size_t>(J.cols()); }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(J.rows()); }
  std::size_t rows_with(BlockTag tag) const;
  double objective(const Eigen::VectorXd& depth) const;
};

AssembledProblem assemble_single(const ImageRGB& image, const std::vector<WarpedCandidate>& candidates,
                                 const DepthMap& prior, const ObjectiveParams& p);

struct VideoTerms {
  std::vector<FlowField> flows;        // frames - 1 entries, t -> t+1
  std::vector<Plane> flow_confidence;  // s_t, frames - 1 entries
  std::vector<Mask> motion;            // optional, one per frame
  std::vector<FloorContactDepth> contact;  // optional, one per frame
};

AssembledProblem assemble_video(const std::vector<ImageRGB>& frames,
                                const std::vector<std::vector<WarpedCandidate>>& candidates, const DepthMap& prior,
                                const VideoTerms& terms, const ObjectiveParams& p);

struct IrlsResult {
  Eigen::VectorXd depth;
  std::vector<double> trace;  // objective at the start and after every outer iteration
  int iterations = 0;
};

IrlsResult irls_solve(const AssembledProblem& prob, const Eigen::VectorXd& init, const ObjectiveParams& p);

// Confidence-weighted per-pixel median of candidates; the prior where no
// candidate carries weight.
Plane initial_depth(const std::vector<WarpedCandidate>& candidates, const DepthMap& prior);

// Aligns, warps and scores one database entry against the query descriptors.
WarpedCandidate warp_candidate(const DescriptorGrid& query, const Database& db, std::size_t entry,
                               const AlignParams& align_params);

struct InferenceOptions {
  ObjectiveParams objective;
  AlignParams align;
};

struct ImageInference {
  DepthMap depth;  // native resolution
  std::vector<Candidate> candidates;
  std::vector<double> trace;
};

ImageInference infer_image(const ImageRGB& image, const Database& db, const InferenceOptions& options = {});

struct VideoOptions {
  InferenceOptions base;
  bool temporal = true;
  bool motion = true;
  // Precomputed inputs at canonical resolution; estimated when absent.
  std::optional<std::vector<FlowField>> flows;
  std::optional<std::vector<MotionMask>> masks;
  // Precomputed per-frame candidates (canonical resolution), mostly for tests.
  std::optional<std::vector<std::vector<WarpedCandidate>>> candidates;
};

struct VideoInference {
  std::vector<DepthMap> depth;  // native resolution
  std::vector<MotionMask> masks;  // canonical resolution
  std::vector<DepthMap> first_pass;  // canonical resolution, present when the motion pass ran
};

VideoInference infer_video(const std::vector<ImageRGB>& frames, const Database& db, const VideoOptions& options = {});

// Solves a video problem on canonical-resolution inputs without any database
// access: candidates, prior, flows and optional motion terms are given.
std::vector<Plane> solve_video(const std::vector<ImageRGB>& frames,
                               const std::vector<std::vector<WarpedCandidate>>& candidates, const DepthMap& prior,
                               const VideoTerms& terms, const ObjectiveParams& p);

// Mean |grad_flow D| over valid flow pixels of all consecutive pairs.
double temporal_variation(const std::vector<Plane>& depth, const std::vector<FlowField>& flows);

}  // namespace dt
