#include "depthtransfer/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "depthtransfer/features.hpp"
#include "depthtransfer/imagecore.hpp"

namespace dt {

namespace {

using Triplet = Eigen::Triplet<double>;

class ProblemBuilder {
 public:
  ProblemBuilder(int w, int h, int frames) : w_(w), h_(h), frames_(frames) {}

  void begin(BlockTag tag, int frame, int candidate = -1) {
    blocks_.push_back({tag, frame, candidate, rows_, rows_});
  }
  // Adds one row; coefficients index unknowns directly.
  void row(std::initializer_list<std::pair<std::size_t, double>> coefs, double target, double weight) {
    for (const auto& [col, v] : coefs) triplets_.emplace_back(static_cast<int>(rows_), static_cast<int>(col), v);
    targets_.push_back(target);
    weights_.push_back(weight);
    ++rows_;
    blocks_.back().end = rows_;
  }
  void row4(std::size_t c0, double v0, std::size_t c1, double v1, std::size_t c2, double v2, std::size_t c3,
            double v3, std::size_t c4, double v4, double weight) {
    const std::size_t cols[5] = {c0, c1, c2, c3, c4};
    const double vals[5] = {v0, v1, v2, v3, v4};
    for (int k = 0; k < 5; ++k) {
      if (vals[k] != 0.0) triplets_.emplace_back(static_cast<int>(rows_), static_cast<int>(cols[k]), vals[k]);
    }
    targets_.push_back(0.0);
    weights_.push_back(weight);
    ++rows_;
    blocks_.back().end = rows_;
  }

  AssembledProblem finish(double epsilon) {
    AssembledProblem p;
    p.width = w_;
    p.height = h_;
    p.frames = frames_;
    p.epsilon = epsilon;
    const std::size_t n = static_cast<std::size_t>(w_) * h_ * frames_;
    p.J.resize(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(n));
    p.J.setFromTriplets(triplets_.begin(), triplets_.end());
    p.target = Eigen::Map<Eigen::VectorXd>(targets_.data(), static_cast<Eigen::Index>(targets_.size()));
    p.weight = Eigen::Map<Eigen::VectorXd>(weights_.data(), static_cast<Eigen::Index>(weights_.size()));
    p.blocks = std::move(blocks_);
    return p;
  }

 private:
  int w_, h_, frames_;
  std::size_t rows_ = 0;
  std::vector<Triplet> triplets_;
  std::vector<double> targets_;
  std::vector<double> weights_;
  std::vector<ResidualBlock> blocks_;
};

void check_candidate(const WarpedCandidate& c, int w, int h) {
  if (c.depth.width() != w || c.depth.height() != h) throw Error("candidate depth has the wrong size");
  if (c.confidence.empty()) throw Error("candidate is missing its confidence map");
  if (c.confidence.width() != w || c.confidence.height() != h) throw Error("candidate confidence has the wrong size");
  if (c.valid.width() != w || c.valid.height() != h) throw Error("candidate validity mask has the wrong size");
}

void add_frame_blocks(ProblemBuilder& b, int frame, const ImageRGB& image,
                      const std::vector<WarpedCandidate>& candidates, const DepthMap& prior,
                      const ObjectiveParams& p) {
  const int w = image.width();
  const int h = image.height();
  const std::size_t off = static_cast<std::size_t>(frame) * w * h;
  auto at = [&](int x, int y) { return off + static_cast<std::size_t>(y) * w + x; };
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    check_candidate(c, w, h);
    const int ck = static_cast<int>(k);
    b.begin(BlockTag::Data, frame, ck);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool ok = c.valid(x, y) != 0;
        b.row({{at(x, y), 1.0}}, ok ? c.depth(x, y) : 0.0, ok ? c.confidence(x, y) : 0.0);
      }
    }
    b.begin(BlockTag::DataGradientX, frame, ck);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x + 1 < w && c.valid(x, y) && c.valid(x + 1, y)) {
          b.row({{at(x, y), -1.0}, {at(x + 1, y), 1.0}}, c.depth(x + 1, y) - c.depth(x, y),
                p.gamma * c.confidence(x, y));
        } else {
          b.row({}, 0.0, 0.0);
        }
      }
    }
    b.begin(BlockTag::DataGradientY, frame, ck);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (y + 1 < h && c.valid(x, y) && c.valid(x, y + 1)) {
          b.row({{at(x, y), -1.0}, {at(x, y + 1), 1.0}}, c.depth(x, y + 1) - c.depth(x, y),
                p.gamma * c.confidence(x, y));
        } else {
          b.row({}, 0.0, 0.0);
        }
      }
    }
  }
  const SmoothnessWeights s = smoothness_weights(image, p.sigmoid_midpoint, p.sigmoid_slope);
  b.begin(BlockTag::SmoothnessX, frame);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) {
        b.row({{at(x, y), -1.0}, {at(x + 1, y), 1.0}}, 0.0, p.alpha * s.sx(x, y));
      } else {
        b.row({}, 0.0, 0.0);
      }
    }
  }
  b.begin(BlockTag::SmoothnessY, frame);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y + 1 < h) {
        b.row({{at(x, y), -1.0}, {at(x, y + 1), 1.0}}, 0.0, p.alpha * s.sy(x, y));
      } else {
        b.row({}, 0.0, 0.0);
      }
    }
  }
  b.begin(BlockTag::Prior, frame);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) b.row({{at(x, y), 1.0}}, prior.depth(x, y), p.beta);
  }
}

double lower_weighted_median(std::vector<std::pair<double, double>>& samples) {
  std::sort(samples.begin(), samples.end());
  double total = 0.0;
  for (const auto& s : samples) total += s.second;
  double acc = 0.0;
  for (const auto& s : samples) {
    acc += s.second;
    if (acc >= 0.5 * total) return s.first;
  }
  return samples.back().first;
}

DepthMap complete_depth(const Plane& p) {
  DepthMap d(p.width(), p.height(), 1.0);
  d.depth = p;
  return d;
}

ImageRGB to_canonical(const ImageRGB& img, int w, int h) { return ImageRGB(resize_bilinear(img, w, h)); }

FeatureSet query_features(const GrayImage& gray) { return FeatureSet{compute_gist(gray), std::nullopt}; }

std::vector<WarpedCandidate> candidates_for(const DescriptorGrid& query, const Database& db,
                                            const std::vector<Candidate>& picks, const AlignParams& ap) {
  std::vector<WarpedCandidate> out(picks.size());
  parallel_for(picks.size(), [&](std::size_t k) { out[k] = warp_candidate(query, db, picks[k].index, ap); });
  return out;
}

}  // namespace

double robust_norm(double x, double epsilon) { return std::sqrt(x * x + epsilon); }
double robust_weight(double x, double epsilon) { return 0.5 / robust_norm(x, epsilon); }

SmoothnessWeights smoothness_weights(const ImageRGB& image, double midpoint, double slope) {
  const GrayImage lum = to_grayscale(image);
  const Gradients g = gradients(lum);
  SmoothnessWeights s{Plane(image.width(), image.height()), Plane(image.width(), image.height())};
  for (std::size_t i = 0; i < s.sx.pixel_count(); ++i) {
    s.sx[i] = soft_threshold(std::abs(g.gx[i]), midpoint, slope);
    s.sy[i] = soft_threshold(std::abs(g.gy[i]), midpoint, slope);
  }
  return s;
}

const char* block_name(BlockTag tag) {
  switch (tag) {
    case BlockTag::Data: return "data";
    case BlockTag::DataGradientX: return "data-gradient-x";
    case BlockTag::DataGradientY: return "data-gradient-y";
    case BlockTag::SmoothnessX: return "smoothness-x";
    case BlockTag::SmoothnessY: return "smoothness-y";
    case BlockTag::Prior: return "prior";
    case BlockTag::Coherence: return "coherence";
    case BlockTag::Motion: return "motion";
  }
  return "unknown";
}

std::size_t AssembledProblem::rows_with(BlockTag tag) const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (b.tag == tag) n += b.end - b.begin;
  }
  return n;
}

double AssembledProblem::objective(const Eigen::VectorXd& depth) const {
  const Eigen::VectorXd r = J * depth - target;
  double total = 0.0;
  for (const auto& b : blocks) {
    double s = 0.0;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const double ri = r[static_cast<Eigen::Index>(i)];
      if (!std::isfinite(ri)) {
        throw Error(std::string("non-finite residual in block '") + block_name(b.tag) + "' (frame " +
                    std::to_string(b.frame) + ")");
      }
      s += weight[static_cast<Eigen::Index>(i)] * robust_norm(ri, epsilon);
    }
    total += s;
  }
  return total;
}

AssembledProblem assemble_single(const ImageRGB& image, const std::vector<WarpedCandidate>& candidates,
                                 const DepthMap& prior, const ObjectiveParams& p) {
  return assemble_video({image}, {candidates}, prior, VideoTerms{}, p);
}

AssembledProblem assemble_video(const std::vector<ImageRGB>& frames,
                                const std::vector<std::vector<WarpedCandidate>>& candidates, const DepthMap& prior,
                                const VideoTerms& terms, const ObjectiveParams& p) {
  if (frames.empty()) throw Error("assemble: no frames");
  if (candidates.size() != frames.size()) throw Error("assemble: candidate sets do not match the frame count");
  const int w = frames.front().width();
  const int h = frames.front().height();
  const int n = static_cast<int>(frames.size());
  if (prior.width() != w || prior.height() != h) throw Error("assemble: prior has the wrong size");
  const bool coherence = n > 1 && p.nu > 0.0 && !terms.flows.empty();
  if (coherence && (terms.flows.size() != frames.size() - 1 || terms.flow_confidence.size() != terms.flows.size())) {
    throw Error("assemble: flow count must be frames - 1");
  }
  const bool motion = p.eta > 0.0 && !terms.motion.empty();
  if (motion && (terms.motion.size() != frames.size() || terms.contact.size() != frames.size())) {
    throw Error("assemble: motion inputs do not match the frame count");
  }
  ProblemBuilder b(w, h, n);
  for (int t = 0; t < n; ++t) {
    if (frames[t].width() != w || frames[t].height() != h) throw Error("assemble: frame sizes differ");
    add_frame_blocks(b, t, frames[t], candidates[t], prior, p);
  }
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  if (coherence) {
    for (int t = 0; t + 1 < n; ++t) {
      const FlowField& f = terms.flows[t];
      const Plane& st = terms.flow_confidence[t];
      b.begin(BlockTag::Coherence, t);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!f.valid(x, y)) continue;
          const double sx = x + f.u(x, y);
          const double sy = y + f.v(x, y);
          if (!(sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1)) continue;
          const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
          const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
          const int x1 = std::min(x0 + 1, w - 1);
          const int y1 = std::min(y0 + 1, h - 1);
          const double fx = sx - x0;
          const double fy = sy - y0;
          const std::size_t next = static_cast<std::size_t>(t + 1) * hw;
          const std::size_t cur = static_cast<std::size_t>(t) * hw + static_cast<std::size_t>(y) * w + x;
          auto idx = [&](int xx, int yy) { return next + static_cast<std::size_t>(yy) * w + xx; };
          // Coincident corners are merged by setFromTriplets.
          b.row4(idx(x0, y0), (1 - fx) * (1 - fy), idx(x1, y0), fx * (1 - fy), idx(x0, y1), (1 - fx) * fy,
                 idx(x1, y1), fx * fy, cur, -1.0, p.nu * st(x, y));
        }
      }
    }
  }
  if (motion) {
    for (int t = 0; t < n; ++t) {
      b.begin(BlockTag::Motion, t);
      const Mask& m = terms.motion[t];
      const FloorContactDepth& c = terms.contact[t];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!m(x, y) || !c.defined(x, y)) continue;
          b.row({{static_cast<std::size_t>(t) * hw + static_cast<std::size_t>(y) * w + x, 1.0}}, c.depth(x, y),
                p.eta);
        }
      }
    }
  }
  return b.finish(p.epsilon);
}

IrlsResult irls_solve(const AssembledProblem& prob, const Eigen::VectorXd& init, const ObjectiveParams& p) {
  if (static_cast<std::size_t>(init.size()) != prob.unknowns()) throw Error("irls_solve: initialisation size mismatch");
  if (!init.allFinite()) throw Error("irls_solve: non-finite initialisation");
  IrlsResult res;
  res.depth = init;
  double obj = prob.objective(res.depth);
  res.trace.push_back(obj);
  const auto& J = prob.J;
  const Eigen::Index n = J.cols();
  const Eigen::SparseMatrix<double, Eigen::RowMajor> J2 = J.cwiseAbs2();
  Eigen::VectorXd c(J.rows()), b(n), diag(n), r(n), z(n), d(n), q(n);
  for (int it = 0; it < p.max_iterations; ++it) {
    const Eigen::VectorXd resid = J * res.depth - prob.target;
    for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = prob.weight[i] * robust_weight(resid[i], prob.epsilon);
    // Minimise sum c (J x - t)^2 by Jacobi-preconditioned CG from the current x.
    b = J.transpose() * c.cwiseProduct(prob.target);
    diag = J2.transpose() * c;
    for (Eigen::Index i = 0; i < n; ++i) diag[i] = diag[i] > 1e-300 ? 1.0 / diag[i] : 1.0;
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return J.transpose() * c.cwiseProduct(J * x);
    };
    Eigen::VectorXd& x = res.depth;
    r = b - apply(x);
    const double bnorm = std::max(b.norm(), 1e-300);
    int inner = 0;
    if (r.norm() > p.inner_tolerance * bnorm) {
      z = diag.cwiseProduct(r);
      d = z;
      double rz = r.dot(z);
      for (; inner < p.max_inner_iterations; ++inner) {
        q = apply(d);
        const double dq = d.dot(q);
        if (!(dq > 0.0)) break;
        const double step = rz / dq;
        x += step * d;
        r -= step * q;
        if (r.norm() <= p.inner_tolerance * bnorm) break;
        z = diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        d = z + (rz_new / rz) * d;
        rz = rz_new;
      }
    }
    const double next = prob.objective(x);
    if (verbose()) {
      log_progress("irls: iteration " + std::to_string(it + 1) + ", " + std::to_string(inner) +
                   " cg steps, objective " + std::to_string(next));
    }
    res.trace.push_back(next);
    res.iterations = it + 1;
    const double decrease = (obj - next) / std::max(std::abs(obj), 1e-300);
    obj = next;
    if (decrease < p.outer_tolerance) break;
  }
  for (Eigen::Index i = 0; i < res.depth.size(); ++i) res.depth[i] = std::max(res.depth[i], p.depth_floor);
  return res;
}

Plane initial_depth(const std::vector<WarpedCandidate>& candidates, const DepthMap& prior) {
  Plane out = prior.depth;
  std::vector<std::pair<double, double>> samples;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    samples.clear();
    for (const auto& c : candidates) {
      if (c.valid[i] && c.confidence[i] > 0.0) samples.emplace_back(c.depth[i], c.confidence[i]);
    }
    if (!samples.empty()) out[i] = lower_weighted_median(samples);
  }
  return out;
}

WarpedCandidate warp_candidate(const DescriptorGrid& query, const Database& db, std::size_t entry,
                               const AlignParams& ap) {
  const DescriptorGrid cand = compute_dense_sift(db.image(entry));
  const WarpField warp = align(query, cand, ap);
  const DepthMap depth = db.depth(entry);
  auto warped = warp_scalar(depth, warp);
  Plane conf = warp_confidence(query, cand, warp);
  for (std::size_t i = 0; i < conf.pixel_count(); ++i) {
    if (!warped.valid[i]) conf[i] = 0.0;
  }
  return WarpedCandidate{std::move(warped.values), std::move(conf), std::move(warped.valid)};
}

ImageInference infer_image(const ImageRGB& image, const Database& db, const InferenceOptions& options) {
  if (db.entries.empty()) throw Error("infer_image: empty database");
  const ImageRGB canon = to_canonical(image, db.width, db.height);
  const GrayImage gray = to_grayscale(canon);
  ImageInference out;
  out.candidates = query_candidates(db, query_features(gray), options.objective.candidates);
  log_progress("infer: " + std::to_string(out.candidates.size()) + " candidates");
  const DescriptorGrid qd = compute_dense_sift(gray);
  const auto cands = candidates_for(qd, db, out.candidates, options.align);
  const AssembledProblem prob = assemble_single(canon, cands, db.prior.depth, options.objective);
  const Plane init = initial_depth(cands, db.prior.depth);
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(init.values().data(), init.values().size());
  const IrlsResult r = irls_solve(prob, x0, options.objective);
  out.trace = r.trace;
  Plane solved(db.width, db.height);
  for (std::size_t i = 0; i < solved.pixel_count(); ++i) solved[i] = r.depth[static_cast<Eigen::Index>(i)];
  out.depth = resize_depth(complete_depth(solved), image.width(), image.height());
  return out;
}

std::vector<Plane> solve_video(const std::vector<ImageRGB>& frames,
                               const std::vector<std::vector<WarpedCandidate>>& candidates, const DepthMap& prior,
                               const VideoTerms& terms, const ObjectiveParams& p) {
  const int n = static_cast<int>(frames.size());
  if (n == 0) throw Error("solve_video: no frames");
  const int w = frames.front().width();
  const int h = frames.front().height();
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  const int window = std::max(1, p.window);
  const int overlap = std::clamp(p.window_overlap, 0, window - 1);
  std::vector<std::pair<int, int>> spans;
  if (n <= window) {
    spans.emplace_back(0, n);
  } else {
    for (int s = 0;; s += window - overlap) {
      const int e = std::min(n, s + window);
      spans.emplace_back(s, e);
      if (e == n) break;
    }
  }
  std::vector<Plane> acc(static_cast<std::size_t>(n), Plane(w, h));
  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const auto [s, e] = spans[k];
    const std::vector<ImageRGB> f(frames.begin() + s, frames.begin() + e);
    const std::vector<std::vector<WarpedCandidate>> c(candidates.begin() + s, candidates.begin() + e);
    VideoTerms t;
    if (!terms.flows.empty()) {
      t.flows.assign(terms.flows.begin() + s, terms.flows.begin() + (e - 1));
      t.flow_confidence.assign(terms.flow_confidence.begin() + s, terms.flow_confidence.begin() + (e - 1));
    }
    if (!terms.motion.empty()) {
      t.motion.assign(terms.motion.begin() + s, terms.motion.begin() + e);
      t.contact.assign(terms.contact.begin() + s, terms.contact.begin() + e);
    }
    const AssembledProblem prob = assemble_video(f, c, prior, t, p);
    Eigen::VectorXd x0(static_cast<Eigen::Index>(hw * (e - s)));
    for (int j = 0; j < e - s; ++j) {
      const Plane init = initial_depth(c[j], prior);
      for (std::size_t i = 0; i < hw; ++i) x0[static_cast<Eigen::Index>(j * hw + i)] = init[i];
    }
    log_progress("video: solving frames " + std::to_string(s) + ".." + std::to_string(e - 1));
    const IrlsResult r = irls_solve(prob, x0, p);
    const int prev_end = k > 0 ? spans[k - 1].second : s;
    const int next_start = k + 1 < spans.size() ? spans[k + 1].first : e;
    for (int tt = s; tt < e; ++tt) {
      double wt = 1.0;
      if (tt < prev_end) wt = static_cast<double>(tt - s + 1) / (prev_end - s + 1);
      if (tt >= next_start) wt = static_cast<double>(e - tt) / (e - next_start + 1);
      Plane& a = acc[static_cast<std::size_t>(tt)];
      for (std::size_t i = 0; i < hw; ++i) a[i] += wt * r.depth[static_cast<Eigen::Index>((tt - s) * hw + i)];
      total[static_cast<std::size_t>(tt)] += wt;
    }
  }
  for (int t = 0; t < n; ++t) {
    for (auto& v : acc[static_cast<std::size_t>(t)].values()) v /= total[static_cast<std::size_t>(t)];
  }
  return acc;
}

VideoInference infer_video(const std::vector<ImageRGB>& frames, const Database& db, const VideoOptions& options) {
  if (frames.empty()) throw Error("infer_video: no frames");
  if (db.entries.empty()) throw Error("infer_video: empty database");
  const std::size_t n = frames.size();
  const int w = db.width;
  const int h = db.height;
  ObjectiveParams p = options.base.objective;
  if (!options.temporal) p.nu = 0.0;

  std::vector<ImageRGB> canon(n);
  std::vector<GrayImage> gray(n);
  parallel_for(n, [&](std::size_t t) {
    canon[t] = to_canonical(frames[t], w, h);
    gray[t] = to_grayscale(canon[t]);
  });

  VideoTerms terms;
  const bool need_flow = n > 1 && (options.temporal || !options.candidates);
  if (n > 1 && need_flow) {
    if (options.flows) {
      if (options.flows->size() != n - 1) throw Error("infer_video: expected frames - 1 flow fields");
      terms.flows = *options.flows;
    } else {
      terms.flows.resize(n - 1);
      parallel_for(n - 1, [&](std::size_t t) { terms.flows[t] = estimate_flow(gray[t], gray[t + 1]); });
    }
    terms.flow_confidence.resize(n - 1);
    parallel_for(n - 1, [&](std::size_t t) {
      terms.flow_confidence[t] = flow_confidence(gray[t], gray[t + 1], terms.flows[t], p.sigmoid_midpoint,
                                                 p.sigmoid_slope);
    });
  }

  std::vector<std::vector<WarpedCandidate>> cands;
  if (options.candidates) {
    if (options.candidates->size() != n) throw Error("infer_video: candidate sets do not match the frame count");
    cands = *options.candidates;
  } else {
    cands.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      FeatureSet q = query_features(gray[t]);
      if (n > 1) {
        const FlowField f = t + 1 < n ? terms.flows[t] : estimate_flow(gray[t], gray[t - 1]);
        q.flow = compute_flow_histogram(f);
      }
      const auto picks = query_candidates(db, q, p.candidates);
      log_progress("video: frame " + std::to_string(t) + " aligning " + std::to_string(picks.size()) + " candidates");
      cands[t] = candidates_for(compute_dense_sift(gray[t]), db, picks, options.base.align);
    }
  }

  VideoInference out;
  if (options.motion && n > 1) {
    out.masks = options.masks ? *options.masks : detect_motion(gray);
    if (out.masks.size() != n) throw Error("infer_video: expected one motion mask per frame");
  } else {
    out.masks.assign(n, MotionMask{Mask(w, h), Raster<int>(w, h), 0});
  }
  if (!options.temporal) {
    terms.flows.clear();
    terms.flow_confidence.clear();
  }
  std::vector<Plane> solved = solve_video(canon, cands, db.prior.depth, terms, p);
  const bool any_motion =
      std::any_of(out.masks.begin(), out.masks.end(), [](const MotionMask& m) { return m.components > 0; });
  if (options.motion && any_motion && p.eta > 0.0) {
    terms.motion.resize(n);
    terms.contact.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      out.first_pass.push_back(complete_depth(solved[t]));
      terms.motion[t] = out.masks[t].mask;
      terms.contact[t] = floor_contact(out.masks[t], out.first_pass.back());
    }
    solved = solve_video(canon, cands, db.prior.depth, terms, p);
  }
  out.depth.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.depth[t] = resize_depth(complete_depth(solved[t]), frames[t].width(), frames[t].height());
  }
  return out;
}

double temporal_variation(const std::vector<Plane>& depth, const std::vector<FlowField>& flows) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t + 1 < depth.size() && t < flows.size(); ++t) {
    const auto d = flow_difference(depth, flows, t);
    for (std::size_t i = 0; i < d.values.pixel_count(); ++i) {
      if (!d.valid[i]) continue;
      sum += std::abs(d.values[i]);
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace dt
