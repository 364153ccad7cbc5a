#include "depthtransfer/align.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "depthtransfer/imagecore.hpp"

namespace dt {

namespace {

// Quantized descriptor units to "x255" units: value * 255 = q * 0.2.
constexpr double kUnitsPer255 = DescriptorGrid::kStep * 255.0;

int l1_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  int s = 0;
  for (int k = 0; k < kSiftLength; ++k) s += std::abs(static_cast<int>(a[k]) - static_cast<int>(b[k]));
  return s;
}

double l2_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  double s = 0.0;
  for (int k = 0; k < kSiftLength; ++k) {
    const double d = (static_cast<int>(a[k]) - static_cast<int>(b[k])) * DescriptorGrid::kStep;
    s += d * d;
  }
  return std::sqrt(s);
}

double data_cost(const DescriptorGrid& q, const DescriptorGrid& c, int x, int y, int u, int v, double trunc) {
  const int tx = x + u;
  const int ty = y + v;
  if (tx < 0 || ty < 0 || tx >= c.width() || ty >= c.height()) return trunc;
  return std::min(l1_distance(q.descriptor(x, y), c.descriptor(tx, ty)) * kUnitsPer255, trunc);
}

double pair_cost(int au, int av, int bu, int bv, double mu, double d) {
  return std::min(mu * std::abs(au - bu), d) + std::min(mu * std::abs(av - bv), d);
}

DescriptorGrid downsample(const DescriptorGrid& g) {
  const int w = std::max(1, g.width() / 2);
  const int h = std::max(1, g.height() / 2);
  DescriptorGrid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::min(2 * x, g.width() - 1);
      const int x1 = std::min(2 * x + 1, g.width() - 1);
      const int y0 = std::min(2 * y, g.height() - 1);
      const int y1 = std::min(2 * y + 1, g.height() - 1);
      auto a = g.descriptor(x0, y0);
      auto b = g.descriptor(x1, y0);
      auto c = g.descriptor(x0, y1);
      auto d = g.descriptor(x1, y1);
      auto o = out.descriptor(x, y);
      for (int k = 0; k < kSiftLength; ++k) {
        o[k] = static_cast<std::uint8_t>((a[k] + b[k] + c[k] + d[k]) / 4);
      }
    }
  }
  return out;
}

// out[t] = min_k in[k] + min(mu |k - (t + shift)|, trunc), for t, k in [0, n).
void distance_transform_1d(const double* in, int n, int shift, double mu, double trunc, double* env,
                           double* out) {
  double lowest = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    env[k] = in[k];
    lowest = std::min(lowest, in[k]);
  }
  for (int k = 1; k < n; ++k) env[k] = std::min(env[k], env[k - 1] + mu);
  for (int k = n - 2; k >= 0; --k) env[k] = std::min(env[k], env[k + 1] + mu);
  for (int t = 0; t < n; ++t) {
    const int q = t + shift;
    double val;
    if (q < 0) {
      val = env[0] - mu * q;
    } else if (q >= n) {
      val = env[n - 1] + mu * (q - n + 1);
    } else {
      val = env[q];
    }
    out[t] = std::min(val, lowest + trunc);
  }
}

class LevelSolver {
 public:
  LevelSolver(const DescriptorGrid& q, const DescriptorGrid& c, const AlignParams& p, std::vector<int> cu,
              std::vector<int> cv)
      : q_(q), c_(c), p_(p), w_(q.width()), h_(q.height()), r_(p.search_radius), n_(2 * r_ + 1),
        labels_(n_ * n_), cu_(std::move(cu)), cv_(std::move(cv)),
        label_(static_cast<std::size_t>(w_) * h_, r_ * n_ + r_) {
    cost_.resize(static_cast<std::size_t>(w_) * h_ * labels_);
    parallel_for(static_cast<std::size_t>(h_), [&](std::size_t row) {
      const int y = static_cast<int>(row);
      for (int x = 0; x < w_; ++x) {
        const std::size_t p0 = pixel(x, y);
        for (int l = 0; l < labels_; ++l) {
          const int u = abs_u(p0, l);
          const int v = abs_v(p0, l);
          cost_[p0 * labels_ + l] = static_cast<float>(
              data_cost(q_, c_, x, y, u, v, p_.data_truncation) +
              p_.displacement_weight * (std::abs(u) + std::abs(v)));
        }
      }
    });
  }

  void run() {
    belief_propagation();
    for (int sweep = 0; sweep < p_.sweeps; ++sweep) {
      int changed = 0;
      for (int parity = 0; parity < 2; ++parity) changed += pass(true, parity);
      for (int parity = 0; parity < 2; ++parity) changed += pass(false, parity);
      if (changed == 0) break;
    }
  }

  int displacement_u(int x, int y) const { return abs_u(pixel(x, y), label_[pixel(x, y)]); }
  int displacement_v(int x, int y) const { return abs_v(pixel(x, y), label_[pixel(x, y)]); }

 private:
  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  int abs_u(std::size_t p, int l) const { return cu_[p] + l % n_ - r_; }
  int abs_v(std::size_t p, int l) const { return cv_[p] + l / n_ - r_; }

  // Min-sum loopy belief propagation with directional sweeps. Messages live
  // in the receiver's label space; msg_[d] holds what each pixel receives
  // from its neighbour on side d (left, right, up, down).
  void belief_propagation() {
    const std::size_t total = static_cast<std::size_t>(w_) * h_ * labels_;
    std::array<std::vector<float>, 4> msg;
    for (auto& m : msg) m.assign(total, 0.0f);
    const int iterations = std::max(1, p_.sweeps / 3);
    for (int it = 0; it < iterations; ++it) {
      // Left to right sends into the left slot of the right neighbour, etc.
      sweep_rows(msg, +1);
      sweep_rows(msg, -1);
      sweep_cols(msg, +1);
      sweep_cols(msg, -1);
    }
    parallel_for(static_cast<std::size_t>(w_) * h_, [&](std::size_t p) {
      int best = 0;
      double best_val = std::numeric_limits<double>::infinity();
      for (int l = 0; l < labels_; ++l) {
        double b = cost_[p * labels_ + l];
        for (const auto& m : msg) b += m[p * labels_ + l];
        if (b < best_val) {
          best_val = b;
          best = l;
        }
      }
      label_[p] = best;
    });
  }

  // Message from `from` to `to`, excluding what `to` sent back (slot `back`
  // of `from`), written into slot `into` of `to`.
  void send(std::array<std::vector<float>, 4>& msg, std::size_t from, std::size_t to, int back, int into,
            std::vector<double>& h, std::vector<double>& tmp, std::vector<double>& env, std::vector<double>& line_in,
            std::vector<double>& line_out) const {
    for (int l = 0; l < labels_; ++l) {
      double v = cost_[from * labels_ + l];
      for (int d = 0; d < 4; ++d) {
        if (d != back) v += msg[d][from * labels_ + l];
      }
      h[l] = v;
    }
    const double mu = p_.smoothness_weight;
    const double tr = p_.smoothness_truncation;
    const int du = cu_[to] - cu_[from];
    const int dv = cv_[to] - cv_[from];
    for (int j = 0; j < n_; ++j) distance_transform_1d(h.data() + j * n_, n_, du, mu, tr, env.data(), tmp.data() + j * n_);
    double lowest = std::numeric_limits<double>::infinity();
    float* out = &msg[into][to * labels_];
    for (int t = 0; t < n_; ++t) {
      for (int j = 0; j < n_; ++j) line_in[j] = tmp[j * n_ + t];
      distance_transform_1d(line_in.data(), n_, dv, mu, tr, env.data(), line_out.data());
      for (int j = 0; j < n_; ++j) {
        out[j * n_ + t] = static_cast<float>(line_out[j]);
        lowest = std::min(lowest, line_out[j]);
      }
    }
    for (int l = 0; l < labels_; ++l) out[l] -= static_cast<float>(lowest);
  }

  struct Scratch {
    std::vector<double> h, tmp, env, line_in, line_out;
    explicit Scratch(int labels, int n) : h(labels), tmp(labels), env(n), line_in(n), line_out(n) {}
  };

  void sweep_rows(std::array<std::vector<float>, 4>& msg, int dir) {
    parallel_for(static_cast<std::size_t>(h_), [&](std::size_t row) {
      Scratch s(labels_, n_);
      const int y = static_cast<int>(row);
      for (int i = 0; i + 1 < w_; ++i) {
        const int x = dir > 0 ? i : w_ - 1 - i;
        // dir > 0: receiver is to the right and hears us on its left (slot 0).
        send(msg, pixel(x, y), pixel(x + dir, y), dir > 0 ? 1 : 0, dir > 0 ? 0 : 1, s.h, s.tmp, s.env, s.line_in,
             s.line_out);
      }
    });
  }

  void sweep_cols(std::array<std::vector<float>, 4>& msg, int dir) {
    parallel_for(static_cast<std::size_t>(w_), [&](std::size_t col) {
      Scratch s(labels_, n_);
      const int x = static_cast<int>(col);
      for (int i = 0; i + 1 < h_; ++i) {
        const int y = dir > 0 ? i : h_ - 1 - i;
        send(msg, pixel(x, y), pixel(x, y + dir), dir > 0 ? 3 : 2, dir > 0 ? 2 : 3, s.h, s.tmp, s.env, s.line_in,
             s.line_out);
      }
    });
  }

  // Exact minimisation over every row (or column) of one parity with the
  // rest of the field held fixed.
  int pass(bool horizontal, int parity) {
    const int chains = horizontal ? h_ : w_;
    const int count = (chains - parity + 1) / 2;
    std::vector<int> changed(static_cast<std::size_t>(std::max(count, 0)), 0);
    parallel_for(changed.size(), [&](std::size_t i) {
      const int index = parity + 2 * static_cast<int>(i);
      changed[i] = solve_chain(horizontal, index);
    });
    int total = 0;
    for (int c : changed) total += c;
    return total;
  }

  int solve_chain(bool horizontal, int index) {
    const int m = horizontal ? w_ : h_;
    const double mu = p_.smoothness_weight;
    const double d = p_.smoothness_truncation;
    std::vector<std::size_t> pix(m);
    for (int i = 0; i < m; ++i) pix[i] = horizontal ? pixel(i, index) : pixel(index, i);

    std::vector<double> cum(static_cast<std::size_t>(m) * labels_);
    std::vector<double> tmp(labels_), msg(labels_), env(n_), line_in(n_), line_out(n_);
    for (int i = 0; i < m; ++i) {
      const std::size_t p = pix[i];
      const int x = horizontal ? i : index;
      const int y = horizontal ? index : i;
      double* row = &cum[static_cast<std::size_t>(i) * labels_];
      for (int l = 0; l < labels_; ++l) row[l] = cost_[p * labels_ + l];
      // Neighbours across the chain are held fixed.
      auto add_fixed = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w_ || ny >= h_) return;
        const std::size_t qn = pixel(nx, ny);
        const int bu = abs_u(qn, label_[qn]);
        const int bv = abs_v(qn, label_[qn]);
        for (int l = 0; l < labels_; ++l) row[l] += pair_cost(abs_u(p, l), abs_v(p, l), bu, bv, mu, d);
      };
      if (horizontal) {
        add_fixed(x, y - 1);
        add_fixed(x, y + 1);
      } else {
        add_fixed(x - 1, y);
        add_fixed(x + 1, y);
      }
      if (i == 0) continue;
      const std::size_t prev = pix[i - 1];
      const int du = cu_[p] - cu_[prev];
      const int dv = cv_[p] - cv_[prev];
      const double* prev_row = &cum[static_cast<std::size_t>(i - 1) * labels_];
      for (int j = 0; j < n_; ++j) {
        distance_transform_1d(prev_row + j * n_, n_, du, mu, d, env.data(), tmp.data() + j * n_);
      }
      for (int t = 0; t < n_; ++t) {
        for (int j = 0; j < n_; ++j) line_in[j] = tmp[j * n_ + t];
        distance_transform_1d(line_in.data(), n_, dv, mu, d, env.data(), line_out.data());
        for (int j = 0; j < n_; ++j) msg[j * n_ + t] = line_out[j];
      }
      for (int l = 0; l < labels_; ++l) row[l] += msg[l];
    }

    auto pick = [&](std::size_t p, auto&& value) {
      int best = label_[p];
      double best_val = value(best);
      for (int l = 0; l < labels_; ++l) {
        const double val = value(l);
        if (val < best_val - 1e-9) {
          best_val = val;
          best = l;
        }
      }
      return best;
    };
    int changed = 0;
    std::vector<int> chosen(m);
    {
      const double* last = &cum[static_cast<std::size_t>(m - 1) * labels_];
      chosen[m - 1] = pick(pix[m - 1], [&](int l) { return last[l]; });
    }
    for (int i = m - 2; i >= 0; --i) {
      const std::size_t p = pix[i];
      const std::size_t nxt = pix[i + 1];
      const int bu = abs_u(nxt, chosen[i + 1]);
      const int bv = abs_v(nxt, chosen[i + 1]);
      const double* row = &cum[static_cast<std::size_t>(i) * labels_];
      chosen[i] = pick(p, [&](int l) { return row[l] + pair_cost(abs_u(p, l), abs_v(p, l), bu, bv, mu, d); });
    }
    for (int i = 0; i < m; ++i) {
      if (label_[pix[i]] != chosen[i]) {
        label_[pix[i]] = chosen[i];
        ++changed;
      }
    }
    return changed;
  }

  const DescriptorGrid& q_;
  const DescriptorGrid& c_;
  const AlignParams& p_;
  int w_, h_, r_, n_, labels_;
  std::vector<int> cu_, cv_;
  std::vector<int> label_;
  std::vector<float> cost_;
};

void fill_residuals(const DescriptorGrid& q, const DescriptorGrid& c, WarpField& w) {
  for (int y = 0; y < w.height(); ++y) {
    for (int x = 0; x < w.width(); ++x) {
      const int tx = x + static_cast<int>(std::lround(w.u(x, y)));
      const int ty = y + static_cast<int>(std::lround(w.v(x, y)));
      const bool inside = tx >= 0 && ty >= 0 && tx < c.width() && ty < c.height();
      w.valid(x, y) = inside ? 1 : 0;
      w.residual(x, y) = inside ? l2_distance(q.descriptor(x, y), c.descriptor(tx, ty)) : 0.0;
    }
  }
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace

double alignment_energy(const DescriptorGrid& query, const DescriptorGrid& candidate, const Plane& u,
                        const Plane& v, const AlignParams& p) {
  const int w = query.width();
  const int h = query.height();
  auto iu = [&](int x, int y) { return static_cast<int>(std::lround(u(x, y))); };
  auto iv = [&](int x, int y) { return static_cast<int>(std::lround(v(x, y))); };
  double e = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = iu(x, y);
      const int b = iv(x, y);
      e += data_cost(query, candidate, x, y, a, b, p.data_truncation);
      e += p.displacement_weight * (std::abs(a) + std::abs(b));
      if (x + 1 < w) e += pair_cost(a, b, iu(x + 1, y), iv(x + 1, y), p.smoothness_weight, p.smoothness_truncation);
      if (y + 1 < h) e += pair_cost(a, b, iu(x, y + 1), iv(x, y + 1), p.smoothness_weight, p.smoothness_truncation);
    }
  }
  return e;
}

WarpField zero_warp(const DescriptorGrid& query, const DescriptorGrid& candidate, const AlignParams& params) {
  WarpField w(query.width(), query.height());
  fill_residuals(query, candidate, w);
  w.energy = alignment_energy(query, candidate, w.u, w.v, params);
  return w;
}

WarpField align(const DescriptorGrid& query, const DescriptorGrid& candidate, const AlignParams& params) {
  if (query.width() != candidate.width() || query.height() != candidate.height()) {
    throw Error("align: descriptor grids differ in size");
  }
  if (params.search_radius < 1) throw Error("align: search radius must be >= 1");
  if (params.pyramid_levels < 1) throw Error("align: need at least one pyramid level");

  std::vector<DescriptorGrid> qs{query}, cs{candidate};
  for (int k = 1; k < params.pyramid_levels; ++k) {
    if (qs.back().width() < 4 || qs.back().height() < 4) break;
    qs.push_back(downsample(qs.back()));
    cs.push_back(downsample(cs.back()));
  }

  std::vector<int> prev_u, prev_v;
  int prev_w = 0;
  int prev_h = 0;
  for (int k = static_cast<int>(qs.size()) - 1; k >= 0; --k) {
    const int w = qs[k].width();
    const int h = qs[k].height();
    std::vector<int> cu(static_cast<std::size_t>(w) * h, 0), cv(cu.size(), 0);
    if (!prev_u.empty()) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t src = static_cast<std::size_t>(std::min(y / 2, prev_h - 1)) * prev_w +
                                  std::min(x / 2, prev_w - 1);
          cu[static_cast<std::size_t>(y) * w + x] = 2 * prev_u[src];
          cv[static_cast<std::size_t>(y) * w + x] = 2 * prev_v[src];
        }
      }
    }
    LevelSolver solver(qs[k], cs[k], params, std::move(cu), std::move(cv));
    solver.run();
    prev_u.assign(static_cast<std::size_t>(w) * h, 0);
    prev_v.assign(prev_u.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        prev_u[static_cast<std::size_t>(y) * w + x] = solver.displacement_u(x, y);
        prev_v[static_cast<std::size_t>(y) * w + x] = solver.displacement_v(x, y);
      }
    }
    prev_w = w;
    prev_h = h;
  }

  WarpField result(query.width(), query.height());
  for (std::size_t i = 0; i < result.u.pixel_count(); ++i) {
    result.u[i] = prev_u[i];
    result.v[i] = prev_v[i];
  }
  fill_residuals(query, candidate, result);
  result.energy = alignment_energy(query, candidate, result.u, result.v, params);

  WarpField zero = zero_warp(query, candidate, params);
  if (zero.energy <= result.energy) return zero;
  return result;
}

WarpedScalar warp_scalar(const Plane& field, const WarpField& warp) {
  const int w = warp.width();
  const int h = warp.height();
  WarpedScalar out{Plane(w, h), Mask(w, h, 1, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto s = sample_bilinear(field, x + warp.u(x, y), y + warp.v(x, y));
      if (!s) continue;
      out.values(x, y) = *s;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

WarpedScalar warp_scalar(const DepthMap& depth, const WarpField& warp) {
  const int w = warp.width();
  const int h = warp.height();
  const int dw = depth.width();
  const int dh = depth.height();
  WarpedScalar out{Plane(w, h), Mask(w, h, 1, 0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = x + warp.u(x, y);
      const double sy = y + warp.v(x, y);
      if (!(sx >= -1e-9 && sy >= -1e-9 && sx <= dw - 1 + 1e-9 && sy <= dh - 1 + 1e-9)) continue;
      const double cx = clamp_value(sx, 0.0, dw - 1.0);
      const double cy = clamp_value(sy, 0.0, dh - 1.0);
      const int x0 = static_cast<int>(std::floor(cx));
      const int y0 = static_cast<int>(std::floor(cy));
      const double fx = cx - x0;
      const double fy = cy - y0;
      const int xs[2] = {x0, std::min(x0 + 1, dw - 1)};
      const int ys[2] = {y0, std::min(y0 + 1, dh - 1)};
      const double wx[2] = {1.0 - fx, fx};
      const double wy[2] = {1.0 - fy, fy};
      double acc = 0.0;
      bool ok = true;
      for (int j = 0; j < 2 && ok; ++j) {
        for (int i = 0; i < 2 && ok; ++i) {
          const double wt = wx[i] * wy[j];
          if (wt == 0.0) continue;
          if (!depth.is_valid(xs[i], ys[j])) {
            ok = false;
          } else {
            acc += wt * depth.depth(xs[i], ys[j]);
          }
        }
      }
      if (!ok) continue;
      out.values(x, y) = acc;
      out.valid(x, y) = 1;
    }
  }
  return out;
}

Plane warp_confidence(const Plane& residual, const Mask& valid) {
  std::vector<double> r;
  r.reserve(residual.pixel_count());
  for (std::size_t i = 0; i < residual.pixel_count(); ++i) {
    if (valid[i]) r.push_back(residual[i]);
  }
  const double sigma = std::max(median_of(std::move(r)), 1e-3);
  Plane w(residual.width(), residual.height());
  for (std::size_t i = 0; i < w.pixel_count(); ++i) {
    w[i] = valid[i] ? std::exp(-(residual[i] * residual[i]) / (sigma * sigma)) : 0.0;
  }
  return w;
}

Plane warp_confidence(const DescriptorGrid& query, const DescriptorGrid& candidate, const WarpField& warp) {
  if (query.width() != warp.width() || query.height() != warp.height()) {
    throw Error("warp_confidence: dimensions differ");
  }
  WarpField w = warp;
  fill_residuals(query, candidate, w);
  for (std::size_t i = 0; i < w.valid.pixel_count(); ++i) w.valid[i] = w.valid[i] && warp.valid[i];
  return warp_confidence(w.residual, w.valid);
}

}  // namespace dt
