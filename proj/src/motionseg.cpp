#include "depthtransfer/motionseg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "depthtransfer/imagecore.hpp"

namespace dt {

namespace {

double mean_of(const GrayImage& g) { return mean_value(g); }

std::vector<double> patch_vector(const GrayImage& img, double cx, double cy, int r) {
  std::vector<double> p;
  p.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) {
      const auto v = sample_bilinear(img, cx + i, cy + j);
      if (!v) return {};
      p.push_back(*v);
    }
  }
  double mean = 0.0;
  for (double v : p) mean += v;
  mean /= static_cast<double>(p.size());
  double n2 = 0.0;
  for (double& v : p) {
    v -= mean;
    n2 += v * v;
  }
  if (n2 < 1e-10) return {};
  const double inv = 1.0 / std::sqrt(n2);
  for (double& v : p) v *= inv;
  return p;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Eigen::Matrix3d normalizer(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double d = 0.0;
  for (const auto& p : pts) d += (p - c).norm();
  d /= static_cast<double>(pts.size());
  const double s = d > 1e-12 ? std::sqrt(2.0) / d : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return t;
}

std::optional<Homography> dlt(std::span<const Correspondence> m) {
  if (m.size() < 4) return std::nullopt;
  std::vector<Eigen::Vector2d> a, b;
  for (const auto& c : m) {
    a.emplace_back(c.x0, c.y0);
    b.emplace_back(c.x1, c.y1);
  }
  const Eigen::Matrix3d ta = normalizer(a);
  const Eigen::Matrix3d tb = normalizer(b);
  Eigen::MatrixXd A(2 * m.size(), 9);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Eigen::Vector3d p = ta * Eigen::Vector3d(a[i].x(), a[i].y(), 1.0);
    const Eigen::Vector3d q = tb * Eigen::Vector3d(b[i].x(), b[i].y(), 1.0);
    const double x = p.x() / p.z(), y = p.y() / p.z();
    const double u = q.x() / q.z(), v = q.y() / q.z();
    A.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    A.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d full = tb.inverse() * hn * ta;
  if (!full.allFinite() || std::abs(full(2, 2)) < 1e-12) return std::nullopt;
  std::array<double, 9> arr;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) arr[r * 3 + c] = full(r, c);
  }
  try {
    Homography out(arr);
    out.inverse();
    return out;
  } catch (const Error&) {
    return std::nullopt;
  }
}

double reprojection_error(const Homography& h, const Correspondence& c) {
  const auto [x, y] = h.apply(c.x0, c.y0);
  return std::hypot(x - c.x1, y - c.y1);
}

bool collinear(double ax, double ay, double bx, double by, double cx, double cy) {
  return std::abs((bx - ax) * (cy - ay) - (by - ay) * (cx - ax)) < 1e-3;
}

bool degenerate_sample(std::span<const Correspondence> m, const std::array<std::size_t, 4>& idx) {
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        const auto &a = m[idx[i]], &b = m[idx[j]], &c = m[idx[k]];
        if (collinear(a.x0, a.y0, b.x0, b.y0, c.x0, c.y0) || collinear(a.x1, a.y1, b.x1, b.y1, c.x1, c.y1)) {
          return true;
        }
      }
    }
  }
  return false;
}

// Lower median of a non-empty sample, in place.
double lower_median(std::vector<double>& v) {
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

Mask morph(const Mask& m, int radius, bool dilate) {
  if (radius <= 0) return m;
  const int w = m.width();
  const int h = m.height();
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = dilate ? 0 : 1;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius || !m.contains(x + dx, y + dy)) continue;
          const std::uint8_t s = m(x + dx, y + dy) ? 1 : 0;
          v = dilate ? std::max(v, s) : std::min(v, s);
        }
      }
      out(x, y) = v;
    }
  }
  return out;
}

}  // namespace

std::vector<GrayImage> normalize_exposure(const std::vector<GrayImage>& frames) {
  if (frames.size() <= 1) return frames;
  std::size_t ref = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const double m = mean_of(frames[t]);
    if (m < best) {
      best = m;
      ref = t;
    }
  }
  std::vector<GrayImage> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t t) {
    out[t] = t == ref ? frames[t] : histogram_match(frames[t], frames[ref]);
  });
  return out;
}

std::vector<std::pair<double, double>> detect_corners(const GrayImage& img, const StabilizeParams& p) {
  const int w = img.width();
  const int h = img.height();
  Plane ixx(w, h), iyy(w, h), ixy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (img(std::min(x + 1, w - 1), y) - img(std::max(x - 1, 0), y));
      const double gy = 0.5 * (img(x, std::min(y + 1, h - 1)) - img(x, std::max(y - 1, 0)));
      ixx(x, y) = gx * gx;
      iyy(x, y) = gy * gy;
      ixy(x, y) = gx * gy;
    }
  }
  const Plane sxx = gaussian_blur(ixx, 1.5);
  const Plane syy = gaussian_blur(iyy, 1.5);
  const Plane sxy = gaussian_blur(ixy, 1.5);
  Plane r(w, h);
  double rmax = 0.0;
  for (std::size_t i = 0; i < r.pixel_count(); ++i) {
    const double tr = sxx[i] + syy[i];
    r[i] = sxx[i] * syy[i] - sxy[i] * sxy[i] - 0.04 * tr * tr;
    rmax = std::max(rmax, r[i]);
  }
  if (rmax <= 1e-14) return {};
  const int margin = p.patch_radius + 2;
  struct Peak {
    double response;
    int x, y;
  };
  std::vector<Peak> peaks;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const double v = r(x, y);
      if (v < p.corner_quality * rmax) continue;
      bool is_max = true;
      for (int dy = -2; dy <= 2 && is_max; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = r(x + dx, y + dy);
          // Strict against earlier pixels, non-strict against later ones.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? n >= v : n > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({v, x, y});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.response != b.response) return a.response > b.response;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  if (static_cast<int>(peaks.size()) > p.max_corners) peaks.resize(static_cast<std::size_t>(p.max_corners));
  std::vector<std::pair<double, double>> out;
  for (const auto& pk : peaks) {
    auto offset = [](double m, double c, double q) {
      const double denom = m - 2.0 * c + q;
      if (std::abs(denom) < 1e-18) return 0.0;
      return clamp_value(0.5 * (m - q) / denom, -0.5, 0.5);
    };
    const double dx = offset(r(pk.x - 1, pk.y), pk.response, r(pk.x + 1, pk.y));
    const double dy = offset(r(pk.x, pk.y - 1), pk.response, r(pk.x, pk.y + 1));
    out.emplace_back(pk.x + dx, pk.y + dy);
  }
  return out;
}

std::vector<Correspondence> match_corners(const GrayImage& a, const GrayImage& b, const StabilizeParams& p) {
  const auto ca = detect_corners(a, p);
  const auto cb = detect_corners(b, p);
  std::vector<std::vector<double>> da, db;
  std::vector<std::size_t> ia, ib;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    auto d = patch_vector(a, ca[i].first, ca[i].second, p.patch_radius);
    if (!d.empty()) {
      da.push_back(std::move(d));
      ia.push_back(i);
    }
  }
  for (std::size_t i = 0; i < cb.size(); ++i) {
    auto d = patch_vector(b, cb[i].first, cb[i].second, p.patch_radius);
    if (!d.empty()) {
      db.push_back(std::move(d));
      ib.push_back(i);
    }
  }
  const double r2 = p.search_radius * p.search_radius;
  auto best_match = [&](const std::vector<std::pair<double, double>>& from_pts,
                        const std::vector<std::size_t>& from_idx, const std::vector<std::vector<double>>& from_d,
                        const std::vector<std::pair<double, double>>& to_pts, const std::vector<std::size_t>& to_idx,
                        const std::vector<std::vector<double>>& to_d) {
    std::vector<std::pair<int, double>> best(from_d.size(), {-1, -2.0});
    for (std::size_t i = 0; i < from_d.size(); ++i) {
      const auto& pa = from_pts[from_idx[i]];
      for (std::size_t j = 0; j < to_d.size(); ++j) {
        const auto& pb = to_pts[to_idx[j]];
        const double ddx = pa.first - pb.first;
        const double ddy = pa.second - pb.second;
        if (ddx * ddx + ddy * ddy > r2) continue;
        const double s = dot(from_d[i], to_d[j]);
        if (s > best[i].second) best[i] = {static_cast<int>(j), s};
      }
    }
    return best;
  };
  const auto ab = best_match(ca, ia, da, cb, ib, db);
  const auto ba = best_match(cb, ib, db, ca, ia, da);
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < ab.size(); ++i) {
    const int j = ab[i].first;
    if (j < 0 || ba[static_cast<std::size_t>(j)].first != static_cast<int>(i)) continue;
    if (ab[i].second < p.min_ncc) continue;
    const auto& pa = ca[ia[i]];
    const auto& pb = cb[ib[static_cast<std::size_t>(j)]];
    out.push_back({pa.first, pa.second, pb.first, pb.second});
  }
  return out;
}

Homography fit_homography(std::span<const Correspondence> matches) {
  auto h = dlt(matches);
  if (!h) throw Error("fit_homography: degenerate correspondences");
  return *h;
}

HomographyFit ransac_homography(std::span<const Correspondence> m, const StabilizeParams& p) {
  HomographyFit fit;
  fit.inliers.assign(m.size(), false);
  if (static_cast<int>(m.size()) < std::max(4, p.min_correspondences)) return fit;
  std::mt19937 rng(p.seed);
  std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
  std::size_t best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<bool> best_inliers(m.size(), false);
  long limit = p.ransac_iterations;
  for (long it = 0; it < limit; ++it) {
    std::array<std::size_t, 4> idx;
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = pick(rng);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      } while (!fresh);
    }
    if (degenerate_sample(m, idx)) continue;
    std::array<Correspondence, 4> sample{m[idx[0]], m[idx[1]], m[idx[2]], m[idx[3]]};
    const auto h = dlt(sample);
    if (!h) continue;
    std::size_t count = 0;
    double err_sum = 0.0;
    std::vector<bool> inl(m.size(), false);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double e = reprojection_error(*h, m[i]);
      if (e <= p.inlier_threshold) {
        inl[i] = true;
        ++count;
        err_sum += e;
      }
    }
    if (count > best_count || (count == best_count && err_sum < best_err)) {
      best_count = count;
      best_err = err_sum;
      best_inliers = std::move(inl);
      const double ratio = static_cast<double>(count) / static_cast<double>(m.size());
      const double all_good = std::pow(ratio, 4.0);
      if (all_good >= 1.0 - 1e-12) {
        limit = std::min<long>(limit, it + 1);
      } else if (all_good > 0.0) {
        const double need = std::log(1.0 - p.ransac_confidence) / std::log(1.0 - all_good);
        limit = std::min<long>(limit, static_cast<long>(std::ceil(need)));
      }
    }
  }
  if (best_count < 4) return fit;
  // Refit on the consensus set, then refresh it once.
  std::vector<Correspondence> in;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (best_inliers[i]) in.push_back(m[i]);
  }
  auto h = dlt(in);
  if (!h) return fit;
  fit.h = *h;
  for (std::size_t i = 0; i < m.size(); ++i) fit.inliers[i] = reprojection_error(fit.h, m[i]) <= p.inlier_threshold;
  fit.ok = true;
  return fit;
}

Stabilization stabilize(const std::vector<GrayImage>& frames, const StabilizeParams& p) {
  if (frames.empty()) throw Error("stabilize: no frames");
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front())) throw Error("stabilize: frame sizes differ");
  }
  const std::size_t n = frames.size();
  Stabilization s;
  s.reference = (n - 1) / 2;
  s.pair_warning.assign(n > 0 ? n - 1 : 0, false);
  // next_to_cur[t] maps frame t+1 into frame t.
  std::vector<Homography> next_to_cur(n > 0 ? n - 1 : 0);
  std::vector<int> warn(next_to_cur.size(), 0);
  parallel_for(next_to_cur.size(), [&](std::size_t t) {
    const auto matches = match_corners(frames[t + 1], frames[t], p);
    StabilizeParams local = p;
    local.seed = p.seed + static_cast<std::uint32_t>(t);
    const auto fit = ransac_homography(matches, local);
    if (fit.ok) {
      next_to_cur[t] = fit.h;
    } else {
      warn[t] = 1;
    }
  });
  for (std::size_t t = 0; t < warn.size(); ++t) {
    s.pair_warning[t] = warn[t] != 0;
    if (warn[t]) log_progress("stabilize: too few correspondences between frames " + std::to_string(t) + " and " +
                              std::to_string(t + 1) + ", using identity");
  }
  s.to_reference.assign(n, Homography::identity());
  for (std::size_t t = s.reference + 1; t < n; ++t) {
    s.to_reference[t] = s.to_reference[t - 1].compose(next_to_cur[t - 1]);
  }
  for (std::size_t t = s.reference; t-- > 0;) {
    s.to_reference[t] = s.to_reference[t + 1].compose(next_to_cur[t].inverse());
  }
  s.warped.resize(n);
  s.coverage.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto w = warp_bilinear(frames[t], s.to_reference[t]);
    s.warped[t] = GrayImage(std::move(w.image));
    s.coverage[t] = std::move(w.coverage);
  }
  return s;
}

Background extract_background(const std::vector<GrayImage>& warped, const std::vector<Mask>& coverage) {
  if (warped.empty() || warped.size() != coverage.size()) throw Error("extract_background: bad inputs");
  const int w = warped.front().width();
  const int h = warped.front().height();
  Background b{GrayImage(w, h), Mask(w, h)};
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> samples;
    for (int x = 0; x < w; ++x) {
      samples.clear();
      for (std::size_t t = 0; t < warped.size(); ++t) {
        if (coverage[t](x, y)) samples.push_back(warped[t](x, y));
      }
      if (samples.empty()) continue;
      b.image(x, y) = lower_median(samples);
      b.valid(x, y) = 1;
    }
  });
  return b;
}

ImageRGB extract_background_rgb(const std::vector<ImageRGB>& warped, const std::vector<Mask>& coverage,
                                Mask* valid) {
  if (warped.empty() || warped.size() != coverage.size()) throw Error("extract_background_rgb: bad inputs");
  const int w = warped.front().width();
  const int h = warped.front().height();
  ImageRGB out(w, h);
  Mask ok(w, h);
  std::vector<double> samples;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        samples.clear();
        for (std::size_t t = 0; t < warped.size(); ++t) {
          if (coverage[t](x, y)) samples.push_back(warped[t](x, y, c));
        }
        if (samples.empty()) continue;
        out(x, y, c) = lower_median(samples);
        ok(x, y) = 1;
      }
    }
  }
  if (valid) *valid = std::move(ok);
  return out;
}

Plane motion_statistic(const GrayImage& warped, const Background& bg, const FlowField& flow, double floor) {
  Plane s(warped.width(), warped.height());
  for (std::size_t i = 0; i < s.pixel_count(); ++i) {
    if (!bg.valid[i]) continue;
    const double d = warped[i] - bg.image[i];
    s[i] = std::hypot(flow.u[i], flow.v[i]) * (d * d) / std::max(bg.image[i], floor);
  }
  return s;
}

Mask morph_open(const Mask& m, int radius) { return morph(morph(m, radius, false), radius, true); }
Mask morph_close(const Mask& m, int radius) { return morph(morph(m, radius, true), radius, false); }

MotionMask label_components(const Mask& m, int min_size) {
  const int w = m.width();
  const int h = m.height();
  MotionMask out{Mask(w, h), Raster<int>(w, h), 0};
  Raster<int> seen(w, h);
  std::vector<std::pair<int, int>> stack, pixels;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m(x, y) || seen(x, y)) continue;
      pixels.clear();
      stack.assign(1, {x, y});
      seen(x, y) = 1;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        pixels.emplace_back(cx, cy);
        const int nx[4] = {cx - 1, cx + 1, cx, cx};
        const int ny[4] = {cy, cy, cy - 1, cy + 1};
        for (int k = 0; k < 4; ++k) {
          if (m.contains(nx[k], ny[k]) && m(nx[k], ny[k]) && !seen(nx[k], ny[k])) {
            seen(nx[k], ny[k]) = 1;
            stack.emplace_back(nx[k], ny[k]);
          }
        }
      }
      if (static_cast<int>(pixels.size()) < min_size) continue;
      const int label = ++out.components;
      for (const auto& [px, py] : pixels) {
        out.mask(px, py) = 1;
        out.labels(px, py) = label;
      }
    }
  }
  return out;
}

std::vector<MotionMask> segment(const std::vector<GrayImage>& warped, const std::vector<FlowField>& flows,
                                const Background& background, const std::vector<Homography>& to_reference,
                                const MotionParams& p) {
  if (warped.size() != flows.size() || warped.size() != to_reference.size()) {
    throw Error("segment: frame, flow and homography counts differ");
  }
  std::vector<MotionMask> out(warped.size());
  parallel_for(warped.size(), [&](std::size_t t) {
    const Plane stat = motion_statistic(warped[t], background, flows[t], p.background_floor);
    const int w = stat.width();
    const int h = stat.height();
    Mask original(w, h);
    const Homography& ht = to_reference[t];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto [rx, ry] = ht.apply(x, y);
        const long ix = std::lround(rx);
        const long iy = std::lround(ry);
        if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;
        original(x, y) = stat(static_cast<int>(ix), static_cast<int>(iy)) > p.tau ? 1 : 0;
      }
    }
    const Mask cleaned = morph_close(morph_open(original, p.open_radius), p.close_radius);
    out[t] = label_components(cleaned, p.min_component);
  });
  return out;
}

std::vector<MotionMask> detect_motion(const std::vector<GrayImage>& frames, const MotionParams& params,
                                      const StabilizeParams& stab) {
  if (frames.empty()) throw Error("detect_motion: no frames");
  const int w = frames.front().width();
  const int h = frames.front().height();
  if (frames.size() < 2) return {MotionMask{Mask(w, h), Raster<int>(w, h), 0}};
  const auto normalized = normalize_exposure(frames);
  const Stabilization s = stabilize(normalized, stab);
  Background bg = extract_background(s.warped, s.coverage);
  // Pixels outside a frame's coverage carry no signal for that frame.
  const std::size_t n = frames.size();
  std::vector<FlowField> flows(n);
  parallel_for(n, [&](std::size_t t) {
    flows[t] = t + 1 < n ? estimate_flow(s.warped[t], s.warped[t + 1]) : estimate_flow(s.warped[t], s.warped[t - 1]);
    for (std::size_t i = 0; i < flows[t].u.pixel_count(); ++i) {
      if (!s.coverage[t][i]) {
        flows[t].u[i] = 0.0;
        flows[t].v[i] = 0.0;
      }
    }
  });
  return segment(s.warped, flows, bg, s.to_reference, params);
}

FloorContactDepth floor_contact(const MotionMask& mask, const DepthMap& first_pass, int band) {
  const int w = mask.mask.width();
  const int h = mask.mask.height();
  if (first_pass.width() != w || first_pass.height() != h) throw Error("floor_contact: size mismatch");
  FloorContactDepth out{Plane(w, h), Mask(w, h)};
  if (mask.components == 0) return out;
  struct Extent {
    int x0 = std::numeric_limits<int>::max();
    int x1 = -1;
    int y1 = -1;
  };
  std::vector<Extent> ext(static_cast<std::size_t>(mask.components) + 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = mask.labels(x, y);
      if (l <= 0) continue;
      auto& e = ext[static_cast<std::size_t>(l)];
      e.x0 = std::min(e.x0, x);
      e.x1 = std::max(e.x1, x);
      e.y1 = std::max(e.y1, y);
    }
  }
  std::vector<double> value(ext.size(), 0.0);
  std::vector<bool> has(ext.size(), false);
  for (std::size_t l = 1; l < ext.size(); ++l) {
    const auto& e = ext[l];
    if (e.y1 < 0) continue;
    std::vector<double> samples;
    for (int y = e.y1 + 1; y <= std::min(h - 1, e.y1 + band); ++y) {
      for (int x = e.x0; x <= e.x1; ++x) {
        if (!mask.mask(x, y) && first_pass.is_valid(x, y)) samples.push_back(first_pass.depth(x, y));
      }
    }
    if (samples.empty()) {
      for (int x = e.x0; x <= e.x1; ++x) {
        if (first_pass.is_valid(x, e.y1)) samples.push_back(first_pass.depth(x, e.y1));
      }
    }
    if (samples.empty()) continue;
    value[l] = lower_median(samples);
    has[l] = value[l] > 0.0;
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = mask.labels(x, y);
      if (l > 0 && has[static_cast<std::size_t>(l)]) {
        out.depth(x, y) = value[static_cast<std::size_t>(l)];
        out.defined(x, y) = 1;
      }
    }
  }
  return out;
}

}  // namespace dt
