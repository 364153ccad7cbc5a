#include "depthtransfer/flow.hpp"

#include <cmath>

#include "depthtransfer/imagecore.hpp"

namespace dt {

void FlowField::update_validity() {
  const int w = width();
  const int h = height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tx = x + u(x, y);
      const double ty = y + v(x, y);
      const bool finite = std::isfinite(tx) && std::isfinite(ty);
      valid(x, y) = (finite && tx >= 0.0 && ty >= 0.0 && tx <= w - 1 && ty <= h - 1) ? 1 : 0;
    }
  }
}

namespace {

// Separable 5-tap filtering with replicated borders.
Plane filter_hv(const Plane& img, const double (&kx)[5], const double (&ky)[5]) {
  const int w = img.width();
  const int h = img.height();
  Plane tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += kx[i + 2] * img(clamp_value(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += ky[i + 2] * tmp(x, clamp_value(y + i, 0, h - 1));
      out(x, y) = s;
    }
  }
  return out;
}

constexpr double kSmooth[5] = {0.02, 0.11, 0.74, 0.11, 0.02};
constexpr double kDeriv[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
constexpr double kIdentity[5] = {0, 0, 1, 0, 0};

// Warps b toward a: out(x) = b(x + flow(x)), border-clamped sampling.
Plane warp_by_flow(const Plane& b, const Plane& u, const Plane& v, Mask* inside) {
  const int w = b.width();
  const int h = b.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = x + u(x, y);
      const double sy = y + v(x, y);
      const bool in = sx >= 0.0 && sy >= 0.0 && sx <= w - 1 && sy <= h - 1;
      if (inside) (*inside)(x, y) = in ? 1 : 0;
      out(x, y) = *sample_bilinear(b, clamp_value(sx, 0.0, w - 1.0), clamp_value(sy, 0.0, h - 1.0));
    }
  }
  return out;
}

// div(phi grad f) on forward-difference edges; phi(x,y) weights the edges to
// the right and below of (x,y).
Plane weighted_laplacian(const Plane& f, const Plane& phi) {
  const int w = f.width();
  const int h = f.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      if (x + 1 < w) s += phi(x, y) * (f(x + 1, y) - f(x, y));
      if (x > 0) s -= phi(x - 1, y) * (f(x, y) - f(x - 1, y));
      if (y + 1 < h) s += phi(x, y) * (f(x, y + 1) - f(x, y));
      if (y > 0) s -= phi(x, y - 1) * (f(x, y) - f(x, y - 1));
      out(x, y) = s;
    }
  }
  return out;
}

void refine_level(const Plane& a, const Plane& b, Plane& u, Plane& v, const FlowParams& p) {
  const int w = a.width();
  const int h = a.height();
  const std::size_t n = a.pixel_count();
  const double alpha = p.smoothness;
  const double eps2 = p.charbonnier_epsilon * p.charbonnier_epsilon;
  const Plane a_s = filter_hv(a, kSmooth, kSmooth);
  const Plane b_s = filter_hv(b, kSmooth, kSmooth);

  Mask inside(w, h);
  Plane du(w, h), dv(w, h), phi(w, h), psi(w, h);
  for (int outer = 0; outer < p.warp_iterations; ++outer) {
    const Plane warped = warp_by_flow(b_s, u, v, &inside);
    Plane blend(w, h);
    for (std::size_t i = 0; i < n; ++i) blend[i] = 0.4 * a_s[i] + 0.6 * warped[i];
    const Plane ix = filter_hv(blend, kDeriv, kIdentity);
    const Plane iy = filter_hv(blend, kIdentity, kDeriv);
    Plane it(w, h);
    for (std::size_t i = 0; i < n; ++i) it[i] = warped[i] - a_s[i];

    du.fill(0.0);
    dv.fill(0.0);

    // Smoothness weights from the current total flow.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double ux = x + 1 < w ? u(x + 1, y) - u(x, y) : 0.0;
        const double uy = y + 1 < h ? u(x, y + 1) - u(x, y) : 0.0;
        const double vx = x + 1 < w ? v(x + 1, y) - v(x, y) : 0.0;
        const double vy = y + 1 < h ? v(x, y + 1) - v(x, y) : 0.0;
        phi(x, y) = 0.5 / std::sqrt(ux * ux + uy * uy + vx * vx + vy * vy + eps2);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      psi[i] = inside[i] ? 0.5 / std::sqrt(it[i] * it[i] + eps2) : 0.0;
    }
    const Plane lap_u = weighted_laplacian(u, phi);
    const Plane lap_v = weighted_laplacian(v, phi);
    Plane rhs_u(w, h), rhs_v(w, h), a11(w, h), a22(w, h), a12(w, h);
    for (std::size_t i = 0; i < n; ++i) {
      a11[i] = psi[i] * ix[i] * ix[i];
      a22[i] = psi[i] * iy[i] * iy[i];
      a12[i] = psi[i] * ix[i] * iy[i];
      rhs_u[i] = -psi[i] * ix[i] * it[i] + alpha * lap_u[i];
      rhs_v[i] = -psi[i] * iy[i] * it[i] + alpha * lap_v[i];
    }

    const double omega = p.sor_omega;
    for (int sweep = 0; sweep < p.solver_sweeps; ++sweep) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double su = 0.0, sv = 0.0, coeff = 0.0;
          auto edge = [&](int nx, int ny, double wgt) {
            su += wgt * du(nx, ny);
            sv += wgt * dv(nx, ny);
            coeff += wgt;
          };
          if (x > 0) edge(x - 1, y, phi(x - 1, y));
          if (x + 1 < w) edge(x + 1, y, phi(x, y));
          if (y > 0) edge(x, y - 1, phi(x, y - 1));
          if (y + 1 < h) edge(x, y + 1, phi(x, y));
          const std::size_t i = a.index(x, y);
          const double diag_u = a11[i] + alpha * coeff + alpha * 0.05;
          const double diag_v = a22[i] + alpha * coeff + alpha * 0.05;
          const double nu = (rhs_u[i] + alpha * su - a12[i] * dv[i]) / diag_u;
          du[i] = (1.0 - omega) * du[i] + omega * nu;
          const double nv = (rhs_v[i] + alpha * sv - a12[i] * du[i]) / diag_v;
          dv[i] = (1.0 - omega) * dv[i] + omega * nv;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += du[i];
      v[i] += dv[i];
    }
  }
}

}  // namespace

FlowField estimate_flow(const GrayImage& a, const GrayImage& b, const FlowParams& params) {
  if (!a.same_shape(b)) throw Error("estimate_flow: frame sizes differ");
  if (a.width() < 16 || a.height() < 16) throw Error("estimate_flow: frames below 16x16");
  const int levels = max_pyramid_levels(a.width(), a.height(), params.pyramid_levels, params.pyramid_factor);
  const auto pa = build_pyramid(a, levels, params.pyramid_factor);
  const auto pb = build_pyramid(b, levels, params.pyramid_factor);

  Plane u, v;
  for (int k = levels - 1; k >= 0; --k) {
    const int w = pa[k].width();
    const int h = pa[k].height();
    if (k == levels - 1) {
      u = Plane(w, h);
      v = Plane(w, h);
    } else {
      const double sx = static_cast<double>(w) / u.width();
      const double sy = static_cast<double>(h) / u.height();
      u = resize_bilinear(u, w, h);
      v = resize_bilinear(v, w, h);
      for (auto& x : u.values()) x *= sx;
      for (auto& x : v.values()) x *= sy;
    }
    refine_level(pa[k], pb[k], u, v, params);
  }
  FlowField f;
  f.u = std::move(u);
  f.v = std::move(v);
  f.valid = Mask(a.width(), a.height(), 1, 1);
  f.update_validity();
  return f;
}

FlowDifference flow_difference(std::span<const Plane> fields, std::span<const FlowField> flows,
                               std::size_t t) {
  if (t >= flows.size() || t + 1 >= fields.size()) throw Error("flow_difference: frame index out of range");
  const Plane& cur = fields[t];
  const Plane& next = fields[t + 1];
  const FlowField& f = flows[t];
  if (!cur.same_shape(next) || !cur.same_shape(f.u)) throw Error("flow_difference: shape mismatch");
  FlowDifference out{Plane(cur.width(), cur.height()), Mask(cur.width(), cur.height(), 1, 0)};
  for (int y = 0; y < cur.height(); ++y) {
    for (int x = 0; x < cur.width(); ++x) {
      if (!f.valid(x, y)) continue;
      const auto s = sample_bilinear(next, x + f.u(x, y), y + f.v(x, y));
      if (!s) continue;
      out.values(x, y) = *s - cur(x, y);
      out.valid(x, y) = 1;
    }
  }
  return out;
}

Plane flow_confidence(const GrayImage& a, const GrayImage& b, const FlowField& flow, double midpoint,
                      double slope) {
  const Plane frames[2] = {a, b};
  const auto diff = flow_difference(frames, std::span<const FlowField>(&flow, 1), 0);
  Plane s(a.width(), a.height());
  for (std::size_t i = 0; i < s.pixel_count(); ++i) {
    s[i] = diff.valid[i] ? soft_threshold(std::abs(diff.values[i]), midpoint, slope) : 0.0;
  }
  return s;
}

Plane flow_magnitude(const FlowField& flow) {
  Plane m(flow.width(), flow.height());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) m[i] = std::hypot(flow.u[i], flow.v[i]);
  return m;
}

}  // namespace dt
