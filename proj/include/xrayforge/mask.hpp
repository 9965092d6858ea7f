#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "xrayforge/core.hpp"

namespace xrayforge {

/// (x, y) -> (a x + b y + tx, c x + d y + ty)
struct AffineMap2D {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  Point2 operator()(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  double determinant() const { return a * d - b * c; }
  bool operator==(const AffineMap2D&) const = default;
};

using Triangle = std::array<Point2, 3>;

inline double cross(Point2 o, Point2 p, Point2 q) { return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x); }

/// Exact affine map taking src[i] to dst[i]. The two rows decouple into
/// 3x3 systems that share the matrix [x y 1], solved by Cramer's rule.
inline AffineMap2D estimate_affine(const Triangle& src, const Triangle& dst) {
  const double det = cross(src[0], src[1], src[2]);
  const double scale = std::max({1.0, std::abs(src[1].x - src[0].x), std::abs(src[1].y - src[0].y),
                                 std::abs(src[2].x - src[0].x), std::abs(src[2].y - src[0].y)});
  if (std::abs(det) <= 1e-12 * scale * scale) fail(Errc::DegenerateTriangle, "source triangle has zero area");

  // Translate to src[0] for conditioning: u = p - src[0].
  const double u1 = src[1].x - src[0].x, v1 = src[1].y - src[0].y;
  const double u2 = src[2].x - src[0].x, v2 = src[2].y - src[0].y;
  auto solve_row = [&](double f0, double f1, double f2, double& p, double& q, double& t) {
    const double g1 = f1 - f0, g2 = f2 - f0;
    p = (g1 * v2 - g2 * v1) / det;
    q = (u1 * g2 - u2 * g1) / det;
    t = f0 - p * src[0].x - q * src[0].y;
  };
  AffineMap2D m;
  solve_row(dst[0].x, dst[1].x, dst[2].x, m.a, m.b, m.tx);
  solve_row(dst[0].y, dst[1].y, dst[2].y, m.c, m.d, m.ty);
  return m;
}

/// Convex hull by monotone chain, counter-clockwise in a y-up frame,
/// collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 p, Point2 q) { return p.x < q.x || (p.x == q.x && p.y < q.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(const std::vector<Point2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

/// Binary mask of the landmarks' convex hull: 1 where the pixel center lies
/// inside or on the hull.
inline SoftMask hull_mask(const LandmarkSet& landmarks, int width, int height) {
  if (width < kMinImageSide || height < kMinImageSide) fail(Errc::BadDimensions, "hull_mask: image too small");
  for (const auto& p : landmarks.points)
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1))
      fail(Errc::OutOfBounds, "hull_mask: landmark outside the image");
  const std::vector<Point2> hull = convex_hull(landmarks.points);
  if (hull.size() < 3 || std::abs(polygon_area(hull)) < 1e-9) fail(Errc::DegenerateHull, "landmarks are collinear");

  double minx = hull[0].x, maxx = hull[0].x, miny = hull[0].y, maxy = hull[0].y;
  for (const auto& p : hull) {
    minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
  }
  SoftMask mask(width, height);
  constexpr double eps = 1e-9;
  for (int y = static_cast<int>(std::ceil(miny - eps)); y <= static_cast<int>(std::floor(maxy + eps)); ++y)
    for (int x = static_cast<int>(std::ceil(minx - eps)); x <= static_cast<int>(std::floor(maxx + eps)); ++x) {
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      bool inside = true;
      for (std::size_t i = 0; i < hull.size() && inside; ++i) {
        const Point2& a = hull[i];
        const Point2& b = hull[(i + 1) % hull.size()];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        inside = cross(a, b, p) >= -eps * len;
      }
      if (inside) mask.at(x, y) = 1.0;
    }
  return mask;
}

namespace detail {

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Barycentric containment, orientation-agnostic, edges included.
inline bool in_triangle(const Triangle& t, Point2 p) {
  const double d0 = cross(t[0], t[1], p);
  const double d1 = cross(t[1], t[2], p);
  const double d2 = cross(t[2], t[0], p);
  constexpr double eps = 1e-9;
  const bool has_neg = d0 < -eps || d1 < -eps || d2 < -eps;
  const bool has_pos = d0 > eps || d1 > eps || d2 > eps;
  return !(has_neg && has_pos);
}

}  // namespace detail

/// Control grid of a piecewise-affine warp: `n x n` source points and their
/// displaced targets, row-major.
struct WarpGrid {
  int n = 0;
  std::vector<Point2> source;
  std::vector<Point2> target;

  // Each cell is split along its top-left / bottom-right diagonal.
  std::vector<std::array<int, 3>> triangles() const {
    std::vector<std::array<int, 3>> tris;
    for (int r = 0; r + 1 < n; ++r)
      for (int c = 0; c + 1 < n; ++c) {
        const int tl = r * n + c, tr = tl + 1, bl = tl + n, br = bl + 1;
        tris.push_back({tl, tr, br});
        tris.push_back({tl, br, bl});
      }
    return tris;
  }
};

struct BoundingBox {
  int x0, y0, x1, y1;
};

template <class Tag>
std::optional<BoundingBox> support_bbox(const Field<Tag>& f) {
  std::optional<BoundingBox> box;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      if (f.at(x, y) > 0.0) {
        if (!box) box = BoundingBox{x, y, x, y};
        box->x0 = std::min(box->x0, x), box->x1 = std::max(box->x1, x);
        box->y0 = std::min(box->y0, y), box->y1 = std::max(box->y1, y);
      }
  return box;
}

/// Random control grid over the support bounding box grown by one pixel.
/// Offsets are i.i.d. uniform in [-d, d] per axis, d = frac * bbox diagonal.
inline WarpGrid random_warp_grid(const BoundingBox& box, int n, double max_offset_frac, RandomStream& rng) {
  const double x0 = box.x0 - 1.0, x1 = box.x1 + 1.0, y0 = box.y0 - 1.0, y1 = box.y1 + 1.0;
  const double d = max_offset_frac * std::hypot(x1 - x0, y1 - y0);
  WarpGrid g;
  g.n = n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const Point2 s{x0 + (x1 - x0) * c / (n - 1), y0 + (y1 - y0) * r / (n - 1)};
      g.source.push_back(s);
      const double ox = rng.uniform(-d, d);
      const double oy = rng.uniform(-d, d);
      g.target.push_back(d > 0.0 ? Point2{s.x + ox, s.y + oy} : s);
    }
  return g;
}

/// Warps `mask` so that grid.source moves onto grid.target. Pixels covered
/// by the target mesh are sampled bilinearly through the inverse per-triangle
/// map; uncovered pixels are zero inside the source grid and unchanged
/// outside it.
inline SoftMask piecewise_affine_warp(const SoftMask& mask, const WarpGrid& grid) {
  const int w = mask.width(), h = mask.height();
  SoftMask out(w, h);
  std::vector<char> covered(out.size(), 0);

  for (const auto& idx : grid.triangles()) {
    const Triangle dst{grid.target[idx[0]], grid.target[idx[1]], grid.target[idx[2]]};
    const Triangle src{grid.source[idx[0]], grid.source[idx[1]], grid.source[idx[2]]};
    if (std::abs(cross(dst[0], dst[1], dst[2])) < 1e-9) continue;
    const AffineMap2D inverse = estimate_affine(dst, src);

    const double minx = std::min({dst[0].x, dst[1].x, dst[2].x}), maxx = std::max({dst[0].x, dst[1].x, dst[2].x});
    const double miny = std::min({dst[0].y, dst[1].y, dst[2].y}), maxy = std::max({dst[0].y, dst[1].y, dst[2].y});
    const int xa = std::max(0, static_cast<int>(std::ceil(minx - 1e-9)));
    const int xb = std::min(w - 1, static_cast<int>(std::floor(maxx + 1e-9)));
    const int ya = std::max(0, static_cast<int>(std::ceil(miny - 1e-9)));
    const int yb = std::min(h - 1, static_cast<int>(std::floor(maxy + 1e-9)));
    for (int y = ya; y <= yb; ++y)
      for (int x = xa; x <= xb; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (covered[i]) continue;
        const Point2 p{static_cast<double>(x), static_cast<double>(y)};
        if (!detail::in_triangle(dst, p)) continue;
        const Point2 s = inverse(p);
        out[i] = std::clamp(sample_bilinear(mask, detail::snap(s.x), detail::snap(s.y)), 0.0, 1.0);
        covered[i] = 1;
      }
  }

  const Point2 lo = grid.source.front(), hi = grid.source.back();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (covered[i]) continue;
      const bool in_source_grid = x >= lo.x && x <= hi.x && y >= lo.y && y <= hi.y;
      out[i] = in_source_grid ? 0.0 : mask[i];
    }
  return out;
}

/// Random piecewise-affine deformation of the mask over a
/// deform_grid x deform_grid control grid on its bounding box.
inline SoftMask deform_mask(const SoftMask& mask, const GenerationParams& params, RandomStream& rng) {
  const auto box = support_bbox(mask);
  if (!box) fail(Errc::EmptyMask, "deform_mask: mask is all zero");
  const WarpGrid grid = random_warp_grid(*box, params.deform_grid, params.deform_max_offset_frac, rng);
  return piecewise_affine_warp(mask, grid);
}

/// Normalized 1-D Gaussian taps of odd size k with sigma = k / 4.
inline std::vector<double> gaussian_kernel(int k) {
  if (k < 1 || k % 2 == 0) fail(Errc::InvalidParams, "gaussian kernel size must be odd and >= 1");
  const int r = k / 2;
  const double sigma = k / 4.0;
  std::vector<double> taps(k);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += taps[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (double& t : taps) t /= sum;
  return taps;
}

/// Separable Gaussian blur with replicate padding; k = 1 is the identity.
inline SoftMask gaussian_blur(const SoftMask& mask, int k) {
  const std::vector<double> taps = gaussian_kernel(k);
  const int r = k / 2, w = mask.width(), h = mask.height();
  SoftMask tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += taps[i + r] * mask.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += taps[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  return out;
}

/// Gaussian feathering with a kernel size drawn uniformly from params.blur_kernels.
inline SoftMask feather_mask(const SoftMask& mask, const GenerationParams& params, RandomStream& rng) {
  if (params.blur_kernels.empty()) fail(Errc::InvalidParams, "feather_mask: no blur kernels");
  const int k = params.blur_kernels[rng.index(params.blur_kernels.size())];
  return gaussian_blur(mask, k);
}

}  // namespace xrayforge
