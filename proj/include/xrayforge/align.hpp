#pragma once

#include <cmath>

#include "xrayforge/core.hpp"
#include "xrayforge/mask.hpp"

namespace xrayforge {

/// Least-squares similarity transform (rotation, uniform scale, translation;
/// no reflection) taking `from` onto `to`.
inline AffineMap2D estimate_similarity(const LandmarkSet& from, const LandmarkSet& to) {
  if (from.size() != to.size()) fail(Errc::CountMismatch, "estimate_similarity: point counts differ");
  if (from.size() < 2) fail(Errc::CountMismatch, "estimate_similarity: need at least two points");
  const double n = static_cast<double>(from.size());
  Point2 mf{}, mt{};
  for (std::size_t i = 0; i < from.size(); ++i) {
    mf.x += from.points[i].x, mf.y += from.points[i].y;
    mt.x += to.points[i].x, mt.y += to.points[i].y;
  }
  mf.x /= n, mf.y /= n, mt.x /= n, mt.y /= n;

  // With z = a + ib, minimizing sum |z * f_i - t_i|^2 over centered points
  // gives a = sum(f.t) / sum|f|^2, b = sum(f x t) / sum|f|^2.
  double dot = 0.0, crs = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double fx = from.points[i].x - mf.x, fy = from.points[i].y - mf.y;
    const double tx = to.points[i].x - mt.x, ty = to.points[i].y - mt.y;
    dot += fx * tx + fy * ty;
    crs += fx * ty - fy * tx;
    norm += fx * fx + fy * fy;
  }
  if (norm <= 1e-12) fail(Errc::DegenerateHull, "estimate_similarity: source points coincide");
  const double a = dot / norm, b = crs / norm;
  AffineMap2D m;
  m.a = a, m.b = -b, m.c = b, m.d = a;
  m.tx = mt.x - (a * mf.x - b * mf.y);
  m.ty = mt.y - (b * mf.x + a * mf.y);
  return m;
}

inline AffineMap2D invert(const AffineMap2D& m) {
  const double det = m.determinant();
  if (std::abs(det) <= 1e-12) fail(Errc::DegenerateTriangle, "affine map is not invertible");
  AffineMap2D r;
  r.a = m.d / det, r.b = -m.b / det;
  r.c = -m.c / det, r.d = m.a / det;
  r.tx = -(r.a * m.tx + r.b * m.ty);
  r.ty = -(r.c * m.tx + r.d * m.ty);
  return r;
}

inline LandmarkSet transform(const LandmarkSet& set, const AffineMap2D& m) {
  LandmarkSet out;
  out.points.reserve(set.size());
  for (const auto& p : set.points) out.points.push_back(m(p));
  return out;
}

/// Resamples `src` into a width x height frame: out(p) = src(forward^-1(p)),
/// bilinear, clamp-to-edge.
inline Image warp_image(const Image& src, const AffineMap2D& forward, int width, int height) {
  const AffineMap2D inverse = invert(forward);
  Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Point2 s = inverse({static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = sample_bilinear(src, s.x, s.y, c);
    }
  return out;
}

}  // namespace xrayforge
