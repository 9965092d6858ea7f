#pragma once

#include <algorithm>
#include <array>

#include "xrayforge/core.hpp"

namespace xrayforge {

/// out = mask * fg + (1 - mask) * bg, per pixel and channel.
inline Image alpha_blend(const Image& fg, const Image& bg, const SoftMask& mask) {
  require_same_size(fg, bg, "alpha_blend: fg/bg size mismatch");
  require_same_size(fg, mask, "alpha_blend: mask size mismatch");
  Image out(bg.width(), bg.height());
  for (int y = 0; y < bg.height(); ++y)
    for (int x = 0; x < bg.width(); ++x) {
      const double m = mask.at(x, y);
      for (int c = 0; c < Image::kChannels; ++c) {
        const double v = m * fg.at(x, y, c) + (1.0 - m) * bg.at(x, y, c);
        out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  return out;
}

/// Turns a binary mask into a soft one with the 3x3 binomial kernel
/// (1 2 1; 2 4 2; 1 2 1) / 16 and replicate padding.
inline SoftMask soften_mask(const SoftMask& mask) {
  static constexpr std::array<double, 3> k{1.0, 2.0, 1.0};
  const int w = mask.width();
  const int h = mask.height();
  SoftMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, w - 1);
          acc += k[dy + 1] * k[dx + 1] * mask.at(xx, yy);
        }
      }
      out.at(x, y) = std::clamp(acc / 16.0, 0.0, 1.0);
    }
  return out;
}

/// Face X-ray of a mask: B = 4 M (1 - M). Zero exactly where M is 0 or 1,
/// one where M = 0.5.
inline FaceXray compute_xray(const SoftMask& mask) {
  FaceXray out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    // max(m, 1-m) makes M and 1-M bit-identical.
    const double hi = std::max(mask[i], 1.0 - mask[i]);
    out[i] = std::clamp(4.0 * hi * (1.0 - hi), 0.0, 1.0);
  }
  return out;
}

inline bool is_trivial(const FaceXray& xray, double tol) {
  if (tol < 0.0) fail(Errc::InvalidParams, "is_trivial: negative tolerance");
  return xray.max_value() <= tol;
}

}  // namespace xrayforge
