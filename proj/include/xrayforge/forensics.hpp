#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "xrayforge/core.hpp"
#include "xrayforge/image_io.hpp"

namespace xrayforge {

enum class ForensicKind { noise, ela };

inline std::string to_string(ForensicKind k) { return k == ForensicKind::noise ? "noise" : "ela"; }

struct ForensicTag {};

struct ForensicMap {
  ForensicKind kind = ForensicKind::noise;
  Field<ForensicTag> values;

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
};

inline constexpr int kDefaultElaQuality = 90;
inline constexpr double kDefaultElaScale = 15.0;

/// 3x3 median per channel, replicate padding.
inline Image median_filter3(const Image& img) {
  const int w = img.width(), h = img.height();
  Image out(w, h);
  std::array<double, 9> win{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c) {
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            win[n++] = img.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1), c);
        std::nth_element(win.begin(), win.begin() + 4, win.end());
        out.at(x, y, c) = win[4];
      }
  return out;
}

// clamp(scale * mean_c |a - b|, 0, 1)
inline Field<ForensicTag> scaled_abs_difference(const Image& a, const Image& b, double scale) {
  require_same_size(a, b, "forensic difference: size mismatch");
  Field<ForensicTag> out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      double acc = 0.0;
      for (int c = 0; c < Image::kChannels; ++c) acc += std::abs(a.at(x, y, c) - b.at(x, y, c));
      out.at(x, y) = std::clamp(scale * acc / Image::kChannels, 0.0, 1.0);
    }
  return out;
}

/// Median-filter noise residual: amplification * mean_c |img - median3(img)|, clamped.
inline ForensicMap noise_residual(const Image& img, double amplification = 1.0) {
  if (!(amplification > 0.0)) fail(Errc::InvalidParams, "noise_residual: amplification must be positive");
  return {ForensicKind::noise, scaled_abs_difference(img, median_filter3(img), amplification)};
}

/// Error level analysis: scale * mean_c |img - jpeg(img, quality)|, clamped.
inline ForensicMap error_level_analysis(const Image& img, int quality = kDefaultElaQuality,
                                        double scale = kDefaultElaScale) {
  if (!(scale > 0.0)) fail(Errc::InvalidParams, "error_level_analysis: scale must be positive");
  return {ForensicKind::ela, scaled_abs_difference(img, jpeg_roundtrip(img, quality), scale)};
}

}  // namespace xrayforge
