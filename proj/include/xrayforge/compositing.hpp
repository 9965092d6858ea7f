#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "xrayforge/core.hpp"

namespace xrayforge {

/// Shifts each fg channel so its mean over {mask > 0.5} equals bg's mean
/// over the same region, then clamps to [0,1].
inline Image color_transfer_means(const Image& fg, const Image& bg, const SoftMask& mask) {
  require_same_size(fg, bg, "color_transfer_means: fg/bg size mismatch");
  require_same_size(fg, mask, "color_transfer_means: mask size mismatch");
  std::array<double, 3> sum_fg{}, sum_bg{};
  std::size_t count = 0;
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x) {
      if (!(mask.at(x, y) > 0.5)) continue;
      ++count;
      for (int c = 0; c < 3; ++c) sum_fg[c] += fg.at(x, y, c), sum_bg[c] += bg.at(x, y, c);
    }
  if (count == 0) fail(Errc::EmptySupport, "color_transfer_means: mask has no pixel above 0.5");
  std::array<double, 3> shift{};
  for (int c = 0; c < 3; ++c) shift[c] = (sum_bg[c] - sum_fg[c]) / static_cast<double>(count);

  Image out(fg.width(), fg.height());
  for (int y = 0; y < fg.height(); ++y)
    for (int x = 0; x < fg.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = std::clamp(fg.at(x, y, c) + shift[c], 0.0, 1.0);
  return out;
}

struct PoissonOptions {
  double tol = 1e-6;
  // <= 0 selects 10 * |region|.
  long max_iter = 0;
  bool record_energy = false;
};

struct PoissonChannelStats {
  long iterations = 0;
  double max_residual = 0.0;
  // E(u) = 0.5 u'Au - b'u after each iteration, when requested.
  std::vector<double> energy;
};

struct PoissonResult {
  Image blended;  // clamped to [0,1]
  Image raw;      // unclamped solution, bg outside the region
  std::array<PoissonChannelStats, 3> stats;
  std::size_t region_size = 0;
};

namespace detail {

// Region {mask > 0.5} with a dense index per pixel (-1 outside).
struct PoissonRegion {
  int width = 0, height = 0;
  std::vector<int> index;
  std::vector<std::pair<int, int>> pixels;
};

inline PoissonRegion make_poisson_region(const SoftMask& mask) {
  PoissonRegion r;
  r.width = mask.width();
  r.height = mask.height();
  r.index.assign(mask.size(), -1);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      if (!(mask.at(x, y) > 0.5)) continue;
      if (x == 0 || y == 0 || x == r.width - 1 || y == r.height - 1)
        fail(Errc::RegionTouchesBorder, "poisson region must lie strictly inside the image");
      r.index[static_cast<std::size_t>(y) * r.width + x] = static_cast<int>(r.pixels.size());
      r.pixels.emplace_back(x, y);
    }
  if (r.pixels.empty()) fail(Errc::EmptyRegion, "poisson region is empty");
  return r;
}

inline constexpr std::array<std::pair<int, int>, 4> kNeighbors{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

}  // namespace detail

/// Solves, per channel, the 4-neighbor discrete Poisson equation
/// lap(u) = lap(fg) on {mask > 0.5} with u = bg on the region's outer
/// boundary. Unpreconditioned conjugate gradient, stopping once every
/// per-pixel residual is <= tol; NonConvergence if that fails by max_iter.
inline PoissonResult solve_poisson(const Image& fg, const Image& bg, const SoftMask& mask, const PoissonOptions& opt = {}) {
  require_same_size(fg, bg, "poisson_blend: fg/bg size mismatch");
  require_same_size(fg, mask, "poisson_blend: mask size mismatch");
  const detail::PoissonRegion region = detail::make_poisson_region(mask);
  const std::size_t n = region.pixels.size();
  const long max_iter = opt.max_iter > 0 ? opt.max_iter : 10 * static_cast<long>(n);
  const int w = region.width;

  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = region.pixels[i];
      double acc = 4.0 * v[i];
      for (const auto& [dx, dy] : detail::kNeighbors) {
        const int j = region.index[static_cast<std::size_t>(y + dy) * w + (x + dx)];
        if (j >= 0) acc -= v[j];
      }
      out[i] = acc;
    }
  };
  auto max_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  PoissonResult result;
  result.region_size = n;
  result.raw = bg;
  for (int c = 0; c < Image::kChannels; ++c) {
    std::vector<double> b(n), u(n), r(n), p(n), ap(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = region.pixels[i];
      double rhs = 0.0;
      for (const auto& [dx, dy] : detail::kNeighbors) {
        rhs += fg.at(x, y, c) - fg.at(x + dx, y + dy, c);
        if (region.index[static_cast<std::size_t>(y + dy) * w + (x + dx)] < 0) rhs += bg.at(x + dx, y + dy, c);
      }
      b[i] = rhs;
      u[i] = bg.at(x, y, c);
    }
    auto true_residual = [&] {
      apply(u, ap);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    };

    PoissonChannelStats& st = result.stats[c];
    true_residual();
    p = r;
    double rr = dot(r, r);
    long it = 0;
    while (max_abs(r) > opt.tol && it < max_iter) {
      apply(p, ap);
      const double pap = dot(p, ap);
      if (pap <= 0.0) break;
      const double alpha = rr / pap;
      for (std::size_t i = 0; i < n; ++i) u[i] += alpha * p[i], r[i] -= alpha * ap[i];
      ++it;
      if (opt.record_energy) {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e -= 0.5 * u[i] * (b[i] + r[i]);
        st.energy.push_back(e);
      }
      if (max_abs(r) <= opt.tol) {
        // The recursive residual drifts; confirm against b - Au and restart if needed.
        true_residual();
        if (max_abs(r) <= opt.tol) break;
        p = r;
        rr = dot(r, r);
        continue;
      }
      const double rr_next = dot(r, r);
      const double beta = rr_next / rr;
      rr = rr_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    true_residual();
    st.iterations = it;
    st.max_residual = max_abs(r);
    if (st.max_residual > opt.tol)
      fail(Errc::NonConvergence, "poisson solve residual " + std::to_string(st.max_residual) + " above tolerance");
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = region.pixels[i];
      result.raw.at(x, y, c) = u[i];
    }
  }

  result.blended = result.raw;
  for (double& v : result.blended.data()) v = std::clamp(v, 0.0, 1.0);
  return result;
}

inline Image poisson_blend(const Image& fg, const Image& bg, const SoftMask& mask, double tol = 1e-6, long max_iter = 0) {
  PoissonOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  return solve_poisson(fg, bg, mask, opt).blended;
}

}  // namespace xrayforge
