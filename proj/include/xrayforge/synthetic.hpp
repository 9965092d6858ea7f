#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>

#include "xrayforge/core.hpp"
#include "xrayforge/image_io.hpp"
#include "xrayforge/landmarks.hpp"

namespace xrayforge::synthetic {

// Procedural stand-ins for aligned face crops: a shaded elliptical "face"
// with eyes and mouth on a gradient background, each image carrying its own
// noise level, plus a 68-point landmark layout in the usual order
// (jaw 17, brows 10, nose 9, eyes 12, mouth 20).

struct Face {
  Image image;
  LandmarkSet landmarks;
};

inline Face make_face(int size, std::uint64_t seed) {
  RandomStream rng(splitmix64(seed ^ 0x5A17'F00D'0000'0001ULL));
  const double cx = size * 0.5 + rng.uniform(-0.04, 0.04) * size;
  const double cy = size * 0.5 + rng.uniform(-0.04, 0.04) * size;
  const double ax = size * rng.uniform(0.22, 0.27);
  const double ay = size * rng.uniform(0.28, 0.33);
  const double skin[3] = {rng.uniform(0.55, 0.9), rng.uniform(0.4, 0.7), rng.uniform(0.3, 0.6)};
  const double bg0[3] = {rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)};
  const double bg1[3] = {rng.uniform(0.2, 0.95), rng.uniform(0.2, 0.95), rng.uniform(0.2, 0.95)};
  const double noise = rng.uniform(0.005, 0.04);
  const double eye_dy = -0.25 * ay, eye_dx = 0.38 * ax, mouth_dy = 0.45 * ay;

  Face f{Image(size, size), {}};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x - cx) / ax, v = (y - cy) / ay;
      const double r2 = u * u + v * v;
      const double t = static_cast<double>(x + y) / (2.0 * size);
      for (int c = 0; c < 3; ++c) {
        double val = (1.0 - t) * bg0[c] + t * bg1[c];
        if (r2 <= 1.0) {
          val = skin[c] * (0.75 + 0.25 * std::sqrt(1.0 - r2));
          const double ex = std::abs(x - cx) - eye_dx, ey = y - (cy + eye_dy);
          if (ex * ex / (0.12 * ax * 0.12 * ax) + ey * ey / (0.06 * ay * 0.06 * ay) <= 1.0) val *= 0.25;
          const double mx = x - cx, my = y - (cy + mouth_dy);
          if (mx * mx / (0.35 * ax * 0.35 * ax) + my * my / (0.07 * ay * 0.07 * ay) <= 1.0) val *= 0.55;
        }
        val += noise * (rng.uniform01() + rng.uniform01() + rng.uniform01() - 1.5);
        f.image.at(x, y, c) = std::clamp(val, 0.0, 1.0);
      }
    }

  auto add = [&](double u, double v) {
    const double jitter = 0.01 * size;
    f.landmarks.points.push_back({std::clamp(cx + u * ax + rng.uniform(-jitter, jitter), 0.0, size - 1.0),
                                  std::clamp(cy + v * ay + rng.uniform(-jitter, jitter), 0.0, size - 1.0)});
  };
  const double pi = std::numbers::pi;
  for (int i = 0; i < 17; ++i) {  // jaw: left temple, under the chin, right temple
    const double a = pi - pi * i / 16.0;
    add(std::cos(a), 0.98 * std::sin(a));
  }
  for (int i = 0; i < 5; ++i) add(-0.7 + 0.12 * i, -0.45 - 0.05 * std::sin(pi * i / 4));
  for (int i = 0; i < 5; ++i) add(0.22 + 0.12 * i, -0.45 - 0.05 * std::sin(pi * i / 4));
  for (int i = 0; i < 4; ++i) add(0.0, -0.2 + 0.09 * i);
  for (int i = 0; i < 5; ++i) add(-0.16 + 0.08 * i, 0.2);
  for (int side = -1; side <= 1; side += 2)
    for (int i = 0; i < 6; ++i) {
      const double a = 2.0 * pi * i / 6.0;
      add(side * 0.38 + 0.12 * std::cos(a), -0.25 + 0.06 * std::sin(a));
    }
  for (int i = 0; i < 12; ++i) {
    const double a = 2.0 * pi * i / 12.0;
    add(0.35 * std::cos(a), 0.45 + 0.09 * std::sin(a));
  }
  for (int i = 0; i < 8; ++i) {
    const double a = 2.0 * pi * i / 8.0;
    add(0.22 * std::cos(a), 0.45 + 0.04 * std::sin(a));
  }
  return f;
}

/// Writes `count` faces as `<dir>/face_NNNN.png` with landmark files.
/// `sources > 0` tags faces with "src_<i % sources>" provenance.
inline void write_corpus(const std::filesystem::path& dir, int count, int size, std::uint64_t seed, int sources = 0) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    const Face f = make_face(size, derive_seed(seed, static_cast<std::uint64_t>(i)));
    char name[32];
    std::snprintf(name, sizeof name, "face_%04d.png", i);
    write_png(dir / name, f.image);
    std::optional<std::string> source;
    if (sources > 0) source = "src_" + std::to_string(i % sources);
    std::ofstream(dir / (std::string(name) + ".landmarks.json")) << landmarks_to_json(f.landmarks, source) << "\n";
  }
}

}  // namespace xrayforge::synthetic
