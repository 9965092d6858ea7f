#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "support/oracles.hpp"
#include "support/test_util.hpp"
#include "xrayforge/mask.hpp"
#include "xrayforge/xray.hpp"

namespace xf = xrayforge;

namespace {

xf::Triangle random_triangle(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-50, 150);
  for (;;) {
    xf::Triangle t{{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}}};
    if (std::abs(xf::cross(t[0], t[1], t[2])) > 10.0) return t;
  }
}

}  // namespace

TEST(HullMask, SquareCornersFillSquare) {
  xf::LandmarkSet s{{{10, 10}, {30, 10}, {30, 30}, {10, 30}}};
  const auto m = xf::hull_mask(s, 40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) EXPECT_EQ(m.at(x, y), (x >= 10 && x <= 30 && y >= 10 && y <= 30) ? 1.0 : 0.0);
}

TEST(HullMask, CollinearIsDegenerate) {
  xf::LandmarkSet s{{{1, 1}, {5, 5}, {9, 9}}};
  try {
    xf::hull_mask(s, 20, 20);
    FAIL();
  } catch (const xf::Error& e) {
    EXPECT_EQ(e.code(), xf::Errc::DegenerateHull);
  }
}

TEST(HullMask, OutOfBoundsLandmark) {
  xf::LandmarkSet s{{{1, 1}, {25, 5}, {9, 9}}};
  try {
    xf::hull_mask(s, 20, 20);
    FAIL();
  } catch (const xf::Error& e) {
    EXPECT_EQ(e.code(), xf::Errc::OutOfBounds);
  }
}

TEST(HullMask, RandomPentagonMatchesHalfPlaneOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), rad(10, 25);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> angles(5);
    for (double& a : angles) a = ang(rng);
    std::sort(angles.begin(), angles.end());
    std::vector<xf::Point2> poly;
    const double r = rad(rng);
    for (double a : angles) poly.push_back({32 + r * std::cos(a), 32 + r * std::sin(a)});
    // Points on a circle in angular order form a convex polygon.
    if (std::abs(xf::polygon_area(poly)) < 1.0) continue;
    const auto m = xf::hull_mask(xf::LandmarkSet{poly}, 64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        EXPECT_EQ(m.at(x, y) == 1.0, xf::oracle::in_convex_polygon(poly, {double(x), double(y)})) << x << "," << y;
  }
}

TEST(HullMask, BinaryAndConvexSupport) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(5, 58);
  for (int t = 0; t < 10; ++t) {
    xf::LandmarkSet s;
    for (int i = 0; i < 12; ++i) s.points.push_back({u(rng), u(rng)});
    const auto m = xf::hull_mask(s, 64, 64);
    std::vector<std::pair<int, int>> support;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        EXPECT_TRUE(m.at(x, y) == 0.0 || m.at(x, y) == 1.0);
        if (m.at(x, y) == 1.0) support.emplace_back(x, y);
      }
    ASSERT_FALSE(support.empty());
    std::uniform_int_distribution<std::size_t> pick(0, support.size() - 1);
    for (int k = 0; k < 200; ++k) {
      const auto [x0, y0] = support[pick(rng)];
      const auto [x1, y1] = support[pick(rng)];
      // Any integer point on the segment between two support pixels is in the support.
      const int g = std::gcd(std::abs(x1 - x0), std::abs(y1 - y0));
      for (int i = 0; i <= g && g > 0; ++i)
        EXPECT_EQ(m.at(x0 + (x1 - x0) / g * i, y0 + (y1 - y0) / g * i), 1.0);
    }
  }
}

TEST(EstimateAffine, IdentityAndTranslation) {
  const xf::Triangle src{{{0, 0}, {10, 0}, {0, 10}}};
  EXPECT_EQ(xf::estimate_affine(src, src), (xf::AffineMap2D{1, 0, 0, 0, 1, 0}));
  const xf::Triangle dst{{{5, -2}, {15, -2}, {5, 8}}};
  const auto m = xf::estimate_affine(src, dst);
  EXPECT_NEAR(m.a, 1, 1e-15);
  EXPECT_NEAR(m.b, 0, 1e-15);
  EXPECT_NEAR(m.tx, 5, 1e-15);
  EXPECT_NEAR(m.c, 0, 1e-15);
  EXPECT_NEAR(m.d, 1, 1e-15);
  EXPECT_NEAR(m.ty, -2, 1e-15);
}

TEST(EstimateAffine, RandomTrianglesAgreeWithLinearSolve) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto src = random_triangle(rng), dst = random_triangle(rng);
    const auto m = xf::estimate_affine(src, dst);
    for (int i = 0; i < 3; ++i) {
      const auto p = m(src[i]);
      EXPECT_NEAR(p.x, dst[i].x, 1e-9);
      EXPECT_NEAR(p.y, dst[i].y, 1e-9);
    }
    const auto ref = xf::oracle::affine_6x6(src, dst);
    const double got[6] = {m.a, m.b, m.tx, m.c, m.d, m.ty};
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(got[k], ref[k], 1e-9 * std::max(1.0, std::abs(ref[k])));
  }
}

TEST(EstimateAffine, DegenerateTriangleThrows) {
  const xf::Triangle src{{{0, 0}, {1, 1}, {2, 2}}};
  try {
    xf::estimate_affine(src, src);
    FAIL();
  } catch (const xf::Error& e) {
    EXPECT_EQ(e.code(), xf::Errc::DegenerateTriangle);
  }
}

TEST(DeformMask, ZeroOffsetIsIdentity) {
  std::mt19937_64 rng(4);
  xf::LandmarkSet s{{{12, 10}, {50, 14}, {44, 52}, {15, 40}}};
  const auto hull = xf::hull_mask(s, 64, 64);
  const auto soft = xf::gaussian_blur(hull, 7);
  xf::GenerationParams p;
  p.deform_max_offset_frac = 0.0;
  for (const auto* m : {&hull, &soft}) {
    xf::RandomStream r(5);
    EXPECT_EQ(xf::deform_mask(*m, p, r), *m);
  }
}

TEST(DeformMask, EmptyMaskThrows) {
  xf::RandomStream r(1);
  try {
    xf::deform_mask(xf::SoftMask(32, 32), {}, r);
    FAIL();
  } catch (const xf::Error& e) {
    EXPECT_EQ(e.code(), xf::Errc::EmptyMask);
  }
}

TEST(DeformMask, DeterministicRangedAndChanging) {
  xf::LandmarkSet s{{{20, 18}, {70, 22}, {80, 60}, {50, 85}, {18, 62}}};
  const auto hull = xf::hull_mask(s, 96, 96);
  xf::GenerationParams p;
  xf::RandomStream a(99), b(99);
  const auto d1 = xf::deform_mask(hull, p, a);
  const auto d2 = xf::deform_mask(hull, p, b);
  EXPECT_EQ(d1, d2);
  EXPECT_NE(d1, hull);
  for (double v : d1.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    xf::RandomStream r(seed);
    const auto d = xf::deform_mask(xf::gaussian_blur(hull, 5), p, r);
    for (double v : d.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(FeatherMask, ConstantMasksPreserved) {
  xf::GenerationParams p;
  xf::RandomStream r(1);
  for (double v : xf::feather_mask(xf::SoftMask(24, 24, 1.0), p, r).data()) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_EQ(xf::feather_mask(xf::SoftMask(24, 24, 0.0), p, r), xf::SoftMask(24, 24, 0.0));
}

TEST(FeatherMask, KernelThreeMatchesDirectConvolution) {
  const auto step = xf::testing::box_mask(24, 24, 12, 0, 23, 23);
  xf::GenerationParams p;
  p.blur_kernels = {3};
  xf::RandomStream r(1);
  const auto got = xf::feather_mask(step, p, r);

  const double sigma = 3.0 / 4.0;
  const double w1 = std::exp(-1.0 / (2 * sigma * sigma));
  const double taps[3] = {w1 / (1 + 2 * w1), 1 / (1 + 2 * w1), w1 / (1 + 2 * w1)};
  std::vector<std::vector<double>> k(3, std::vector<double>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[i][j] = taps[i] * taps[j];
  const auto ref = xf::oracle::convolve2d(step, k);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-12);
  EXPECT_NEAR(got.at(12, 5), 1.0 - taps[0], 1e-12);
}

TEST(FeatherMask, MassPreservedAwayFromBorder) {
  const auto m = xf::testing::box_mask(64, 64, 20, 22, 40, 45);
  double before = 0.0;
  for (double v : m.data()) before += v;
  for (int k : {5, 7, 9, 11, 13, 15}) {
    const auto f = xf::gaussian_blur(m, k);
    double after = 0.0;
    for (double v : f.data()) after += v;
    EXPECT_NEAR(after, before, 0.01 * before) << "k=" << k;
  }
}

TEST(FeatherMask, XrayBandAlongBoundary) {
  xf::LandmarkSet s{{{12, 10}, {50, 14}, {44, 52}, {15, 40}}};
  const auto hull = xf::hull_mask(s, 64, 64);
  const auto xray = xf::compute_xray(xf::gaussian_blur(hull, 5));
  EXPECT_GT(xray.max_value(), 0.5);
  // Every boundary pixel (support pixel with an outside 4-neighbor) lies in the band.
  for (int y = 1; y < 63; ++y)
    for (int x = 1; x < 63; ++x) {
      if (hull.at(x, y) == 1.0 && (hull.at(x + 1, y) == 0 || hull.at(x - 1, y) == 0 || hull.at(x, y + 1) == 0 || hull.at(x, y - 1) == 0)) {
        EXPECT_GT(xray.at(x, y), 0.0);
      }
    }
  // Deep interior and far exterior stay (numerically) blank.
  EXPECT_LT(xray.at(30, 30), 1e-6);
  EXPECT_EQ(xray.at(2, 60), 0.0);
}

TEST(GaussianKernel, NormalizedAndSymmetric) {
  for (int k : {1, 3, 5, 15}) {
    const auto taps = xf::gaussian_kernel(k);
    double sum = 0.0;
    for (double t : taps) sum += t;
    EXPECT_NEAR(sum, 1.0, 1e-15);
    for (int i = 0; i < k; ++i) EXPECT_DOUBLE_EQ(taps[i], taps[k - 1 - i]);
  }
  EXPECT_THROW(xf::gaussian_kernel(4), xf::Error);
}
