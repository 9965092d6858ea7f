#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xrayforge/error.hpp"

namespace xrayforge {

inline constexpr int kMinImageSide = 16;

/// H x W x 3 raster, row-major, channel-interleaved, intensities nominally in [0,1].
///
/// Construction does not enforce the value/size invariants so that
/// validate_image() can report them; every algorithm that consumes an Image
/// treats it as read-only.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * kChannels, fill) {}
  Image(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height * kChannels)
      fail(Errc::BadDimensions, "image data length does not match width*height*3");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  double& at(int x, int y, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c]; }
  double at(int x, int y, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Single-channel H x W scalar field. The tag keeps masks, X-rays and
/// forensic maps from being mixed up at call sites.
template <class Tag>
class Field {
 public:
  Field() = default;
  Field(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {}
  Field(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height)
      fail(Errc::BadDimensions, "field data length does not match width*height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double max_value() const { return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end()); }

  bool operator==(const Field&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct MaskTag {};
struct XrayTag {};

using SoftMask = Field<MaskTag>;
using FaceXray = Field<XrayTag>;

template <class A, class B>
bool same_size(const A& a, const B& b) noexcept {
  return a.width() == b.width() && a.height() == b.height();
}

template <class A, class B>
void require_same_size(const A& a, const B& b, const char* what) {
  if (!same_size(a, b)) fail(Errc::DimensionMismatch, what);
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Ordered facial keypoints in pixel coordinates; pixel (col, row) has its
/// center at (x, y) = (col, row).
struct LandmarkSet {
  std::vector<Point2> points;

  std::size_t size() const noexcept { return points.size(); }
  bool operator==(const LandmarkSet&) const = default;
};

enum class BlendMode { alpha, poisson };

inline std::string to_string(BlendMode m) { return m == BlendMode::alpha ? "alpha" : "poisson"; }

inline BlendMode parse_blend_mode(const std::string& s) {
  if (s == "alpha") return BlendMode::alpha;
  if (s == "poisson") return BlendMode::poisson;
  fail(Errc::InvalidParams, "unknown blend mode '" + s + "'");
}

struct GenerationParams {
  std::uint64_t global_seed = 0;
  int output_size = 256;
  int nn_pool_size = 1000;
  int nn_top_k = 100;
  int deform_grid = 4;
  double deform_max_offset_frac = 0.10;
  std::vector<int> blur_kernels{5, 7, 9, 11, 13, 15};
  BlendMode blend_mode = BlendMode::alpha;
  bool color_correct = true;
  double real_fraction = 0.5;

  bool operator==(const GenerationParams&) const = default;
};

inline void validate_params(const GenerationParams& p) {
  if (p.output_size < kMinImageSide) fail(Errc::InvalidParams, "output_size below minimum side");
  if (p.nn_pool_size < 1 || p.nn_top_k < 1) fail(Errc::InvalidParams, "nn_pool_size and nn_top_k must be >= 1");
  if (p.nn_top_k > p.nn_pool_size) fail(Errc::InvalidParams, "nn_top_k exceeds nn_pool_size");
  if (p.deform_grid < 2) fail(Errc::InvalidParams, "deform_grid must be >= 2");
  if (!(p.deform_max_offset_frac >= 0.0 && p.deform_max_offset_frac <= 1.0))
    fail(Errc::InvalidParams, "deform_max_offset_frac outside [0,1]");
  if (!(p.real_fraction >= 0.0 && p.real_fraction <= 1.0)) fail(Errc::InvalidParams, "real_fraction outside [0,1]");
  if (p.blur_kernels.empty()) fail(Errc::InvalidParams, "blur_kernels is empty");
  for (int k : p.blur_kernels)
    if (k < 3 || k % 2 == 0) fail(Errc::InvalidParams, "blur kernel sizes must be odd and >= 3");
}

enum class Label { real, blended };

inline std::string to_string(Label l) { return l == Label::real ? "real" : "blended"; }

/// One generated record of the dataset ledger. Paths are relative to the
/// manifest's directory.
struct Sample {
  std::string id;
  Label label = Label::real;
  std::string blended_path;
  std::string xray_path;
  std::string mask_path;
  std::string fg_source;
  std::string bg_source;
  GenerationParams params;
  std::uint64_t seed = 0;

  bool operator==(const Sample&) const = default;
};

/// Result of validate_image(); converts to true when the image is valid.
struct Validation {
  bool ok = true;
  Errc code = Errc::OutOfRange;
  std::string detail;

  explicit operator bool() const noexcept { return ok; }
};

inline Validation validate_image(const Image& img) {
  if (img.width() < kMinImageSide || img.height() < kMinImageSide)
    return {false, Errc::BadDimensions, "image smaller than 16x16"};
  if (img.data().size() != img.pixel_count() * Image::kChannels)
    return {false, Errc::BadDimensions, "data length mismatch"};
  for (double v : img.data())
    if (!(v >= 0.0 && v <= 1.0)) return {false, Errc::OutOfRange, "intensity outside [0,1]"};
  return {};
}

template <class Tag>
Validation validate_field(const Field<Tag>& f) {
  if (f.width() < kMinImageSide || f.height() < kMinImageSide)
    return {false, Errc::BadDimensions, "field smaller than 16x16"};
  for (double v : f.data())
    if (!(v >= 0.0 && v <= 1.0)) return {false, Errc::OutOfRange, "value outside [0,1]"};
  return {};
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the stream owned by sample `index`:
/// splitmix64(global_seed ^ splitmix64(index)).
inline constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index) noexcept {
  return splitmix64(global_seed ^ splitmix64(index));
}

/// mt19937_64 with hand-written distributions. The standard distributions
/// are implementation-defined, which would make outputs depend on the
/// standard library in use.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection.
  std::size_t index(std::size_t n) {
    if (n == 0) fail(Errc::InvalidParams, "index() on empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Sampling helpers shared by warping and resizing
// ---------------------------------------------------------------------------

/// Bilinear sample at (x, y) with clamp-to-edge addressing.
template <class Getter>
double bilinear(Getter&& get, int width, int height, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * get(x0, y0) + fx * get(x1, y0);
  const double bottom = (1.0 - fx) * get(x0, y1) + fx * get(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

inline double sample_bilinear(const Image& img, double x, double y, int c) {
  return bilinear([&](int xx, int yy) { return img.at(xx, yy, c); }, img.width(), img.height(), x, y);
}

template <class Tag>
double sample_bilinear(const Field<Tag>& f, double x, double y) {
  return bilinear([&](int xx, int yy) { return f.at(xx, yy); }, f.width(), f.height(), x, y);
}

// Half-pixel-center mapping between grids of different size.
inline double resize_coord(int dst_index, int src_len, int dst_len) {
  return (dst_index + 0.5) * static_cast<double>(src_len) / dst_len - 0.5;
}

inline Image resize_bilinear(const Image& img, int width, int height) {
  if (img.width() == width && img.height() == height) return img;
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const double sy = resize_coord(y, img.height(), height);
    for (int x = 0; x < width; ++x) {
      const double sx = resize_coord(x, img.width(), width);
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = sample_bilinear(img, sx, sy, c);
    }
  }
  return out;
}

template <class Tag>
Field<Tag> resize_bilinear(const Field<Tag>& f, int width, int height) {
  if (f.width() == width && f.height() == height) return f;
  Field<Tag> out(width, height);
  for (int y = 0; y < height; ++y) {
    const double sy = resize_coord(y, f.height(), height);
    for (int x = 0; x < width; ++x) out.at(x, y) = sample_bilinear(f, resize_coord(x, f.width(), width), sy);
  }
  return out;
}

}  // namespace xrayforge
