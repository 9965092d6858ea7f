#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "xrayforge/core.hpp"

namespace xrayforge {

// Rasters are [0,1] doubles in memory; 8-bit (16-bit for masks) only on disk.

inline std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }
inline std::uint16_t to_u16(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

inline cv::Mat to_mat(const Image& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x)
      row[x] = cv::Vec3b(to_u8(img.at(x, y, 2)), to_u8(img.at(x, y, 1)), to_u8(img.at(x, y, 0)));
  }
  return m;
}

inline Image from_mat(const cv::Mat& m) {
  const double scale = m.depth() == CV_16U ? 65535.0 : 255.0;
  Image img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      for (int c = 0; c < 3; ++c) {
        const int src_c = m.channels() == 1 ? 0 : 2 - c;
        const double v = m.depth() == CV_16U ? m.ptr<std::uint16_t>(y)[x * m.channels() + src_c]
                                             : m.ptr<std::uint8_t>(y)[x * m.channels() + src_c];
        img.at(x, y, c) = v / scale;
      }
  return img;
}

inline const std::vector<int>& png_params() {
  static const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
  return params;
}

inline void write_mat(const std::filesystem::path& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m, png_params());
  } catch (const cv::Exception& e) {
    fail(Errc::IoError, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) fail(Errc::IoError, "cannot write " + path.string());
}

inline cv::Mat read_mat(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) fail(Errc::UnreadableFile, "missing file " + path.string());
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    fail(Errc::UnreadableFile, "cannot decode " + path.string() + ": " + e.what());
  }
  if (m.empty()) fail(Errc::UnreadableFile, "cannot decode " + path.string());
  if (m.depth() != CV_8U && m.depth() != CV_16U) fail(Errc::UnreadableFile, "unsupported bit depth in " + path.string());
  return m;
}

inline Image read_image(const std::filesystem::path& path) {
  cv::Mat m = read_mat(path, cv::IMREAD_COLOR);
  if (m.depth() == CV_16U) m.convertTo(m, CV_8U, 1.0 / 257.0);
  return from_mat(m);
}

inline void write_png(const std::filesystem::path& path, const Image& img) { write_mat(path, to_mat(img)); }

template <class Tag>
void write_png8(const std::filesystem::path& path, const Field<Tag>& f) {
  cv::Mat m(f.height(), f.width(), CV_8UC1);
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) m.at<std::uint8_t>(y, x) = to_u8(f.at(x, y));
  write_mat(path, m);
}

template <class Tag>
void write_png16(const std::filesystem::path& path, const Field<Tag>& f) {
  cv::Mat m(f.height(), f.width(), CV_16UC1);
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) m.at<std::uint16_t>(y, x) = to_u16(f.at(x, y));
  write_mat(path, m);
}

/// Reads a single-channel PNG (8 or 16 bit) into a field scaled to [0,1].
template <class Tag>
Field<Tag> read_field(const std::filesystem::path& path) {
  const cv::Mat m = read_mat(path, cv::IMREAD_UNCHANGED);
  if (m.channels() != 1) fail(Errc::UnreadableFile, path.string() + " is not single-channel");
  Field<Tag> f(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      f.at(x, y) = m.depth() == CV_16U ? m.at<std::uint16_t>(y, x) / 65535.0 : m.at<std::uint8_t>(y, x) / 255.0;
  return f;
}

inline bool jpeg_available() { return cv::haveImageWriter(".jpg"); }

/// Encodes to JPEG at `quality` (1-100) in memory and decodes back.
inline Image jpeg_roundtrip(const Image& img, int quality) {
  if (quality < 1 || quality > 100) fail(Errc::InvalidParams, "jpeg quality must be in [1,100]");
  if (!jpeg_available()) fail(Errc::CodecUnavailable, "no JPEG codec in this OpenCV build");
  std::vector<std::uint8_t> buf;
  try {
    if (!cv::imencode(".jpg", to_mat(img), buf, {cv::IMWRITE_JPEG_QUALITY, quality}))
      fail(Errc::CodecUnavailable, "JPEG encode failed");
    const cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (decoded.empty()) fail(Errc::CodecUnavailable, "JPEG decode failed");
    return from_mat(decoded);
  } catch (const cv::Exception& e) {
    fail(Errc::CodecUnavailable, e.what());
  }
}

}  // namespace xrayforge
