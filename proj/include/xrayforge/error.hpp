#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xrayforge {

enum class Errc {
  OutOfRange,
  BadDimensions,
  DimensionMismatch,
  InvalidParams,
  CountMismatch,
  EmptyPool,
  UnknownId,
  DegenerateHull,
  OutOfBounds,
  DegenerateTriangle,
  EmptyMask,
  EmptySupport,
  NonConvergence,
  RegionTouchesBorder,
  EmptyRegion,
  NoEntries,
  UnreadableFile,
  MalformedLandmarks,
  IoError,
  Corrupt,
  MissingFile,
  VersionMismatch,
  CodecUnavailable,
  OneClassOnly,
  NoPositives,
  MalformedRecord,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::BadDimensions: return "BadDimensions";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::UnknownId: return "UnknownId";
    case Errc::DegenerateHull: return "DegenerateHull";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::DegenerateTriangle: return "DegenerateTriangle";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::RegionTouchesBorder: return "RegionTouchesBorder";
    case Errc::EmptyRegion: return "EmptyRegion";
    case Errc::NoEntries: return "NoEntries";
    case Errc::UnreadableFile: return "UnreadableFile";
    case Errc::MalformedLandmarks: return "MalformedLandmarks";
    case Errc::IoError: return "IoError";
    case Errc::Corrupt: return "Corrupt";
    case Errc::MissingFile: return "MissingFile";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CodecUnavailable: return "CodecUnavailable";
    case Errc::OneClassOnly: return "OneClassOnly";
    case Errc::NoPositives: return "NoPositives";
    case Errc::MalformedRecord: return "MalformedRecord";
  }
  return "Unknown";
}

/// Exception carrying a stable error code; `what()` is "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail) { throw Error(code, detail); }

}  // namespace xrayforge
