#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace upq {

/// Error categories. Loaders and the evaluation harness map these onto
/// distinct exit codes, so keep the set small and stable.
enum class ErrorKind {
  kArgument,   // caller passed an out-of-range value
  kDimension,  // raster sizes disagree
  kStructure,  // raster violates a labeling invariant
  kIo,         // file missing or unreadable
  kFormat,     // file readable but malformed
  kBitDepth,   // image has the wrong channel count or bit depth
  kSchema,     // unknown schema version in a structured file
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kStructure: return "structure";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kBitDepth: return "bit-depth";
    case ErrorKind::kSchema: return "schema";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the category prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace upq
