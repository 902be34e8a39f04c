#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "upq/error.hpp"
#include "upq/labels.hpp"

namespace upq {

/// Dense row-major 2-D grid with a top-left origin.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::kArgument, "raster dimensions must be positive, got " +
                                            std::to_string(width) + "x" + std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Raster(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0 ||
        data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorKind::kArgument, "raster data does not match its dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  template <typename U>
  bool same_shape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::kDimension, std::string(what) + ": " + std::to_string(a.width()) + "x" +
                                           std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                           "x" + std::to_string(b.height()));
  }
}

using PanopticRaster = Raster<PanopticLabel>;

enum class Difficulty : std::uint8_t {
  kNotDifficult = 0,
  kDifficultInstance = 1,
  kDifficultClass = 2,
};

using DifficultyRaster = Raster<Difficulty>;

enum class ConfidenceKind : std::uint8_t { kClass, kInstance };

/// Per-pixel confidence score in [0, 1].
struct ConfidenceRaster {
  ConfidenceKind kind = ConfidenceKind::kClass;
  Raster<double> scores;

  int width() const { return scores.width(); }
  int height() const { return scores.height(); }
  friend bool operator==(const ConfidenceRaster&, const ConfidenceRaster&) = default;
};

/// Rejects scores outside [0, 1] (NaN included).
inline void validate_confidence(const ConfidenceRaster& conf) {
  for (double v : conf.scores.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kArgument, "confidence score " + std::to_string(v) + " outside [0, 1]");
    }
  }
}

/// Binarized confidence; nonzero means confident.
struct BinaryConfidenceMask {
  ConfidenceKind kind = ConfidenceKind::kClass;
  Raster<std::uint8_t> confident;

  int width() const { return confident.width(); }
  int height() const { return confident.height(); }
};

/// Checks the labeling invariants of a panoptic raster: classes are valid
/// or sentinel, stuff pixels carry kNoSegment, things pixels carry an
/// instance id or kUnknownInstance, and no instance id spans two classes.
inline void validate_panoptic(const PanopticRaster& raster) {
  std::unordered_map<SegmentId, ClassId> owner;
  SegmentId last_id = kNoSegment;
  ClassId last_cls = kUnknownClass;
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const PanopticLabel px = raster[i];
    if (is_void_class(px.cls)) continue;
    if (!is_valid_class(px.cls)) {
      throw Error(ErrorKind::kStructure, "pixel " + std::to_string(i) + " has invalid class " +
                                             std::to_string(int{px.cls}));
    }
    if (is_stuff(px.cls)) {
      if (px.segment != kNoSegment) {
        throw Error(ErrorKind::kStructure, "stuff pixel " + std::to_string(i) + " of class " +
                                               std::string(class_name(px.cls)) + " carries segment id " +
                                               std::to_string(px.segment));
      }
      continue;
    }
    if (px.segment == kNoSegment) {
      throw Error(ErrorKind::kStructure, "things pixel " + std::to_string(i) + " of class " +
                                             std::string(class_name(px.cls)) + " has no instance id");
    }
    if (px.segment == kUnknownInstance) continue;
    if (px.segment == last_id && px.cls == last_cls) continue;
    auto [it, inserted] = owner.emplace(px.segment, px.cls);
    if (!inserted && it->second != px.cls) {
      throw Error(ErrorKind::kStructure, "segment id " + std::to_string(px.segment) + " appears as both " +
                                             std::string(class_name(it->second)) + " and " +
                                             std::string(class_name(px.cls)));
    }
    last_id = px.segment;
    last_cls = px.cls;
  }
}

}  // namespace upq
