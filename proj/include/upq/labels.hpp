#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

namespace upq {

// Evaluation taxonomy: the 19 Cityscapes evaluation classes in train-id
// order. Ids 0-10 are stuff, 11-18 are things.
using ClassId = std::uint8_t;
using SegmentId = std::uint32_t;

inline constexpr int kNumClasses = 19;
inline constexpr int kNumStuffClasses = 11;
inline constexpr ClassId kFirstThingClass = 11;

// Sentinel classes. Unknown covers both "class indiscernible" and
// "not labeled at all"; other is the annotators' fallback for objects
// outside the taxonomy. Both are void for evaluation.
inline constexpr ClassId kUnknownClass = 255;
inline constexpr ClassId kOtherClass = 254;
// Pseudo-classes that only appear in evaluation-internal keys.
inline constexpr ClassId kAnyClass = 253;
inline constexpr ClassId kVoidUClass = 252;

// Stuff pixels carry kNoSegment; a stuff class forms one segment per raster.
inline constexpr SegmentId kNoSegment = 0;
inline constexpr SegmentId kUnknownInstance = 0xFFFFFFFFu;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "road",   "sidewalk", "building", "wall",       "fence",         "pole",
    "light",  "sign",     "vegetation", "terrain",  "sky",           "person",
    "rider",  "car",      "truck",    "bus",        "train",         "motorcycle",
    "bicycle"};

constexpr bool is_valid_class(ClassId c) { return c < kNumClasses; }
constexpr bool is_thing(ClassId c) { return c >= kFirstThingClass && c < kNumClasses; }
constexpr bool is_stuff(ClassId c) { return c < kFirstThingClass; }
constexpr bool is_void_class(ClassId c) { return c == kUnknownClass || c == kOtherClass; }

constexpr std::string_view class_name(ClassId c) {
  if (is_valid_class(c)) return kClassNames[c];
  switch (c) {
    case kUnknownClass: return "unknown_class";
    case kOtherClass: return "other_class";
    case kAnyClass: return "ANY";
    case kVoidUClass: return "VOID";
    default: return "invalid";
  }
}

inline std::optional<ClassId> class_from_name(std::string_view name) {
  for (int c = 0; c < kNumClasses; ++c) {
    if (kClassNames[c] == name) return static_cast<ClassId>(c);
  }
  return std::nullopt;
}

/// Per-pixel panoptic label.
struct PanopticLabel {
  ClassId cls = kUnknownClass;
  SegmentId segment = kUnknownInstance;

  friend constexpr bool operator==(const PanopticLabel&, const PanopticLabel&) = default;

  static constexpr PanopticLabel unknown() { return {kUnknownClass, kUnknownInstance}; }
  static constexpr PanopticLabel other() { return {kOtherClass, kUnknownInstance}; }
  static constexpr PanopticLabel stuff(ClassId c) { return {c, kNoSegment}; }
  static constexpr PanopticLabel thing(ClassId c, SegmentId id) { return {c, id}; }
  static constexpr PanopticLabel unknown_instance(ClassId c) { return {c, kUnknownInstance}; }
};

/// Identity of a segment (or of a sentinel region) within one raster.
struct SegmentKey {
  ClassId cls = kUnknownClass;
  SegmentId id = kUnknownInstance;

  friend constexpr auto operator<=>(const SegmentKey&, const SegmentKey&) = default;

  constexpr std::uint64_t packed() const {
    return (std::uint64_t{cls} << 32) | std::uint64_t{id};
  }
  static constexpr SegmentKey unpack(std::uint64_t v) {
    return {static_cast<ClassId>(v >> 32), static_cast<SegmentId>(v & 0xFFFFFFFFu)};
  }

  /// Real segments are evaluable: a valid class and a resolved identity.
  constexpr bool is_segment() const { return is_valid_class(cls) && id != kUnknownInstance; }
  constexpr bool is_void() const { return cls == kUnknownClass && id == kUnknownInstance; }
  /// Unknown-instance region of a things class.
  constexpr bool is_crowd() const { return is_thing(cls) && id == kUnknownInstance; }
  constexpr bool is_any() const { return cls == kAnyClass; }
  constexpr bool is_void_u() const { return cls == kVoidUClass; }

  static constexpr SegmentKey void_key() { return {kUnknownClass, kUnknownInstance}; }
  static constexpr SegmentKey any_key() { return {kAnyClass, 0}; }
  static constexpr SegmentKey void_u_key() { return {kVoidUClass, 0}; }
};

/// Maps a pixel label to the key it contributes to. Unknown and other
/// classes collapse onto the void key; stuff ids are ignored.
constexpr SegmentKey key_of(PanopticLabel label) {
  if (is_void_class(label.cls) || !is_valid_class(label.cls)) return SegmentKey::void_key();
  if (is_stuff(label.cls)) return {label.cls, kNoSegment};
  return {label.cls, label.segment};
}

}  // namespace upq

template <>
struct std::hash<upq::SegmentKey> {
  std::size_t operator()(const upq::SegmentKey& k) const noexcept {
    return std::hash<std::uint64_t>{}(k.packed());
  }
};
