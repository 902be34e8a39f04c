#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/raster.hpp"

namespace upq {

namespace detail {

struct PairOverlap {
  std::uint64_t count = 0;
  std::size_t first_pixel = 0;
};

struct PairHash {
  std::size_t operator()(const std::pair<SegmentId, SegmentId>& p) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{p.first} << 32) | p.second);
  }
};

// Greedy maximal-overlap bijection between stage-1 and stage-2 instance
// ids. Ties go to the pair that co-occurs first in raster order, which
// keeps the result independent of the id values themselves.
inline std::unordered_map<SegmentId, SegmentId> correspond_instances(const PanopticRaster& h1,
                                                                     const PanopticRaster& h2) {
  std::unordered_map<std::pair<SegmentId, SegmentId>, PairOverlap, PairHash> overlap;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    const PanopticLabel a = h1[i];
    const PanopticLabel b = h2[i];
    if (!is_thing(a.cls) || a.cls != b.cls || a.segment == kUnknownInstance || b.segment == kUnknownInstance) continue;
    auto [it, inserted] = overlap.try_emplace({a.segment, b.segment}, PairOverlap{0, i});
    ++it->second.count;
  }
  std::vector<std::pair<std::pair<SegmentId, SegmentId>, PairOverlap>> ranked(overlap.begin(), overlap.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.second.count != y.second.count) return x.second.count > y.second.count;
    return x.second.first_pixel < y.second.first_pixel;
  });
  std::unordered_map<SegmentId, SegmentId> forward;
  std::unordered_set<SegmentId> taken;
  for (const auto& [ids, ov] : ranked) {
    if (forward.contains(ids.first) || taken.contains(ids.second)) continue;
    forward.emplace(ids.first, ids.second);
    taken.insert(ids.second);
  }
  return forward;
}

}  // namespace detail

/// Ternary difficulty of one pixel given its labels in both stages and
/// whether its two instance ids correspond.
constexpr Difficulty pixel_difficulty(PanopticLabel h1, PanopticLabel h2, bool instances_correspond) {
  if (h1.cls == kUnknownClass || h2.cls == kUnknownClass) return Difficulty::kDifficultClass;
  if (h1.cls != h2.cls) return Difficulty::kDifficultClass;
  if (!is_thing(h2.cls)) return Difficulty::kNotDifficult;
  if (h1.segment == kUnknownInstance || h2.segment == kUnknownInstance) return Difficulty::kDifficultInstance;
  return instances_correspond ? Difficulty::kNotDifficult : Difficulty::kDifficultInstance;
}

/// Difficulty map from the stage-1 and final stage-2 annotations: consistent
/// pixels are not difficult, instance disagreements or unknown instances are
/// difficult_instance, and class disagreements or unknown classes are
/// difficult_class. Stage-1 unlabeled pixels count as unknown class.
inline DifficultyRaster derive_difficulty(const PanopticRaster& h1, const PanopticRaster& h2) {
  require_same_shape(h1, h2, "stage-1 and stage-2 annotations differ in size");
  validate_panoptic(h1);
  validate_panoptic(h2);
  const auto forward = detail::correspond_instances(h1, h2);
  DifficultyRaster out(h1.width(), h1.height(), Difficulty::kNotDifficult);
  for (std::size_t i = 0; i < h1.size(); ++i) {
    const PanopticLabel a = h1[i];
    const PanopticLabel b = h2[i];
    bool correspond = false;
    if (is_thing(a.cls) && a.cls == b.cls && a.segment != kUnknownInstance) {
      auto it = forward.find(a.segment);
      correspond = it != forward.end() && it->second == b.segment;
    }
    out[i] = pixel_difficulty(a, b, correspond);
  }
  return out;
}

/// Pixel and instance counts for a set of stage pairs. Pixels split into
/// labeled in both stages, added in stage 2, and unlabeled in the final
/// annotation; "labeled" means any class other than unknown.
struct CoverageBucket {
  std::uint64_t samples = 0;
  std::uint64_t pixels = 0;
  std::uint64_t h1_labeled = 0;
  std::uint64_t h2_added = 0;
  std::uint64_t unlabeled = 0;
  std::uint64_t h1_instances = 0;
  std::uint64_t h2_instances = 0;

  double fraction(std::uint64_t part) const {
    return pixels == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(pixels);
  }
  double h1_fraction() const { return fraction(h1_labeled); }
  double added_fraction() const { return fraction(h2_added); }
  double unlabeled_fraction() const { return fraction(unlabeled); }

  void merge(const CoverageBucket& o) {
    samples += o.samples;
    pixels += o.pixels;
    h1_labeled += o.h1_labeled;
    h2_added += o.h2_added;
    unlabeled += o.unlabeled;
    h1_instances += o.h1_instances;
    h2_instances += o.h2_instances;
  }
  friend bool operator==(const CoverageBucket&, const CoverageBucket&) = default;
};

struct CoverageStats {
  CoverageBucket overall;
  std::map<std::string, CoverageBucket> per_condition;
};

struct StagePair {
  const PanopticRaster* h1 = nullptr;
  const PanopticRaster* h2 = nullptr;
  std::vector<std::string> conditions;
};

inline CoverageBucket coverage_of(const PanopticRaster& h1, const PanopticRaster& h2) {
  require_same_shape(h1, h2, "stage-1 and stage-2 annotations differ in size");
  CoverageBucket b;
  b.samples = 1;
  b.pixels = h1.size();
  std::unordered_set<SegmentId> ids1, ids2;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    const bool l1 = h1[i].cls != kUnknownClass;
    const bool l2 = h2[i].cls != kUnknownClass;
    if (!l2) {
      ++b.unlabeled;
    } else if (l1) {
      ++b.h1_labeled;
    } else {
      ++b.h2_added;
    }
    if (is_thing(h1[i].cls) && h1[i].segment != kUnknownInstance) ids1.insert(h1[i].segment);
    if (is_thing(h2[i].cls) && h2[i].segment != kUnknownInstance) ids2.insert(h2[i].segment);
  }
  b.h1_instances = ids1.size();
  b.h2_instances = ids2.size();
  return b;
}

inline CoverageStats coverage_stats(std::span<const StagePair> samples) {
  CoverageStats stats;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const StagePair& pair = samples[s];
    if (pair.h1 == nullptr || pair.h2 == nullptr) {
      throw Error(ErrorKind::kArgument, "sample " + std::to_string(s) + " is missing a stage annotation");
    }
    const CoverageBucket b = coverage_of(*pair.h1, *pair.h2);
    stats.overall.merge(b);
    for (const auto& tag : pair.conditions) stats.per_condition[tag].merge(b);
  }
  return stats;
}

}  // namespace upq
