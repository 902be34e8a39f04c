#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/raster.hpp"

namespace upq {

/// Per-pixel dense index into a sorted list of distinct keys.
struct IndexedRaster {
  std::vector<SegmentKey> keys;
  std::vector<std::uint32_t> index;
};

/// Indexes `n` pixels by the key returned from `key_at(i)`. Keys come out
/// sorted, so indices are independent of pixel visiting order.
template <typename KeyAt>
IndexedRaster index_pixels(std::size_t n, KeyAt&& key_at) {
  IndexedRaster out;
  out.index.resize(n);
  std::unordered_map<std::uint64_t, std::uint32_t> provisional;
  std::vector<SegmentKey> first_seen;
  std::uint64_t last = ~std::uint64_t{0};
  std::uint32_t last_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SegmentKey key = key_at(i);
    const std::uint64_t packed = key.packed();
    if (packed != last) {
      auto [it, inserted] = provisional.emplace(packed, static_cast<std::uint32_t>(first_seen.size()));
      if (inserted) first_seen.push_back(key);
      last = packed;
      last_id = it->second;
    }
    out.index[i] = last_id;
  }
  std::vector<std::uint32_t> order(first_seen.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return first_seen[a] < first_seen[b]; });
  std::vector<std::uint32_t> remap(first_seen.size());
  out.keys.resize(first_seen.size());
  for (std::uint32_t rank = 0; rank < order.size(); ++rank) {
    remap[order[rank]] = rank;
    out.keys[rank] = first_seen[order[rank]];
  }
  for (auto& v : out.index) v = remap[v];
  return out;
}

/// Indexes an already validated panoptic raster by segment key.
inline IndexedRaster index_panoptic(const PanopticRaster& raster) {
  return index_pixels(raster.size(), [&](std::size_t i) { return key_of(raster[i]); });
}

struct SegmentArea {
  SegmentKey key;
  std::uint64_t area = 0;
  friend bool operator==(const SegmentArea&, const SegmentArea&) = default;
};

/// Areas of the evaluable segments of one raster, plus the pixel counts of
/// its sentinel regions (void and per-class unknown-instance).
class SegmentTable {
 public:
  SegmentTable() = default;
  SegmentTable(std::vector<SegmentArea> segments, std::vector<SegmentArea> sentinels)
      : segments_(std::move(segments)), sentinels_(std::move(sentinels)) {}

  std::span<const SegmentArea> segments() const { return segments_; }
  std::span<const SegmentArea> sentinels() const { return sentinels_; }
  std::size_t size() const { return segments_.size(); }

  /// Area of a segment or sentinel region; zero when absent.
  std::uint64_t area(SegmentKey key) const {
    for (auto list : {std::span<const SegmentArea>(segments_), std::span<const SegmentArea>(sentinels_)}) {
      auto it = std::lower_bound(list.begin(), list.end(), key,
                                 [](const SegmentArea& s, const SegmentKey& k) { return s.key < k; });
      if (it != list.end() && it->key == key) return it->area;
    }
    return 0;
  }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto& s : segments_) sum += s.area;
    for (const auto& s : sentinels_) sum += s.area;
    return sum;
  }

  friend bool operator==(const SegmentTable&, const SegmentTable&) = default;

 private:
  std::vector<SegmentArea> segments_;
  std::vector<SegmentArea> sentinels_;
};

inline SegmentTable table_from_index(const IndexedRaster& indexed) {
  std::vector<std::uint64_t> counts(indexed.keys.size(), 0);
  for (auto v : indexed.index) ++counts[v];
  std::vector<SegmentArea> segments, sentinels;
  for (std::size_t k = 0; k < indexed.keys.size(); ++k) {
    (indexed.keys[k].is_segment() ? segments : sentinels).push_back({indexed.keys[k], counts[k]});
  }
  return SegmentTable(std::move(segments), std::move(sentinels));
}

/// Validates the raster and tabulates its segment areas.
inline SegmentTable build_segment_table(const PanopticRaster& raster) {
  validate_panoptic(raster);
  return table_from_index(index_panoptic(raster));
}

/// Sparse joint histogram of (predicted key, ground-truth key) pixel counts.
/// Keys include sentinels, so every pixel lands in exactly one entry.
class OverlapHistogram {
 public:
  struct Entry {
    std::uint32_t pred = 0;
    std::uint32_t gt = 0;
    std::uint64_t count = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  OverlapHistogram() = default;
  /// Entries must be sorted by (pred, gt) without duplicates or zero counts.
  OverlapHistogram(std::vector<SegmentKey> pred_keys, std::vector<SegmentKey> gt_keys, std::vector<Entry> entries)
      : pred_keys_(std::move(pred_keys)), gt_keys_(std::move(gt_keys)), entries_(std::move(entries)) {}

  static OverlapHistogram from_indexed(const IndexedRaster& pred, const IndexedRaster& gt) {
    if (pred.index.size() != gt.index.size()) {
      throw Error(ErrorKind::kDimension, "overlap histogram inputs differ in pixel count");
    }
    const std::uint64_t np = pred.keys.size();
    const std::uint64_t ng = gt.keys.size();
    std::vector<Entry> entries;
    if (np * ng <= (std::uint64_t{1} << 22)) {
      std::vector<std::uint64_t> dense(np * ng, 0);
      for (std::size_t i = 0; i < pred.index.size(); ++i) ++dense[pred.index[i] * ng + gt.index[i]];
      for (std::uint64_t c = 0; c < dense.size(); ++c) {
        if (dense[c] != 0) {
          entries.push_back({static_cast<std::uint32_t>(c / ng), static_cast<std::uint32_t>(c % ng), dense[c]});
        }
      }
    } else {
      std::unordered_map<std::uint64_t, std::uint64_t> sparse;
      for (std::size_t i = 0; i < pred.index.size(); ++i) ++sparse[pred.index[i] * ng + gt.index[i]];
      entries.reserve(sparse.size());
      for (auto [cell, count] : sparse) {
        entries.push_back({static_cast<std::uint32_t>(cell / ng), static_cast<std::uint32_t>(cell % ng), count});
      }
      std::sort(entries.begin(), entries.end(),
                [](const Entry& a, const Entry& b) { return std::pair(a.pred, a.gt) < std::pair(b.pred, b.gt); });
    }
    return OverlapHistogram(pred.keys, gt.keys, std::move(entries));
  }

  const std::vector<SegmentKey>& pred_keys() const { return pred_keys_; }
  const std::vector<SegmentKey>& gt_keys() const { return gt_keys_; }
  std::span<const Entry> entries() const { return entries_; }

  std::uint64_t count(SegmentKey pred, SegmentKey gt) const {
    auto pi = std::lower_bound(pred_keys_.begin(), pred_keys_.end(), pred);
    auto gi = std::lower_bound(gt_keys_.begin(), gt_keys_.end(), gt);
    if (pi == pred_keys_.end() || *pi != pred || gi == gt_keys_.end() || *gi != gt) return 0;
    const Entry probe{static_cast<std::uint32_t>(pi - pred_keys_.begin()),
                      static_cast<std::uint32_t>(gi - gt_keys_.begin()), 0};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), probe, [](const Entry& a, const Entry& b) {
      return std::pair(a.pred, a.gt) < std::pair(b.pred, b.gt);
    });
    return (it != entries_.end() && it->pred == probe.pred && it->gt == probe.gt) ? it->count : 0;
  }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (const auto& e : entries_) sum += e.count;
    return sum;
  }

  std::vector<std::uint64_t> pred_marginals() const {
    std::vector<std::uint64_t> out(pred_keys_.size(), 0);
    for (const auto& e : entries_) out[e.pred] += e.count;
    return out;
  }

  std::vector<std::uint64_t> gt_marginals() const {
    std::vector<std::uint64_t> out(gt_keys_.size(), 0);
    for (const auto& e : entries_) out[e.gt] += e.count;
    return out;
  }

  /// Swaps the roles of prediction and ground truth.
  OverlapHistogram transposed() const {
    std::vector<Entry> swapped;
    swapped.reserve(entries_.size());
    for (const auto& e : entries_) swapped.push_back({e.gt, e.pred, e.count});
    std::sort(swapped.begin(), swapped.end(),
              [](const Entry& a, const Entry& b) { return std::pair(a.pred, a.gt) < std::pair(b.pred, b.gt); });
    return OverlapHistogram(gt_keys_, pred_keys_, std::move(swapped));
  }

  friend bool operator==(const OverlapHistogram&, const OverlapHistogram&) = default;

 private:
  std::vector<SegmentKey> pred_keys_;
  std::vector<SegmentKey> gt_keys_;
  std::vector<Entry> entries_;
};

/// Single-pass joint histogram of two validated rasters.
inline OverlapHistogram build_overlap_histogram(const PanopticRaster& pred, const PanopticRaster& gt) {
  require_same_shape(pred, gt, "prediction and ground truth differ in size");
  validate_panoptic(pred);
  validate_panoptic(gt);
  return OverlapHistogram::from_indexed(index_panoptic(pred), index_panoptic(gt));
}

}  // namespace upq
