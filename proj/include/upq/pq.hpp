#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upq/error.hpp"
#include "upq/ledger.hpp"
#include "upq/matching.hpp"
#include "upq/raster.hpp"
#include "upq/segments.hpp"

namespace upq {

/// Standard panoptic matching: same-class pairs with IoU strictly above
/// 0.5, void pixels of the prediction removed from the union, and
/// unmatched predictions lying mostly on void or same-class
/// unknown-instance regions ignored.
inline MatchLedger match_segments_pq(const OverlapHistogram& hist, const SegmentTable& pred_table,
                                     const SegmentTable& gt_table) {
  const auto pm = hist.pred_marginals();
  const auto gm = hist.gt_marginals();
  for (std::size_t i = 0; i < pm.size(); ++i) {
    if (pred_table.area(hist.pred_keys()[i]) != pm[i]) {
      throw Error(ErrorKind::kStructure, "prediction segment table does not match the histogram");
    }
  }
  for (std::size_t i = 0; i < gm.size(); ++i) {
    if (gt_table.area(hist.gt_keys()[i]) != gm[i]) {
      throw Error(ErrorKind::kStructure, "ground-truth segment table does not match the histogram");
    }
  }
  for (const auto& k : hist.pred_keys()) {
    if (k.is_any() || k.is_void_u()) {
      throw Error(ErrorKind::kArgument, "standard matching received ANY/VOID pixels");
    }
  }
  return detail::match_histogram(hist).ledger;
}

inline MetricReport compute_pq(const MatchLedger& ledger) { return compute_quality(ledger); }

/// Convenience: validate, histogram, and match one raster pair.
inline MatchLedger evaluate_pq_ledger(const PanopticRaster& pred, const PanopticRaster& gt) {
  require_same_shape(pred, gt, "prediction and ground truth differ in size");
  validate_panoptic(pred);
  validate_panoptic(gt);
  const IndexedRaster pi = index_panoptic(pred);
  const IndexedRaster gi = index_panoptic(gt);
  return detail::match_histogram(OverlapHistogram::from_indexed(pi, gi)).ledger;
}

/// Class confusion over non-void ground-truth pixels. Rows are ground
/// truth, columns predictions; column kNumClasses collects pixels whose
/// prediction is void.
struct ConfusionMatrix {
  static constexpr int kCols = kNumClasses + 1;
  std::array<std::uint64_t, kNumClasses * kCols> counts{};

  std::uint64_t& at(int gt, int pred) { return counts[gt * kCols + pred]; }
  std::uint64_t at(int gt, int pred) const { return counts[gt * kCols + pred]; }

  void merge(const ConfusionMatrix& other) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct IouReport {
  std::array<std::optional<double>, kNumClasses> per_class;
  std::optional<double> mean;
  friend bool operator==(const IouReport&, const IouReport&) = default;
};

inline ConfusionMatrix confusion_matrix(const PanopticRaster& pred, const PanopticRaster& gt) {
  require_same_shape(pred, gt, "semantic prediction and ground truth differ in size");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const ClassId g = gt[i].cls;
    if (!is_valid_class(g)) continue;
    const ClassId p = pred[i].cls;
    cm.at(g, is_valid_class(p) ? p : kNumClasses) += 1;
  }
  return cm;
}

/// IoU = diag / (row + col - diag); the mean runs over classes with a
/// nonzero union.
inline IouReport iou_from_confusion(const ConfusionMatrix& cm) {
  IouReport out;
  std::vector<double> present;
  for (int c = 0; c < kNumClasses; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int k = 0; k < ConfusionMatrix::kCols; ++k) row += cm.at(c, k);
    for (int k = 0; k < kNumClasses; ++k) col += cm.at(k, c);
    const std::uint64_t diag = cm.at(c, c);
    const std::uint64_t uni = row + col - diag;
    if (uni == 0) continue;
    out.per_class[c] = static_cast<double>(diag) / static_cast<double>(uni);
    present.push_back(*out.per_class[c]);
  }
  if (!present.empty()) out.mean = mean_of(present);
  return out;
}

inline IouReport compute_miou(const PanopticRaster& pred_semantic, const PanopticRaster& gt) {
  return iou_from_confusion(confusion_matrix(pred_semantic, gt));
}

}  // namespace upq
