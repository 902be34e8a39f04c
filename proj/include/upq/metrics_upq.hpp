#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/ledger.hpp"
#include "upq/matching.hpp"
#include "upq/raster.hpp"
#include "upq/segments.hpp"

namespace upq {

enum class PixelState : std::uint8_t {
  kOriginal = 0,  // keeps its predicted label
  kAny = 1,       // correctly claimed uncertain: wildcard, never a segment
  kVoidU = 2,     // wrongly claimed uncertain: counts as a missing prediction
};

/// Outcome for a class-unconfident pixel.
constexpr PixelState class_unconfident_state(Difficulty d) {
  return d == Difficulty::kDifficultClass ? PixelState::kAny : PixelState::kVoidU;
}

/// Outcome for a class-confident, instance-unconfident pixel. Over void
/// ground truth the pixel is left alone; with a wrong class it is VOID.
constexpr PixelState instance_unconfident_state(ClassId pred_cls, ClassId gt_cls, Difficulty d) {
  if (!is_valid_class(gt_cls)) return PixelState::kOriginal;
  if (pred_cls != gt_cls) return PixelState::kVoidU;
  return d == Difficulty::kNotDifficult ? PixelState::kVoidU : PixelState::kAny;
}

/// A prediction after confidence masking: the original labels plus a
/// per-pixel state. Labels at ANY/VOID pixels are retained but inert.
struct AugmentedPrediction {
  PanopticRaster labels;
  Raster<PixelState> state;

  int width() const { return labels.width(); }
  int height() const { return labels.height(); }

  SegmentKey key_at(std::size_t i) const {
    switch (state[i]) {
      case PixelState::kAny: return SegmentKey::any_key();
      case PixelState::kVoidU: return SegmentKey::void_u_key();
      case PixelState::kOriginal: break;
    }
    return key_of(labels[i]);
  }

  /// Every pixel in its original state.
  static AugmentedPrediction identity(PanopticRaster pred) {
    Raster<PixelState> state(pred.width(), pred.height(), PixelState::kOriginal);
    return {std::move(pred), std::move(state)};
  }
};

/// Converts unconfident prediction pixels to ANY or VOID by comparing the
/// confidence claim with the ground-truth difficulty.
inline AugmentedPrediction apply_confidence_masks(const PanopticRaster& pred, const PanopticRaster& gt,
                                                  const DifficultyRaster& difficulty,
                                                  const BinaryConfidenceMask& class_mask,
                                                  const BinaryConfidenceMask& inst_mask) {
  if (class_mask.kind != ConfidenceKind::kClass) {
    throw Error(ErrorKind::kArgument, "class mask is not a class-level confidence mask");
  }
  if (inst_mask.kind != ConfidenceKind::kInstance) {
    throw Error(ErrorKind::kArgument, "instance mask is not an instance-level confidence mask");
  }
  require_same_shape(pred, gt, "prediction and ground truth differ in size");
  require_same_shape(pred, difficulty, "prediction and difficulty map differ in size");
  require_same_shape(pred, class_mask.confident, "prediction and class confidence differ in size");
  require_same_shape(pred, inst_mask.confident, "prediction and instance confidence differ in size");

  AugmentedPrediction out = AugmentedPrediction::identity(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!class_mask.confident[i]) {
      out.state[i] = class_unconfident_state(difficulty[i]);
    } else if (!inst_mask.confident[i]) {
      out.state[i] = instance_unconfident_state(pred[i].cls, gt[i].cls, difficulty[i]);
    }
  }
  return out;
}

struct UpqMatch {
  MatchLedger ledger;
  /// The augmented prediction with matched ANY pixels replaced: step-1
  /// fills take the predicted labels, step-2 fills the ground-truth labels.
  AugmentedPrediction filled;
};

/// Two-step wildcard matching. Step 1 ignores ANY pixels and matches with
/// IoU > 0.5; ANY pixels inside a matched ground-truth segment are then
/// filled with the matched prediction. Step 2 matches each remaining
/// ground-truth segment more than half covered by ANY pixels. Residual
/// ANY pixels take no part in any IoU.
inline UpqMatch match_segments_upq(const AugmentedPrediction& aug, const PanopticRaster& gt) {
  require_same_shape(aug.labels, gt, "augmented prediction and ground truth differ in size");
  require_same_shape(aug.labels, aug.state, "augmented prediction state");
  validate_panoptic(aug.labels);
  validate_panoptic(gt);

  const IndexedRaster pi = index_pixels(aug.labels.size(), [&](std::size_t i) { return aug.key_at(i); });
  const IndexedRaster gi = index_panoptic(gt);
  MatchResult m = detail::match_histogram(OverlapHistogram::from_indexed(pi, gi));

  UpqMatch out{std::move(m.ledger), aug};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (aug.state[i] != PixelState::kAny) continue;
    const auto& matched = m.gt_match[gi.index[i]];
    if (!matched) continue;
    const SegmentKey p = *matched;
    out.filled.labels[i] = is_stuff(p.cls) ? PanopticLabel::stuff(p.cls) : PanopticLabel::thing(p.cls, p.id);
    out.filled.state[i] = PixelState::kOriginal;
  }
  return out;
}

inline MetricReport compute_upq(const MatchLedger& ledger) { return compute_quality(ledger); }

}  // namespace upq
