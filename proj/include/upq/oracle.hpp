#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/ledger.hpp"
#include "upq/metrics_upq.hpp"
#include "upq/raster.hpp"
#include "upq/sweep.hpp"

// Brute-force reference semantics for segment matching. Every segment is
// materialized as an explicit sorted pixel list and every IoU is taken
// from explicit set unions; nothing here goes through the histogram
// machinery, so agreement with the fast path is a real check.
namespace upq::oracle {

using PixelSet = std::vector<std::uint32_t>;

inline std::size_t intersection_size(const PixelSet& a, const PixelSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

inline PixelSet set_and(const PixelSet& a, const PixelSet& b) {
  PixelSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}
inline PixelSet set_or(const PixelSet& a, const PixelSet& b) {
  PixelSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}
inline PixelSet set_minus(const PixelSet& a, const PixelSet& b) {
  PixelSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

struct GroundTruthSets {
  std::map<SegmentKey, PixelSet> segments;
  PixelSet void_pixels;
  std::map<ClassId, PixelSet> unknown_instance;
};

inline GroundTruthSets ground_truth_sets(const PanopticRaster& gt) {
  GroundTruthSets out;
  for (std::uint32_t i = 0; i < gt.size(); ++i) {
    const PanopticLabel l = gt[i];
    if (l.cls >= kNumClasses) {
      out.void_pixels.push_back(i);
    } else if (l.cls < kNumStuffClasses) {
      out.segments[{l.cls, 0}].push_back(i);
    } else if (l.segment == 0xFFFFFFFFu) {
      out.unknown_instance[l.cls].push_back(i);
    } else {
      out.segments[{l.cls, l.segment}].push_back(i);
    }
  }
  return out;
}

struct PredictionSets {
  std::map<SegmentKey, PixelSet> segments;
  PixelSet any;
};

/// Predicted segments from labels and per-pixel states; VOID pixels and
/// pixels without a resolved segment belong to nothing.
inline PredictionSets prediction_sets(const PanopticRaster& labels, const Raster<PixelState>* state) {
  PredictionSets out;
  for (std::uint32_t i = 0; i < labels.size(); ++i) {
    if (state != nullptr) {
      if ((*state)[i] == PixelState::kAny) {
        out.any.push_back(i);
        continue;
      }
      if ((*state)[i] == PixelState::kVoidU) continue;
    }
    const PanopticLabel l = labels[i];
    if (l.cls >= kNumClasses) continue;
    if (l.cls < kNumStuffClasses) {
      out.segments[{l.cls, 0}].push_back(i);
    } else if (l.segment != 0xFFFFFFFFu) {
      out.segments[{l.cls, l.segment}].push_back(i);
    }
  }
  return out;
}

/// Per-pixel confidence masking written directly from the rules.
inline Raster<PixelState> augment(const PanopticRaster& pred, const PanopticRaster& gt,
                                  const DifficultyRaster& difficulty, const ConfidenceRaster& class_conf,
                                  const ConfidenceRaster& inst_conf, double class_threshold, double inst_threshold,
                                  Binarization rule = Binarization::kAtLeast) {
  Raster<PixelState> state(pred.width(), pred.height(), PixelState::kOriginal);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double sc = class_conf.scores[i];
    const double si = inst_conf.scores[i];
    const bool class_ok = rule == Binarization::kAtLeast ? sc >= class_threshold : sc > class_threshold;
    const bool inst_ok = rule == Binarization::kAtLeast ? si >= inst_threshold : si > inst_threshold;
    const Difficulty d = difficulty[i];
    if (!class_ok) {
      state[i] = d == Difficulty::kDifficultClass ? PixelState::kAny : PixelState::kVoidU;
      continue;
    }
    if (inst_ok) continue;
    const ClassId g = gt[i].cls;
    if (g == kUnknownClass || g == kOtherClass) continue;
    if (pred[i].cls != g) {
      state[i] = PixelState::kVoidU;
    } else if (d == Difficulty::kDifficultInstance || d == Difficulty::kDifficultClass) {
      state[i] = PixelState::kAny;
    } else {
      state[i] = PixelState::kVoidU;
    }
  }
  return state;
}

/// Reference matching. Without `state` this is standard PQ; with it,
/// the two-step wildcard matching.
inline MatchLedger brute_force_match(const PanopticRaster& pred, const PanopticRaster& gt,
                                     const Raster<PixelState>* state = nullptr) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw Error(ErrorKind::kDimension, "oracle inputs differ in size");
  }
  const GroundTruthSets g = ground_truth_sets(gt);
  const PredictionSets p = prediction_sets(pred, state);

  struct Match {
    SegmentKey pred;
    PixelSet filled;
  };
  std::map<SegmentKey, Match> matched;  // by ground-truth key
  std::map<SegmentKey, bool> pred_used;

  // Step 1: ANY pixels ignored on both sides.
  for (const auto& [gk, gpix] : g.segments) {
    const PixelSet g_visible = set_minus(gpix, p.any);
    for (const auto& [pk, ppix] : p.segments) {
      if (pk.cls != gk.cls) continue;
      const std::size_t inter = intersection_size(ppix, gpix);
      if (inter == 0) continue;
      const std::size_t uni = set_or(set_minus(ppix, g.void_pixels), g_visible).size();
      if (2 * inter > uni) {
        matched[gk] = {pk, set_or(ppix, set_and(p.any, gpix))};
        pred_used[pk] = true;
      }
    }
  }
  PixelSet consumed;
  for (const auto& [gk, m] : matched) consumed = set_or(consumed, set_and(p.any, g.segments.at(gk)));

  // Step 2: remaining ground truth mostly covered by ANY.
  for (const auto& [gk, gpix] : g.segments) {
    if (matched.contains(gk)) continue;
    const PixelSet covered = set_and(set_minus(p.any, consumed), gpix);
    if (2 * covered.size() > gpix.size()) {
      matched[gk] = {gk, covered};
      consumed = set_or(consumed, covered);
    }
  }
  const PixelSet residual_any = set_minus(p.any, consumed);

  MatchLedger ledger;
  for (const auto& [gk, m] : matched) {
    const PixelSet& gpix = g.segments.at(gk);
    const std::size_t inter = intersection_size(m.filled, gpix);
    const std::size_t uni = set_or(set_minus(m.filled, g.void_pixels), set_minus(gpix, residual_any)).size();
    ledger[gk.cls].matches.push_back({m.pred, gk, static_cast<double>(inter) / static_cast<double>(uni)});
  }
  for (const auto& [gk, gpix] : g.segments) {
    if (!matched.contains(gk)) ++ledger[gk.cls].fn;
  }
  for (const auto& [pk, ppix] : p.segments) {
    if (pred_used.contains(pk)) continue;
    PixelSet ignore = g.void_pixels;
    if (auto it = g.unknown_instance.find(pk.cls); it != g.unknown_instance.end()) ignore = set_or(ignore, it->second);
    if (2 * intersection_size(ppix, ignore) > ppix.size()) continue;
    ++ledger[pk.cls].fp;
  }
  return ledger;
}

/// First difference between two ledgers, if any: counts and matched keys
/// must agree exactly, per-class IoU sums within `tolerance`.
inline std::optional<std::string> compare_ledgers(const MatchLedger& fast, const MatchLedger& reference,
                                                  double tolerance = 1e-12) {
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassLedger& a = fast.classes[c];
    const ClassLedger& b = reference.classes[c];
    const std::string name(class_name(static_cast<ClassId>(c)));
    if (a.tp() != b.tp() || a.fp != b.fp || a.fn != b.fn) {
      return name + ": TP/FP/FN " + std::to_string(a.tp()) + "/" + std::to_string(a.fp) + "/" + std::to_string(a.fn) +
             " vs " + std::to_string(b.tp()) + "/" + std::to_string(b.fp) + "/" + std::to_string(b.fn);
    }
    for (std::size_t k = 0; k < a.matches.size(); ++k) {
      if (a.matches[k].pred != b.matches[k].pred || a.matches[k].gt != b.matches[k].gt) {
        return name + ": matched pair " + std::to_string(k) + " differs";
      }
    }
    const double da = iou_sum(a);
    const double db = iou_sum(b);
    if (std::abs(da - db) > tolerance) {
      return name + ": IoU sum " + std::to_string(da) + " vs " + std::to_string(db);
    }
  }
  return std::nullopt;
}

}  // namespace upq::oracle
