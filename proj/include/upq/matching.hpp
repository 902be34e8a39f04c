#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "upq/labels.hpp"
#include "upq/ledger.hpp"
#include "upq/segments.hpp"

namespace upq {

/// Step-2 matches carry the ground-truth key as their predicted key: the
/// created segment takes the ground-truth labels.
struct MatchResult {
  MatchLedger ledger;
  // Per ground-truth index of the histogram: the predicted key it was
  // matched to, or nullopt.
  std::vector<std::optional<SegmentKey>> gt_match;
};

namespace detail {

// Shared matching core over a joint histogram whose predicted side may
// contain ANY and VOID_U keys. With neither present it is exactly standard
// PQ matching.
//
// For a same-class pair (p, g):
//   step 1 matches iff 2 * |p & g| > |p| + |g \ ANY| - |p & g| - |p & void|
//   the ANY pixels inside a matched g join p, so the final IoU is
//   (|p & g| + |ANY & g|) / (|p| + |g| - |p & g| - |p & void|)
// An unmatched g with 2 * |ANY & g| > |g| is matched in step 2 with IoU
// |ANY & g| / |g|. Unmatched predictions are FP unless more than half of
// them lies on void or same-class unknown-instance ground truth.
inline MatchResult match_histogram(const OverlapHistogram& hist) {
  const auto& pkeys = hist.pred_keys();
  const auto& gkeys = hist.gt_keys();
  const std::size_t np = pkeys.size();
  const std::size_t ng = gkeys.size();

  std::vector<std::uint64_t> pred_area(np, 0), pred_void(np, 0), pred_crowd(np, 0);
  std::vector<std::uint64_t> gt_area(ng, 0), gt_any(ng, 0);
  for (const auto& e : hist.entries()) {
    const SegmentKey p = pkeys[e.pred];
    const SegmentKey g = gkeys[e.gt];
    pred_area[e.pred] += e.count;
    gt_area[e.gt] += e.count;
    if (p.is_any()) gt_any[e.gt] += e.count;
    if (g.is_void()) pred_void[e.pred] += e.count;
    if (g.is_crowd() && g.cls == p.cls) pred_crowd[e.pred] += e.count;
  }

  MatchResult result;
  result.gt_match.assign(ng, std::nullopt);
  std::vector<bool> pred_matched(np, false);

  for (const auto& e : hist.entries()) {
    const SegmentKey p = pkeys[e.pred];
    const SegmentKey g = gkeys[e.gt];
    if (!p.is_segment() || !g.is_segment() || p.cls != g.cls) continue;
    const std::uint64_t inter = e.count;
    const std::uint64_t union_step1 =
        pred_area[e.pred] + (gt_area[e.gt] - gt_any[e.gt]) - inter - pred_void[e.pred];
    if (2 * inter <= union_step1) continue;
    const std::uint64_t union_final = pred_area[e.pred] + gt_area[e.gt] - inter - pred_void[e.pred];
    const double iou = static_cast<double>(inter + gt_any[e.gt]) / static_cast<double>(union_final);
    result.ledger[g.cls].matches.push_back({p, g, iou});
    result.gt_match[e.gt] = p;
    pred_matched[e.pred] = true;
  }

  for (std::size_t gi = 0; gi < ng; ++gi) {
    const SegmentKey g = gkeys[gi];
    if (!g.is_segment() || result.gt_match[gi]) continue;
    if (2 * gt_any[gi] > gt_area[gi]) {
      const double iou = static_cast<double>(gt_any[gi]) / static_cast<double>(gt_area[gi]);
      result.ledger[g.cls].matches.push_back({g, g, iou});
      result.gt_match[gi] = g;
    } else {
      ++result.ledger[g.cls].fn;
    }
  }

  for (std::size_t pi = 0; pi < np; ++pi) {
    const SegmentKey p = pkeys[pi];
    if (!p.is_segment() || pred_matched[pi] || pred_area[pi] == 0) continue;
    if (2 * (pred_void[pi] + pred_crowd[pi]) > pred_area[pi]) continue;
    ++result.ledger[p.cls].fp;
  }

  for (auto& cl : result.ledger.classes) {
    std::sort(cl.matches.begin(), cl.matches.end(),
              [](const MatchedPair& a, const MatchedPair& b) { return a.gt < b.gt; });
  }
  return result;
}

}  // namespace detail
}  // namespace upq
