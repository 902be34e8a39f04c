#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "upq/error.hpp"
#include "upq/ledger.hpp"
#include "upq/matching.hpp"
#include "upq/metrics_upq.hpp"
#include "upq/parallel.hpp"
#include "upq/raster.hpp"
#include "upq/segments.hpp"

namespace upq {

enum class Binarization {
  kAtLeast,  // confident iff score >= threshold
  kAbove,    // confident iff score > threshold
};

constexpr bool is_confident(double score, double threshold, Binarization rule) {
  return rule == Binarization::kAtLeast ? score >= threshold : score > threshold;
}

/// Class-by-instance confidence thresholds. Cells are laid out class
/// threshold major: cell(kc, ki) = kc * inst_count + ki.
struct ThresholdGrid {
  std::vector<double> class_thresholds;
  std::vector<double> inst_thresholds;

  /// n equispaced thresholds on [lo, hi], endpoints included; a single
  /// threshold sits at lo.
  static ThresholdGrid linear(int n, double lo = 0.0, double hi = 1.0) {
    if (n < 1) throw Error(ErrorKind::kArgument, "grid size must be at least 1");
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) {
      throw Error(ErrorKind::kArgument, "grid endpoints must satisfy 0 <= lo <= hi <= 1");
    }
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      t[k] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    if (n > 1) t.back() = hi;
    ThresholdGrid g{t, t};
    g.validate();
    return g;
  }

  void validate() const {
    for (const auto* v : {&class_thresholds, &inst_thresholds}) {
      if (v->empty()) throw Error(ErrorKind::kArgument, "threshold grid axis is empty");
      for (std::size_t k = 0; k < v->size(); ++k) {
        if (!((*v)[k] >= 0.0 && (*v)[k] <= 1.0)) {
          throw Error(ErrorKind::kArgument, "thresholds must lie in [0, 1]");
        }
        if (k > 0 && !((*v)[k] > (*v)[k - 1])) {
          throw Error(ErrorKind::kArgument, "thresholds must be strictly increasing");
        }
      }
    }
  }

  std::size_t class_count() const { return class_thresholds.size(); }
  std::size_t inst_count() const { return inst_thresholds.size(); }
  std::size_t cells() const { return class_count() * inst_count(); }
  std::size_t cell(std::size_t kc, std::size_t ki) const { return kc * inst_count() + ki; }

  friend bool operator==(const ThresholdGrid&, const ThresholdGrid&) = default;
};

inline BinaryConfidenceMask binarize(const ConfidenceRaster& conf, double threshold,
                                     Binarization rule = Binarization::kAtLeast) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::kArgument, "threshold " + std::to_string(threshold) + " outside [0, 1]");
  }
  BinaryConfidenceMask mask{conf.kind, Raster<std::uint8_t>(conf.width(), conf.height(), 0)};
  for (std::size_t i = 0; i < conf.scores.size(); ++i) {
    mask.confident[i] = is_confident(conf.scores[i], threshold, rule) ? 1 : 0;
  }
  return mask;
}

/// Highest threshold index at which `score` is confident, or -1.
inline int confident_up_to(double score, std::span<const double> thresholds, Binarization rule) {
  const auto it = rule == Binarization::kAtLeast
                      ? std::upper_bound(thresholds.begin(), thresholds.end(), score)
                      : std::lower_bound(thresholds.begin(), thresholds.end(), score);
  return static_cast<int>(it - thresholds.begin()) - 1;
}

/// Everything one sample contributes to an uncertainty-aware evaluation.
struct SampleView {
  const PanopticRaster& pred;
  const PanopticRaster& gt;
  const DifficultyRaster& difficulty;
  const ConfidenceRaster& class_conf;
  const ConfidenceRaster& inst_conf;
};

namespace detail {

inline void check_sample(const SampleView& s) {
  require_same_shape(s.pred, s.gt, "prediction and ground truth differ in size");
  require_same_shape(s.pred, s.difficulty, "prediction and difficulty map differ in size");
  require_same_shape(s.pred, s.class_conf.scores, "prediction and class confidence differ in size");
  require_same_shape(s.pred, s.inst_conf.scores, "prediction and instance confidence differ in size");
  if (s.class_conf.kind != ConfidenceKind::kClass || s.inst_conf.kind != ConfidenceKind::kInstance) {
    throw Error(ErrorKind::kArgument, "confidence rasters passed with the wrong kind");
  }
  validate_confidence(s.class_conf);
  validate_confidence(s.inst_conf);
}

}  // namespace detail

/// UPQ ledgers of one sample at a single operating point.
inline MatchLedger evaluate_upq_ledger(const SampleView& s, double class_threshold, double inst_threshold,
                                       Binarization rule = Binarization::kAtLeast) {
  detail::check_sample(s);
  const auto aug = apply_confidence_masks(s.pred, s.gt, s.difficulty, binarize(s.class_conf, class_threshold, rule),
                                          binarize(s.inst_conf, inst_threshold, rule));
  return match_segments_upq(aug, s.gt).ledger;
}

/// Reference sweep: one full masking and matching pass per grid cell.
inline std::vector<MatchLedger> sweep_image_naive(const SampleView& s, const ThresholdGrid& grid,
                                                  Binarization rule = Binarization::kAtLeast) {
  grid.validate();
  std::vector<MatchLedger> cells(grid.cells());
  for (std::size_t kc = 0; kc < grid.class_count(); ++kc) {
    for (std::size_t ki = 0; ki < grid.inst_count(); ++ki) {
      cells[grid.cell(kc, ki)] = evaluate_upq_ledger(s, grid.class_thresholds[kc], grid.inst_thresholds[ki], rule);
    }
  }
  return cells;
}

/// Incremental sweep over every grid cell of one sample.
///
/// Pixels are scanned once. Each pixel falls into a group keyed by its
/// (prediction, ground truth, difficulty) triple, and within the group into
/// a bin by the highest class and instance threshold index at which it is
/// still confident. A 2-D suffix sum over those bins yields, for any cell,
/// how many pixels of the group are fully confident, class-confident only,
/// or class-unconfident; each of those outcomes maps the whole group onto
/// one histogram slot. Cells are then matched from their histograms.
inline std::vector<MatchLedger> sweep_image(const SampleView& s, const ThresholdGrid& grid,
                                            Binarization rule = Binarization::kAtLeast) {
  grid.validate();
  detail::check_sample(s);
  validate_panoptic(s.pred);
  validate_panoptic(s.gt);

  const IndexedRaster pi = index_panoptic(s.pred);
  const IndexedRaster gi = index_panoptic(s.gt);
  const std::size_t ng = gi.keys.size();
  const std::size_t nc = grid.class_count();
  const std::size_t ni = grid.inst_count();
  const std::size_t rows = nc + 1;  // bin b = confident_up_to + 1 in [0, nc]
  const std::size_t cols = ni + 1;
  const std::size_t table = rows * cols;

  // Group pixels and bin them.
  std::unordered_map<std::uint64_t, std::uint32_t> group_of;
  std::vector<std::uint64_t> group_keys;
  std::vector<std::uint64_t> counts;
  std::uint64_t last_key = ~std::uint64_t{0};
  std::uint32_t last_group = 0;
  for (std::size_t i = 0; i < s.pred.size(); ++i) {
    const std::uint64_t key =
        (std::uint64_t{pi.index[i]} * ng + gi.index[i]) * 3 + static_cast<std::uint64_t>(s.difficulty[i]);
    if (key != last_key) {
      auto [it, inserted] = group_of.emplace(key, static_cast<std::uint32_t>(group_keys.size()));
      if (inserted) {
        group_keys.push_back(key);
        counts.resize(counts.size() + table, 0);
      }
      last_key = key;
      last_group = it->second;
    }
    const auto bc = static_cast<std::size_t>(confident_up_to(s.class_conf.scores[i], grid.class_thresholds, rule) + 1);
    const auto bi = static_cast<std::size_t>(confident_up_to(s.inst_conf.scores[i], grid.inst_thresholds, rule) + 1);
    ++counts[last_group * table + bc * cols + bi];
  }

  // 2-D suffix sums: S[a][b] = #pixels with class bin >= a and instance bin >= b.
  const std::size_t ngroups = group_keys.size();
  for (std::size_t g = 0; g < ngroups; ++g) {
    std::uint64_t* t = counts.data() + g * table;
    for (std::size_t a = rows; a-- > 0;) {
      for (std::size_t b = cols; b-- > 0;) {
        std::uint64_t v = t[a * cols + b];
        if (a + 1 < rows) v += t[(a + 1) * cols + b];
        if (b + 1 < cols) v += t[a * cols + b + 1];
        if (a + 1 < rows && b + 1 < cols) v -= t[(a + 1) * cols + b + 1];
        t[a * cols + b] = v;
      }
    }
  }

  // Predicted-side keys of every cell histogram: the raster keys plus ANY
  // and VOID, kept sorted.
  std::vector<SegmentKey> pred_keys = pi.keys;
  pred_keys.push_back(SegmentKey::any_key());
  pred_keys.push_back(SegmentKey::void_u_key());
  std::sort(pred_keys.begin(), pred_keys.end());
  auto pred_pos = [&](SegmentKey k) {
    return static_cast<std::uint32_t>(std::lower_bound(pred_keys.begin(), pred_keys.end(), k) - pred_keys.begin());
  };
  std::vector<std::uint32_t> remap(pi.keys.size());
  for (std::size_t k = 0; k < pi.keys.size(); ++k) remap[k] = pred_pos(pi.keys[k]);
  const std::uint32_t any_pos = pred_pos(SegmentKey::any_key());
  const std::uint32_t void_u_pos = pred_pos(SegmentKey::void_u_key());

  // Histogram slots each group can feed, in (pred, gt) order.
  struct Targets {
    std::uint32_t kept, inst_unconfident, class_unconfident;
  };
  std::vector<std::uint64_t> slot_cells;
  std::vector<Targets> targets(ngroups);
  {
    auto cell_of = [&](std::uint32_t pred, std::uint64_t g) { return std::uint64_t{pred} * ng + g; };
    auto pos_for = [&](PixelState st, std::uint32_t kept) {
      return st == PixelState::kAny ? any_pos : st == PixelState::kVoidU ? void_u_pos : kept;
    };
    std::vector<std::array<std::uint64_t, 3>> raw(ngroups);
    for (std::size_t g = 0; g < ngroups; ++g) {
      const std::uint64_t key = group_keys[g];
      const auto d = static_cast<Difficulty>(key % 3);
      const std::uint64_t gt = (key / 3) % ng;
      const auto pred = static_cast<std::uint32_t>((key / 3) / ng);
      const std::uint32_t kept = remap[pred];
      const PixelState iu = instance_unconfident_state(pi.keys[pred].cls, gi.keys[gt].cls, d);
      const PixelState cu = class_unconfident_state(d);
      raw[g] = {cell_of(kept, gt), cell_of(pos_for(iu, kept), gt), cell_of(pos_for(cu, kept), gt)};
      for (auto c : raw[g]) slot_cells.push_back(c);
    }
    std::sort(slot_cells.begin(), slot_cells.end());
    slot_cells.erase(std::unique(slot_cells.begin(), slot_cells.end()), slot_cells.end());
    auto slot = [&](std::uint64_t c) {
      return static_cast<std::uint32_t>(std::lower_bound(slot_cells.begin(), slot_cells.end(), c) -
                                        slot_cells.begin());
    };
    for (std::size_t g = 0; g < ngroups; ++g) targets[g] = {slot(raw[g][0]), slot(raw[g][1]), slot(raw[g][2])};
  }

  std::vector<MatchLedger> cells(grid.cells());
  std::vector<std::uint64_t> slot_counts(slot_cells.size());
  for (std::size_t kc = 0; kc < nc; ++kc) {
    for (std::size_t ki = 0; ki < ni; ++ki) {
      std::fill(slot_counts.begin(), slot_counts.end(), 0);
      for (std::size_t g = 0; g < ngroups; ++g) {
        const std::uint64_t* t = counts.data() + g * table;
        const std::uint64_t total = t[0];
        const std::uint64_t class_confident = t[(kc + 1) * cols];
        const std::uint64_t kept = t[(kc + 1) * cols + ki + 1];
        slot_counts[targets[g].kept] += kept;
        slot_counts[targets[g].inst_unconfident] += class_confident - kept;
        slot_counts[targets[g].class_unconfident] += total - class_confident;
      }
      std::vector<OverlapHistogram::Entry> entries;
      entries.reserve(slot_cells.size());
      for (std::size_t k = 0; k < slot_cells.size(); ++k) {
        if (slot_counts[k] == 0) continue;
        entries.push_back({static_cast<std::uint32_t>(slot_cells[k] / ng), static_cast<std::uint32_t>(slot_cells[k] % ng),
                           slot_counts[k]});
      }
      cells[grid.cell(kc, ki)] =
          detail::match_histogram(OverlapHistogram(pred_keys, gi.keys, std::move(entries))).ledger;
    }
  }
  return cells;
}

/// Area-under values of a sweep: means over grid cells.
struct ClassArea {
  std::optional<double> pq;
  std::optional<double> sq;
  std::optional<double> rq;
  friend bool operator==(const ClassArea&, const ClassArea&) = default;
};

struct SweepReport {
  ThresholdGrid grid;
  Binarization rule = Binarization::kAtLeast;
  std::vector<MetricReport> cells;  // cell(kc, ki) layout
  QualitySummary area_all;          // AUPQ / AUSQ / AURQ
  QualitySummary area_stuff;
  QualitySummary area_things;
  std::array<ClassArea, kNumClasses> per_class;

  const QualitySummary& area(ClassGroup g) const {
    return g == ClassGroup::kAll ? area_all : g == ClassGroup::kStuff ? area_stuff : area_things;
  }
};

/// Averages cell reports; each value is the mean over the cells where it
/// is defined.
inline SweepReport summarize_sweep(const ThresholdGrid& grid, Binarization rule, std::vector<MetricReport> cells) {
  SweepReport out;
  out.grid = grid;
  out.rule = rule;
  out.cells = std::move(cells);
  auto mean_opt = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    return mean_of(v);
  };
  for (ClassGroup g : kClassGroups) {
    std::vector<double> pq, sq, rq;
    int classes = 0;
    for (const auto& c : out.cells) {
      const QualitySummary& s = summary_of(c, g);
      if (s.pq) pq.push_back(*s.pq);
      if (s.sq) sq.push_back(*s.sq);
      if (s.rq) rq.push_back(*s.rq);
      classes = std::max(classes, s.classes);
    }
    QualitySummary& a = g == ClassGroup::kAll ? out.area_all : g == ClassGroup::kStuff ? out.area_stuff : out.area_things;
    a = {mean_opt(pq), mean_opt(sq), mean_opt(rq), classes};
  }
  for (int k = 0; k < kNumClasses; ++k) {
    std::vector<double> pq, sq, rq;
    for (const auto& c : out.cells) {
      const ClassQuality& q = c.per_class[k];
      if (!q.valid()) continue;
      pq.push_back(*q.pq);
      sq.push_back(q.sq.value_or(0.0));
      rq.push_back(*q.rq);
    }
    out.per_class[k] = {mean_opt(pq), mean_opt(sq), mean_opt(rq)};
  }
  return out;
}

/// Per-cell accumulation of sample ledgers; samples must be added in a
/// fixed order for byte-stable output.
class SweepAccumulator {
 public:
  SweepAccumulator(ThresholdGrid grid, Binarization rule, Aggregation mode)
      : grid_(std::move(grid)), rule_(rule), cells_(grid_.cells(), QualityAccumulator(mode)) {}

  void add(const std::vector<MatchLedger>& sample_cells) {
    if (sample_cells.size() != cells_.size()) throw Error(ErrorKind::kArgument, "cell count mismatch");
    for (std::size_t c = 0; c < cells_.size(); ++c) cells_[c].add(sample_cells[c]);
  }

  SweepReport finalize() const {
    std::vector<MetricReport> reports;
    reports.reserve(cells_.size());
    for (const auto& c : cells_) reports.push_back(c.finalize());
    return summarize_sweep(grid_, rule_, std::move(reports));
  }

 private:
  ThresholdGrid grid_;
  Binarization rule_;
  std::vector<QualityAccumulator> cells_;
};

/// Dataset sweep: per-sample cell ledgers computed in parallel, reduced in
/// sample order.
inline SweepReport sweep(std::span<const SampleView> samples, const ThresholdGrid& grid,
                         Binarization rule = Binarization::kAtLeast, Aggregation mode = Aggregation::kDataset,
                         int workers = 1) {
  std::vector<std::vector<MatchLedger>> per_sample(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) { per_sample[i] = sweep_image(samples[i], grid, rule); });
  SweepAccumulator acc(grid, rule, mode);
  for (const auto& cells : per_sample) acc.add(cells);
  return acc.finalize();
}

}  // namespace upq
