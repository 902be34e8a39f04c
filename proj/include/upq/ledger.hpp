#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "upq/labels.hpp"

namespace upq {

struct MatchedPair {
  SegmentKey pred;
  SegmentKey gt;
  double iou = 0.0;
  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct ClassLedger {
  std::vector<MatchedPair> matches;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t tp() const { return matches.size(); }
  friend bool operator==(const ClassLedger&, const ClassLedger&) = default;
};

/// Matching outcome for one image, or the concatenation over a dataset.
struct MatchLedger {
  std::array<ClassLedger, kNumClasses> classes;

  ClassLedger& operator[](ClassId c) { return classes[c]; }
  const ClassLedger& operator[](ClassId c) const { return classes[c]; }

  /// Associative, commutative up to match order; quality numbers derived
  /// from a merged ledger do not depend on merge order.
  void merge(const MatchLedger& other) {
    for (int c = 0; c < kNumClasses; ++c) {
      auto& mine = classes[c];
      const auto& theirs = other.classes[c];
      mine.matches.insert(mine.matches.end(), theirs.matches.begin(), theirs.matches.end());
      mine.fp += theirs.fp;
      mine.fn += theirs.fn;
    }
  }

  friend bool operator==(const MatchLedger&, const MatchLedger&) = default;
};

namespace detail {

// Pairwise summation. Sums of 2^k equal terms are exact, which keeps a
// sweep of identical cells bit-equal to a single evaluation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace detail

/// Sum of matched IoUs in ascending order, independent of match order.
inline double iou_sum(const ClassLedger& ledger) {
  std::vector<double> values;
  values.reserve(ledger.matches.size());
  for (const auto& m : ledger.matches) values.push_back(m.iou);
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

inline double mean_of(std::span<const double> values) {
  return detail::pairwise_sum(values) / static_cast<double>(values.size());
}

struct ClassQuality {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  double iou_sum = 0.0;
  std::optional<double> pq;
  std::optional<double> sq;  // undefined without true positives
  std::optional<double> rq;

  bool valid() const { return pq.has_value(); }
  friend bool operator==(const ClassQuality&, const ClassQuality&) = default;
};

/// Mean quality over the valid classes of a class group.
struct QualitySummary {
  std::optional<double> pq;
  std::optional<double> sq;
  std::optional<double> rq;
  int classes = 0;
  friend bool operator==(const QualitySummary&, const QualitySummary&) = default;
};

/// Per-class and aggregated quality. The same arithmetic serves PQ and
/// UPQ; only the ledger it is computed from differs.
struct MetricReport {
  std::array<ClassQuality, kNumClasses> per_class;
  QualitySummary all;
  QualitySummary stuff;
  QualitySummary things;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

enum class ClassGroup { kAll, kStuff, kThings };

inline bool in_group(ClassId c, ClassGroup g) {
  switch (g) {
    case ClassGroup::kAll: return is_valid_class(c);
    case ClassGroup::kStuff: return is_stuff(c);
    case ClassGroup::kThings: return is_thing(c);
  }
  return false;
}

inline QualitySummary& summary_of(MetricReport& r, ClassGroup g) {
  return g == ClassGroup::kAll ? r.all : g == ClassGroup::kStuff ? r.stuff : r.things;
}
inline const QualitySummary& summary_of(const MetricReport& r, ClassGroup g) {
  return g == ClassGroup::kAll ? r.all : g == ClassGroup::kStuff ? r.stuff : r.things;
}

inline constexpr std::array<ClassGroup, 3> kClassGroups = {ClassGroup::kAll, ClassGroup::kStuff,
                                                           ClassGroup::kThings};

namespace detail {

// Class means follow the reference PQ tooling: a class is valid when
// TP + FP + FN > 0, and a valid class without true positives contributes
// zero SQ to the mean while its own SQ stays undefined.
inline void summarize(MetricReport& report) {
  for (ClassGroup g : kClassGroups) {
    std::vector<double> pq, sq, rq;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& q = report.per_class[c];
      if (!in_group(static_cast<ClassId>(c), g) || !q.valid()) continue;
      pq.push_back(*q.pq);
      sq.push_back(q.sq.value_or(0.0));
      rq.push_back(*q.rq);
    }
    QualitySummary& s = summary_of(report, g);
    s = {};
    s.classes = static_cast<int>(pq.size());
    if (!pq.empty()) {
      s.pq = mean_of(pq);
      s.sq = mean_of(sq);
      s.rq = mean_of(rq);
    }
  }
}

}  // namespace detail

/// PQ = sum IoU / (TP + FP/2 + FN/2), SQ = sum IoU / TP, RQ = TP / (TP + FP/2 + FN/2).
inline MetricReport compute_quality(const MatchLedger& ledger) {
  MetricReport report;
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassLedger& cl = ledger.classes[c];
    ClassQuality& q = report.per_class[c];
    q.tp = cl.tp();
    q.fp = cl.fp;
    q.fn = cl.fn;
    q.iou_sum = iou_sum(cl);
    const double denom = static_cast<double>(q.tp) + 0.5 * static_cast<double>(q.fp) + 0.5 * static_cast<double>(q.fn);
    if (denom == 0.0) continue;
    q.pq = q.iou_sum / denom;
    q.rq = static_cast<double>(q.tp) / denom;
    if (q.tp > 0) q.sq = q.iou_sum / static_cast<double>(q.tp);
  }
  detail::summarize(report);
  return report;
}

/// Element-wise mean of reports, each value over the reports where it is
/// defined. Counts and IoU sums are summed.
inline MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport out;
  auto mean_opt = [](std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    return mean_of(v);
  };
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> pq, sq, rq;
    ClassQuality& q = out.per_class[c];
    std::vector<double> sums;
    for (const auto& r : reports) {
      const ClassQuality& rc = r.per_class[c];
      q.tp += rc.tp;
      q.fp += rc.fp;
      q.fn += rc.fn;
      sums.push_back(rc.iou_sum);
      if (rc.pq) pq.push_back(*rc.pq);
      if (rc.sq) sq.push_back(*rc.sq);
      if (rc.rq) rq.push_back(*rc.rq);
    }
    q.iou_sum = detail::pairwise_sum(sums);
    q.pq = mean_opt(pq);
    q.sq = mean_opt(sq);
    q.rq = mean_opt(rq);
  }
  for (ClassGroup g : kClassGroups) {
    std::vector<double> pq, sq, rq;
    int classes = 0;
    for (const auto& r : reports) {
      const QualitySummary& s = summary_of(r, g);
      if (s.pq) pq.push_back(*s.pq);
      if (s.sq) sq.push_back(*s.sq);
      if (s.rq) rq.push_back(*s.rq);
      classes = std::max(classes, s.classes);
    }
    QualitySummary& s = summary_of(out, g);
    s.pq = mean_opt(pq);
    s.sq = mean_opt(sq);
    s.rq = mean_opt(rq);
    s.classes = classes;
  }
  return out;
}

enum class Aggregation { kDataset, kPerImageMean };

/// Collects per-image ledgers and reduces them under an aggregation mode.
/// Dataset mode pools ledgers before applying the quality formula.
class QualityAccumulator {
 public:
  explicit QualityAccumulator(Aggregation mode = Aggregation::kDataset) : mode_(mode) {}

  void add(const MatchLedger& image_ledger) {
    ++images_;
    if (mode_ == Aggregation::kDataset) {
      pooled_.merge(image_ledger);
    } else {
      per_image_.push_back(compute_quality(image_ledger));
    }
  }

  std::size_t images() const { return images_; }
  const MatchLedger& pooled() const { return pooled_; }

  MetricReport finalize() const {
    return mode_ == Aggregation::kDataset ? compute_quality(pooled_) : mean_report(per_image_);
  }

 private:
  Aggregation mode_;
  std::size_t images_ = 0;
  MatchLedger pooled_;
  std::vector<MetricReport> per_image_;
};

}  // namespace upq
