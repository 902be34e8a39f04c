#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "helpers.hpp"

namespace upq {
namespace {

using test::car;
using test::kCar;
using test::kRoad;
using test::kSidewalk;
using test::paint;

MatchLedger match(const PanopticRaster& pred, const PanopticRaster& gt) {
  return match_segments_pq(build_overlap_histogram(pred, gt), build_segment_table(pred), build_segment_table(gt));
}

TEST(MatchPq, SixOfTenMatchesWithIou06) {
  PanopticRaster gt(10, 1, PanopticLabel::stuff(kRoad));
  PanopticRaster pred = gt;
  paint(gt, 0, 0, 8, 1, car(1));
  paint(pred, 2, 0, 10, 1, car(5));
  const MatchLedger l = match(pred, gt);
  ASSERT_EQ(l[kCar].tp(), 1u);
  EXPECT_DOUBLE_EQ(l[kCar].matches[0].iou, 0.6);
  EXPECT_EQ(l[kCar].matches[0].pred, (SegmentKey{kCar, 5}));
  EXPECT_EQ(l[kCar].fp, 0u);
  EXPECT_EQ(l[kCar].fn, 0u);
}

TEST(MatchPq, IouExactlyHalfDoesNotMatch) {
  PanopticRaster gt(8, 1, PanopticLabel::stuff(kRoad));
  PanopticRaster pred = gt;
  paint(gt, 0, 0, 6, 1, car(1));
  paint(pred, 2, 0, 8, 1, car(1));  // inter 4, union 8
  const MatchLedger l = match(pred, gt);
  EXPECT_EQ(l[kCar].tp(), 0u);
  EXPECT_EQ(l[kCar].fp, 1u);
  EXPECT_EQ(l[kCar].fn, 1u);
}

TEST(MatchPq, MostlyVoidPredictionIsNeitherTpNorFp) {
  PanopticRaster gt(10, 1, PanopticLabel::unknown());
  gt[9] = PanopticLabel::stuff(kRoad);
  PanopticRaster pred(10, 1, car(1));
  const MatchLedger l = match(pred, gt);
  EXPECT_EQ(l[kCar].tp(), 0u);
  EXPECT_EQ(l[kCar].fp, 0u);
  EXPECT_EQ(l[kRoad].fn, 1u);
}

TEST(MatchPq, HalfVoidPredictionIsFp) {
  PanopticRaster gt(10, 1, PanopticLabel::unknown());
  paint(gt, 5, 0, 10, 1, PanopticLabel::stuff(kRoad));
  PanopticRaster pred(10, 1, car(1));
  EXPECT_EQ(match(pred, gt)[kCar].fp, 1u);
}

TEST(MatchPq, SameClassUnknownInstanceAbsorbsFp) {
  PanopticRaster gt(10, 1, PanopticLabel::unknown_instance(kCar));
  paint(gt, 0, 0, 3, 1, PanopticLabel::stuff(kRoad));
  PanopticRaster pred(10, 1, car(1));
  EXPECT_EQ(match(pred, gt)[kCar].fp, 0u);

  // Another class's unknown-instance region does not.
  PanopticRaster bus_crowd(10, 1, PanopticLabel::unknown_instance(test::kBus));
  EXPECT_EQ(match(pred, bus_crowd)[kCar].fp, 1u);
}

TEST(MatchPq, VoidAndCrowdCombineForIgnoreRule) {
  PanopticRaster gt(10, 1, PanopticLabel::stuff(kRoad));
  paint(gt, 0, 0, 3, 1, PanopticLabel::unknown());
  paint(gt, 3, 0, 6, 1, PanopticLabel::unknown_instance(kCar));
  PanopticRaster pred(10, 1, car(1));  // 6 of 10 ignorable
  EXPECT_EQ(match(pred, gt)[kCar].fp, 0u);
}

TEST(MatchPq, PredictionVoidOverlapLeavesUnion) {
  PanopticRaster gt(6, 1, PanopticLabel::unknown());
  paint(gt, 0, 0, 4, 1, car(1));
  PanopticRaster pred(6, 1, car(2));  // 4 on the car, 2 on void
  const MatchLedger l = match(pred, gt);
  ASSERT_EQ(l[kCar].tp(), 1u);
  EXPECT_DOUBLE_EQ(l[kCar].matches[0].iou, 1.0);
}

TEST(MatchPq, CrowdIsNotAnEvaluableSegment) {
  PanopticRaster gt(4, 1, PanopticLabel::unknown_instance(kCar));
  PanopticRaster pred(4, 1, PanopticLabel::stuff(kRoad));
  const MatchLedger l = match(pred, gt);
  EXPECT_EQ(l[kCar].fn, 0u);
  EXPECT_EQ(l[kRoad].fp, 1u);
}

TEST(MatchPq, TablesMustMatchHistogram) {
  const PanopticRaster a = test::random_raster(1, 8, 8);
  const PanopticRaster b = test::random_raster(2, 8, 8);
  const PanopticRaster c = test::random_raster(3, 8, 8);
  EXPECT_THROW(match_segments_pq(build_overlap_histogram(a, b), build_segment_table(c), build_segment_table(b)),
               Error);
}

TEST(ComputePq, SingleMatch) {
  MatchLedger l;
  l[kCar].matches.push_back({{kCar, 1}, {kCar, 1}, 0.8});
  const MetricReport r = compute_pq(l);
  EXPECT_DOUBLE_EQ(*r.per_class[kCar].pq, 0.8);
  EXPECT_DOUBLE_EQ(*r.per_class[kCar].sq, 0.8);
  EXPECT_DOUBLE_EQ(*r.per_class[kCar].rq, 1.0);
}

TEST(ComputePq, ArithmeticWithFpAndFn) {
  MatchLedger l;
  l[kCar].matches.push_back({{kCar, 1}, {kCar, 1}, 0.6});
  l[kCar].fp = 1;
  l[kCar].fn = 1;
  const MetricReport r = compute_pq(l);
  EXPECT_DOUBLE_EQ(*r.per_class[kCar].pq, 0.3);
  EXPECT_DOUBLE_EQ(*r.per_class[kCar].rq, 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class[kCar].sq, 0.6);
}

TEST(ComputePq, AbsentClassesAreExcluded) {
  MatchLedger l;
  l[kCar].matches.push_back({{kCar, 1}, {kCar, 1}, 0.9});
  l[kRoad].fn = 1;
  const MetricReport r = compute_pq(l);
  EXPECT_FALSE(r.per_class[kSidewalk].valid());
  EXPECT_EQ(r.all.classes, 2);
  EXPECT_EQ(r.stuff.classes, 1);
  EXPECT_EQ(r.things.classes, 1);
  EXPECT_DOUBLE_EQ(*r.all.pq, 0.45);
  // Road has no TP: its SQ is undefined but counts as zero in the mean.
  EXPECT_FALSE(r.per_class[kRoad].sq.has_value());
  EXPECT_DOUBLE_EQ(*r.all.sq, 0.45);
}

TEST(ComputePq, EmptyLedgerHasNoMeans) {
  const MetricReport r = compute_pq(MatchLedger{});
  EXPECT_EQ(r.all.classes, 0);
  EXPECT_FALSE(r.all.pq.has_value());
}

TEST(Miou, IdentityIsOne) {
  const PanopticRaster g = test::random_raster(5, 16, 16);
  const IouReport r = compute_miou(g, g);
  for (int c = 0; c < kNumClasses; ++c) {
    if (r.per_class[c]) {
      EXPECT_EQ(*r.per_class[c], 1.0);
    }
  }
  EXPECT_EQ(*r.mean, 1.0);
}

TEST(Miou, AllRoadOverHalfSidewalk) {
  PanopticRaster gt(4, 2, PanopticLabel::stuff(kRoad));
  paint(gt, 0, 1, 4, 2, PanopticLabel::stuff(kSidewalk));
  const PanopticRaster pred(4, 2, PanopticLabel::stuff(kRoad));
  const IouReport r = compute_miou(pred, gt);
  EXPECT_DOUBLE_EQ(*r.per_class[kRoad], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class[kSidewalk], 0.0);
  EXPECT_DOUBLE_EQ(*r.mean, 0.25);
}

TEST(Miou, DimensionMismatch) { EXPECT_THROW(compute_miou(PanopticRaster(2, 2), PanopticRaster(3, 2)), Error); }

class MiouOracle : public ::testing::TestWithParam<int> {};

TEST_P(MiouOracle, EqualsPerClassSetIou) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const PanopticRaster p = test::random_raster(seed, 32, 32);
  const PanopticRaster g = test::random_raster(seed + 500, 32, 32);
  const IouReport r = compute_miou(p, g);
  std::vector<double> present;
  for (int c = 0; c < kNumClasses; ++c) {
    std::set<std::size_t> ps, gs;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!is_valid_class(g[i].cls)) continue;  // void ground truth is ignored
      if (p[i].cls == c) ps.insert(i);
      if (g[i].cls == c) gs.insert(i);
    }
    std::set<std::size_t> uni = ps;
    uni.insert(gs.begin(), gs.end());
    if (uni.empty()) {
      EXPECT_FALSE(r.per_class[c].has_value());
      continue;
    }
    std::size_t inter = 0;
    for (auto i : ps) inter += gs.count(i);
    const double iou = static_cast<double>(inter) / static_cast<double>(uni.size());
    ASSERT_TRUE(r.per_class[c].has_value());
    EXPECT_DOUBLE_EQ(*r.per_class[c], iou);
    present.push_back(iou);
  }
  double sum = 0;
  for (double v : present) sum += v;
  EXPECT_NEAR(*r.mean, sum / static_cast<double>(present.size()), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Seeds, MiouOracle, ::testing::Range(0, 20));

// Properties over synthetic scenes.

TEST(PqProperties, UniquenessIdentityProductOracle) {
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const synth::Scene s = synth::generate_scene(synth::random_spec(seed, 16, 48));
    const MatchLedger l = evaluate_pq_ledger(s.pred, s.gt);
    std::set<SegmentKey> preds, gts;
    for (const auto& cl : l.classes) {
      for (const auto& m : cl.matches) {
        ASSERT_TRUE(preds.insert(m.pred).second) << "seed " << seed;
        ASSERT_TRUE(gts.insert(m.gt).second) << "seed " << seed;
        ASSERT_GT(m.iou, 0.5);
        ASSERT_LE(m.iou, 1.0);
      }
    }
    const MetricReport r = compute_pq(l);
    for (const auto& q : r.per_class) {
      if (q.tp > 0) {
        ASSERT_NEAR(*q.pq, *q.sq * *q.rq, 1e-12) << "seed " << seed;
      }
    }
    const auto diff = oracle::compare_ledgers(l, oracle::brute_force_match(s.pred, s.gt));
    ASSERT_FALSE(diff) << "seed " << seed << ": " << *diff;

    const MetricReport id = compute_pq(evaluate_pq_ledger(s.gt, s.gt));
    for (const auto& q : id.per_class) {
      if (!q.valid()) continue;
      ASSERT_EQ(*q.pq, 1.0);
      ASSERT_EQ(*q.sq, 1.0);
      ASSERT_EQ(*q.rq, 1.0);
    }
  }
}

TEST(PqProperties, DatasetResultIgnoresImageOrder) {
  std::vector<MatchLedger> ledgers;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const synth::Scene s = synth::generate_scene(synth::random_spec(seed, 24, 64));
    ledgers.push_back(evaluate_pq_ledger(s.pred, s.gt));
  }
  QualityAccumulator forward;
  for (const auto& l : ledgers) forward.add(l);
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(ledgers.begin(), ledgers.end(), rng);
    QualityAccumulator shuffled;
    for (const auto& l : ledgers) shuffled.add(l);
    EXPECT_EQ(shuffled.finalize(), forward.finalize());
  }
}

TEST(PqProperties, PerImageMeanAveragesImageScores) {
  MatchLedger a, b;
  a[kCar].matches.push_back({{kCar, 1}, {kCar, 1}, 1.0});
  b[kCar].fn = 1;
  QualityAccumulator mean(Aggregation::kPerImageMean);
  mean.add(a);
  mean.add(b);
  EXPECT_DOUBLE_EQ(*mean.finalize().per_class[kCar].pq, 0.5);
  QualityAccumulator pooled(Aggregation::kDataset);
  pooled.add(a);
  pooled.add(b);
  EXPECT_DOUBLE_EQ(*pooled.finalize().per_class[kCar].pq, 1.0 / 1.5);
}

}  // namespace
}  // namespace upq
