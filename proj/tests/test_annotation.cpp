#include <gtest/gtest.h>

#include <map>

#include "helpers.hpp"

namespace upq {
namespace {

using test::car;
using test::kBus;
using test::kCar;
using test::kRoad;
using test::kSidewalk;
using test::paint;

constexpr auto kNot = Difficulty::kNotDifficult;
constexpr auto kInst = Difficulty::kDifficultInstance;
constexpr auto kCls = Difficulty::kDifficultClass;

// Written from the rules as a case table, independent of the library's
// branch order.
Difficulty expected_difficulty(PanopticLabel a, PanopticLabel b, bool corr) {
  const bool a_unknown = a.cls == kUnknownClass, b_unknown = b.cls == kUnknownClass;
  if (a_unknown || b_unknown || a.cls != b.cls) return kCls;
  if (is_stuff(a.cls) || a.cls == kOtherClass) return kNot;
  const bool any_unknown_inst = a.segment == kUnknownInstance || b.segment == kUnknownInstance;
  return (!any_unknown_inst && corr) ? kNot : kInst;
}

TEST(PixelDifficulty, ExhaustiveTruthTable) {
  std::vector<PanopticLabel> labels = {PanopticLabel::unknown(), PanopticLabel::other(),
                                       PanopticLabel::stuff(kRoad), PanopticLabel::stuff(kSidewalk)};
  for (SegmentId id : {SegmentId{1}, SegmentId{2}, kUnknownInstance}) {
    labels.push_back(PanopticLabel{kCar, id});
    labels.push_back(PanopticLabel{kBus, id});
  }
  int cases = 0;
  for (auto a : labels) {
    for (auto b : labels) {
      for (bool corr : {false, true}) {
        EXPECT_EQ(pixel_difficulty(a, b, corr), expected_difficulty(a, b, corr))
            << int(a.cls) << "/" << a.segment << " vs " << int(b.cls) << "/" << b.segment << " corr " << corr;
        ++cases;
      }
    }
  }
  EXPECT_EQ(cases, 200);
  static_assert(pixel_difficulty(PanopticLabel::stuff(0), PanopticLabel::stuff(0), false) == kNot);
}

TEST(DeriveDifficulty, IdenticalStagesAreNeverDifficult) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PanopticRaster h = test::random_raster(seed, 24, 24);
    for (auto& px : h.pixels()) {
      if (px.cls == kUnknownClass || px.segment == kUnknownInstance) px = PanopticLabel::stuff(kRoad);
    }
    const DifficultyRaster d = derive_difficulty(h, h);
    for (auto v : d.pixels()) ASSERT_EQ(v, kNot);
  }
}

TEST(DeriveDifficulty, ClassChangeUnknownAndInstanceSplit) {
  PanopticRaster h1(6, 1, PanopticLabel::stuff(kRoad));
  PanopticRaster h2 = h1;
  h1[0] = PanopticLabel::unknown();       // added in stage 2
  h2[1] = PanopticLabel::stuff(kSidewalk);  // class changed
  h1[2] = h1[3] = h1[4] = h1[5] = car(1);   // one instance in stage 1
  h2[2] = h2[3] = h2[4] = car(8);           // split in stage 2
  h2[5] = car(9);
  const DifficultyRaster d = derive_difficulty(h1, h2);
  EXPECT_EQ(test::values(d), (std::vector<Difficulty>{kCls, kCls, kNot, kNot, kNot, kInst}));
}

TEST(DeriveDifficulty, UnknownInstanceInEitherStage) {
  PanopticRaster h1(3, 1, car(1));
  PanopticRaster h2(3, 1, car(1));
  h1[0] = PanopticLabel::unknown_instance(kCar);
  h2[1] = PanopticLabel::unknown_instance(kCar);
  EXPECT_EQ(test::values(derive_difficulty(h1, h2)), (std::vector<Difficulty>{kInst, kInst, kNot}));
}

TEST(DeriveDifficulty, InvariantUnderInstanceRelabeling) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const synth::Scene s = synth::generate_scene(synth::random_spec(seed, 16, 64));
    const PanopticRaster h1 = synth::stage_one_labels(s.gt, s.difficulty);
    const DifficultyRaster base = derive_difficulty(h1, s.gt);
    ASSERT_EQ(base, s.difficulty) << "seed " << seed;

    // Permute ids in each stage independently.
    synth::CounterRng rng(seed, 42);
    auto relabel = [&](PanopticRaster r) {
      std::map<SegmentId, SegmentId> m;
      for (auto& px : r.pixels()) {
        if (!is_thing(px.cls) || px.segment == kUnknownInstance) continue;
        auto [it, fresh] = m.try_emplace(px.segment, 0);
        if (fresh) it->second = static_cast<SegmentId>(1000 + m.size() * 13 + rng.uniform_int(0, 12));
        px.segment = it->second;
      }
      return r;
    };
    ASSERT_EQ(derive_difficulty(relabel(h1), relabel(s.gt)), base) << "seed " << seed;
  }
}

TEST(DeriveDifficulty, RejectsMismatchAndBadLabels) {
  try {
    derive_difficulty(PanopticRaster(2, 2), PanopticRaster(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
  PanopticRaster bad(2, 2, PanopticLabel{kRoad, 5});
  EXPECT_THROW(derive_difficulty(bad, bad), Error);
}

TEST(Coverage, SmallExample) {
  PanopticRaster h1(5, 2, PanopticLabel::unknown());
  PanopticRaster h2(5, 2, PanopticLabel::unknown());
  paint(h1, 0, 0, 3, 1, PanopticLabel::stuff(kRoad));  // 3 px labeled early
  paint(h2, 0, 0, 5, 1, PanopticLabel::stuff(kRoad));  // 2 more added
  h1(0, 1) = car(4);
  h2(0, 1) = car(4);
  h2(1, 1) = car(5);
  h2(2, 1) = PanopticLabel::other();  // other counts as labeled
  const CoverageBucket b = coverage_of(h1, h2);
  EXPECT_EQ(b.pixels, 10u);
  EXPECT_EQ(b.h1_labeled, 4u);
  EXPECT_EQ(b.h2_added, 4u);
  EXPECT_EQ(b.unlabeled, 2u);
  EXPECT_EQ(b.h1_instances, 1u);
  EXPECT_EQ(b.h2_instances, 2u);
  EXPECT_DOUBLE_EQ(b.h1_fraction(), 0.4);
  EXPECT_DOUBLE_EQ(b.added_fraction() + b.h1_fraction() + b.unlabeled_fraction(), 1.0);
}

TEST(Coverage, StatsAgreeWithNaiveCounts) {
  std::vector<synth::Scene> scenes;
  std::vector<PanopticRaster> h1s;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    scenes.push_back(synth::generate_scene(synth::random_spec(seed, 16, 48)));
    h1s.push_back(synth::stage_one_labels(scenes.back().gt, scenes.back().difficulty));
  }
  std::vector<StagePair> pairs;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    pairs.push_back({&h1s[k], &scenes[k].gt, {k % 2 ? "night" : "day", k % 3 ? "clear" : "rain"}});
  }
  const CoverageStats stats = coverage_stats(pairs);

  std::map<std::string, std::array<std::uint64_t, 3>> naive;  // labeled, added, unlabeled
  std::uint64_t pixels = 0;
  for (std::size_t k = 0; k < scenes.size(); ++k) {
    std::array<std::uint64_t, 3> c{};
    for (std::size_t i = 0; i < h1s[k].size(); ++i) {
      const bool a = h1s[k][i].cls != kUnknownClass, b = scenes[k].gt[i].cls != kUnknownClass;
      ++c[!b ? 2 : (a ? 0 : 1)];
    }
    pixels += h1s[k].size();
    for (const auto& tag : pairs[k].conditions) {
      for (int j = 0; j < 3; ++j) naive[tag][j] += c[j];
    }
    for (int j = 0; j < 3; ++j) naive["*"][j] += c[j];
  }
  EXPECT_EQ(stats.overall.samples, 12u);
  EXPECT_EQ(stats.overall.pixels, pixels);
  EXPECT_EQ(stats.overall.h1_labeled, naive["*"][0]);
  EXPECT_EQ(stats.overall.h2_added, naive["*"][1]);
  EXPECT_EQ(stats.overall.unlabeled, naive["*"][2]);
  for (const auto& tag : {"day", "night", "clear", "rain"}) {
    const CoverageBucket& b = stats.per_condition.at(tag);
    EXPECT_EQ(b.h1_labeled, naive[tag][0]) << tag;
    EXPECT_EQ(b.h2_added, naive[tag][1]) << tag;
    EXPECT_EQ(b.unlabeled, naive[tag][2]) << tag;
  }
  EXPECT_EQ(stats.per_condition.at("day").samples + stats.per_condition.at("night").samples, 12u);
}

TEST(Coverage, MissingStageIsAnError) {
  PanopticRaster h(2, 2);
  std::vector<StagePair> pairs = {{&h, nullptr, {}}};
  try {
    coverage_stats(pairs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArgument);
  }
}

}  // namespace
}  // namespace upq
