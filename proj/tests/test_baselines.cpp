#include <gtest/gtest.h>

#include <map>

#include "helpers.hpp"

namespace upq {
namespace {

using test::car;
using test::kCar;
using test::kPerson;
using test::kRoad;

using Dist = MaskClassificationOutput::Distribution;

Dist peaked(int cls, double p) {
  Dist d{};
  d[cls] = p;
  d[cls == MaskClassificationOutput::kNoObject ? 0 : MaskClassificationOutput::kNoObject] = 1.0 - p;
  return d;
}

MaskClassificationOutput uniform_output(int w, int h, std::vector<std::pair<Dist, double>> pairs) {
  MaskClassificationOutput mc;
  mc.width = w;
  mc.height = h;
  for (auto& [d, m] : pairs) {
    mc.probs.push_back(d);
    mc.masks.emplace_back(w, h, m);
  }
  return mc;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(PanopticInference, SinglePairCoversImage) {
  const auto mc = uniform_output(3, 2, {{peaked(kCar, 0.9), 1.0}});
  const PanopticRaster p = panoptic_inference(mc);
  for (const auto& px : p.pixels()) EXPECT_EQ(px, car(1));
  const ConfidencePair c = marginal_confidences(mc, p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_DOUBLE_EQ(c.class_conf.scores[i], 0.9);
    EXPECT_DOUBLE_EQ(c.inst_conf.scores[i], 1.0);
  }
}

TEST(PanopticInference, ArgmaxOfClassTimesMask) {
  // 0.7 * 1.0 = 0.70 for pair 0 against 0.9 * 0.8 = 0.72 for pair 1.
  const auto mc = uniform_output(2, 2, {{peaked(kPerson, 0.7), 1.0}, {peaked(kCar, 0.9), 0.8}});
  const PanopticRaster p = panoptic_inference(mc);
  for (const auto& px : p.pixels()) EXPECT_EQ(px, car(2));
}

TEST(PanopticInference, NoObjectPairsLeaveUnlabeled) {
  const auto mc = uniform_output(2, 2, {{peaked(MaskClassificationOutput::kNoObject, 0.8), 1.0},
                                        {peaked(MaskClassificationOutput::kNoObject, 0.6), 0.5}});
  const PanopticRaster p = panoptic_inference(mc);
  for (const auto& px : p.pixels()) EXPECT_EQ(px.cls, kUnknownClass);
  const ConfidencePair c = marginal_confidences(mc, p);
  for (double v : c.class_conf.scores.pixels()) EXPECT_EQ(v, 0.0);
  for (double v : c.inst_conf.scores.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(PanopticInference, StuffPairsMergeIntoOneSegment) {
  MaskClassificationOutput mc = uniform_output(4, 1, {{peaked(kRoad, 0.9), 0.0}, {peaked(kRoad, 0.8), 0.0}});
  mc.masks[0][0] = mc.masks[0][1] = 1.0;
  mc.masks[1][2] = mc.masks[1][3] = 1.0;
  const PanopticRaster p = panoptic_inference(mc);
  for (const auto& px : p.pixels()) EXPECT_EQ(px, PanopticLabel::stuff(kRoad));
  EXPECT_EQ(build_segment_table(p).size(), 1u);
}

TEST(PanopticInference, ReproducesSyntheticPredictions) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const synth::Scene s = synth::generate_scene(synth::random_spec(seed, 16, 48));
    const auto mc = synth::mask_classification_for(s.pred, seed);
    const PanopticRaster p = panoptic_inference(mc);
    // Same classes and the same partition into things instances wherever
    // the source prediction is a real segment.
    std::map<SegmentKey, SegmentKey> fwd, back;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const SegmentKey a = key_of(s.pred[i]);
      if (!a.is_segment()) continue;
      const SegmentKey b = key_of(p[i]);
      ASSERT_EQ(a.cls, b.cls);
      ASSERT_EQ(fwd.try_emplace(a, b).first->second, b);
      ASSERT_EQ(back.try_emplace(b, a).first->second, a);
    }
  }
}

TEST(MarginalConfidence, TwoEqualPairsSplitInstanceScore) {
  const auto mc = uniform_output(2, 1, {{peaked(kCar, 0.8), 1.0}, {peaked(kCar, 0.8), 1.0}});
  const PanopticRaster p = panoptic_inference(mc);
  EXPECT_EQ(p[0], car(1));  // tie goes to the lower pair
  const ConfidencePair c = marginal_confidences(mc, p);
  EXPECT_DOUBLE_EQ(c.class_conf.scores[0], 0.8);
  EXPECT_DOUBLE_EQ(c.inst_conf.scores[0], 0.5);
}

TEST(MarginalConfidence, ClassScoreSumsOverAllPairs) {
  // Winner car 0.6 with mask 1; a person pair that still puts 0.3 on car.
  Dist person{};
  person[kPerson] = 0.7;
  person[kCar] = 0.3;
  const auto mc = uniform_output(1, 1, {{peaked(kCar, 0.6), 1.0}, {person, 0.5}});
  const PanopticRaster p = panoptic_inference(mc);
  ASSERT_EQ(p[0], car(1));  // 0.6 against 0.35
  const ConfidencePair c = marginal_confidences(mc, p);
  const double m0 = 1.0 / 1.5, m1 = 0.5 / 1.5;
  EXPECT_DOUBLE_EQ(c.class_conf.scores[0], 0.6 * m0 + 0.3 * m1);
  EXPECT_DOUBLE_EQ(c.inst_conf.scores[0], 0.6 * m0 / (0.6 * m0 + 0.3 * m1));
}

TEST(MarginalConfidence, ProductIsWinningPairShare) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const synth::Scene s = synth::generate_scene(synth::random_spec(seed, 16, 40));
    const auto mc = synth::mask_classification_for(s.pred, seed * 7);
    const PanopticRaster p = panoptic_inference(mc);
    const Raster<int> w = assign_pairs(mc);
    const ConfidencePair c = marginal_confidences(mc, p);
    for (std::size_t px = 0; px < p.size(); ++px) {
      const double sc = c.class_conf.scores[px], si = c.inst_conf.scores[px];
      ASSERT_GE(sc, 0.0);
      ASSERT_LE(sc, 1.0);
      ASSERT_GE(si, 0.0);
      ASSERT_LE(si, 1.0);
      if (w[px] == kUnassigned) continue;
      double msum = 0.0;
      for (const auto& m : mc.masks) msum += m[px];
      const auto i = static_cast<std::size_t>(w[px]);
      const double share = mc.probs[i][p[px].cls] * mc.masks[i][px] / msum;
      ASSERT_NEAR(sc * si, share, 1e-12);
    }
  }
}

TEST(MarginalConfidence, RejectsForeignAssignment) {
  const auto mc = uniform_output(2, 1, {{peaked(kCar, 0.9), 1.0}});
  PanopticRaster other(2, 1, PanopticLabel::stuff(kRoad));
  EXPECT_EQ(kind_of([&] { marginal_confidences(mc, other); }), ErrorKind::kArgument);
  EXPECT_EQ(kind_of([&] { marginal_confidences(mc, PanopticRaster(3, 1)); }), ErrorKind::kDimension);
}

TEST(MaskClassificationOutput, Validation) {
  MaskClassificationOutput empty;
  empty.width = empty.height = 2;
  EXPECT_EQ(kind_of([&] { panoptic_inference(empty); }), ErrorKind::kArgument);

  Dist bad{};
  bad[kCar] = 0.5;
  EXPECT_EQ(kind_of([&] { panoptic_inference(uniform_output(2, 2, {{bad, 1.0}})); }), ErrorKind::kArgument);
  EXPECT_EQ(kind_of([&] { panoptic_inference(uniform_output(2, 2, {{peaked(kCar, 0.9), 1.2}})); }),
            ErrorKind::kArgument);

  auto mc = uniform_output(2, 2, {{peaked(kCar, 0.9), 1.0}});
  mc.masks[0] = Raster<double>(3, 2, 1.0);
  EXPECT_EQ(kind_of([&] { panoptic_inference(mc); }), ErrorKind::kDimension);
  mc.masks.clear();
  EXPECT_EQ(kind_of([&] { panoptic_inference(mc); }), ErrorKind::kArgument);
}

TEST(ConstantConfidence, FillsBothKinds) {
  const ConfidencePair c = constant_confidence(3, 4, 0.3);
  EXPECT_EQ(c.class_conf.kind, ConfidenceKind::kClass);
  EXPECT_EQ(c.inst_conf.kind, ConfidenceKind::kInstance);
  for (double v : c.class_conf.scores.pixels()) EXPECT_EQ(v, 0.3);
  for (double v : c.inst_conf.scores.pixels()) EXPECT_EQ(v, 0.3);
  EXPECT_EQ(kind_of([] { constant_confidence(2, 2, 1.5); }), ErrorKind::kArgument);
  EXPECT_EQ(kind_of([] { constant_confidence(2, 2, -0.1); }), ErrorKind::kArgument);
}

TEST(OracleConfidence, FollowsDifficulty) {
  DifficultyRaster d(3, 1);
  d[0] = Difficulty::kNotDifficult;
  d[1] = Difficulty::kDifficultClass;
  d[2] = Difficulty::kDifficultInstance;
  const ConfidencePair c = oracle_confidence(d);
  EXPECT_EQ(test::values(c.class_conf.scores), (std::vector<double>{1.0, 0.0, 1.0}));
  EXPECT_EQ(test::values(c.inst_conf.scores), (std::vector<double>{1.0, 1.0, 0.0}));
}

}  // namespace
}  // namespace upq
