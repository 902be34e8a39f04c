#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"

namespace upq {
namespace {

namespace fs = std::filesystem;
using test::car;
using test::kCar;
using test::kRoad;
using test::kSidewalk;

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(Class1000, DecodesKnownIds) {
  EXPECT_EQ(io::decode_class1000(13002), car(2));
  EXPECT_EQ(io::decode_class1000(13999), PanopticLabel::unknown_instance(kCar));
  EXPECT_EQ(io::decode_class1000(1000), PanopticLabel::stuff(kSidewalk));
  EXPECT_EQ(io::decode_class1000(0), PanopticLabel::stuff(kRoad));
  EXPECT_EQ(io::decode_class1000(65535), PanopticLabel::unknown());
  EXPECT_EQ(io::decode_class1000(65534), PanopticLabel::other());
  for (std::uint16_t bad : {1001, 13000, 19000, 40000}) {
    EXPECT_EQ(kind_of([&] { io::decode_class1000(bad); }), ErrorKind::kFormat) << bad;
  }
}

TEST(Class1000, EncodeLimits) {
  EXPECT_EQ(io::encode_class1000(car(998)), 13998);
  EXPECT_EQ(kind_of([] { io::encode_class1000(car(999)); }), ErrorKind::kArgument);
  EXPECT_EQ(kind_of([] { io::encode_class1000(car(5000)); }), ErrorKind::kArgument);
  EXPECT_EQ(io::encode_class1000(PanopticLabel::unknown_instance(kCar)), 13999);
}

TEST(PanopticIo, RoundTripBothEncodings) {
  test::TempDir dir("rt");
  for (int k = 0; k < 1000; ++k) {
    const auto seed = static_cast<std::uint64_t>(k);
    const int w = 1 + static_cast<int>(seed % 23), h = 1 + static_cast<int>((seed * 7) % 19);
    PanopticRaster r = test::random_raster(seed, w, h);
    if (k % 5 == 0) r[0] = PanopticLabel::other();
    for (auto enc : {io::PanopticEncoding::kIdRgb, io::PanopticEncoding::kClass1000}) {
      const fs::path p = dir.path() / ("r" + std::string(io::encoding_name(enc)) + ".png");
      io::save_panoptic(p, r, enc);
      ASSERT_EQ(io::load_panoptic(p, enc, io::Dims{w, h}), r) << "seed " << seed;
    }
  }
}

TEST(PanopticIo, RgbCarriesLargeIds) {
  test::TempDir dir("big");
  PanopticRaster r(3, 1);
  r[0] = car(4000000000u);
  r[1] = car(7);
  r[2] = PanopticLabel::stuff(kRoad);
  io::save_panoptic(dir.path() / "a.png", r, io::PanopticEncoding::kIdRgb);
  EXPECT_EQ(io::load_panoptic(dir.path() / "a.png", io::PanopticEncoding::kIdRgb), r);
  EXPECT_EQ(kind_of([&] { io::save_panoptic(dir.path() / "b.png", r, io::PanopticEncoding::kClass1000); }),
            ErrorKind::kArgument);
}

TEST(PanopticIo, SidecarProblems) {
  test::TempDir dir("side");
  const fs::path p = dir.path() / "s.png";
  io::save_panoptic(p, PanopticRaster(2, 2, car(3)), io::PanopticEncoding::kIdRgb);
  const fs::path side = io::sidecar_path(p);
  ASSERT_TRUE(fs::exists(side));

  std::ofstream(side) << R"({"schema_version": 1, "segments": []})";
  EXPECT_EQ(kind_of([&] { io::load_panoptic(p, io::PanopticEncoding::kIdRgb); }), ErrorKind::kFormat);
  std::ofstream(side) << R"({"schema_version": 7, "segments": []})";
  EXPECT_EQ(kind_of([&] { io::load_panoptic(p, io::PanopticEncoding::kIdRgb); }), ErrorKind::kSchema);
  fs::remove(side);
  EXPECT_EQ(kind_of([&] { io::load_panoptic(p, io::PanopticEncoding::kIdRgb); }), ErrorKind::kIo);
}

TEST(PanopticIo, LayoutAndSizeChecks) {
  test::TempDir dir("layout");
  const fs::path p = dir.path() / "c.png";
  io::save_panoptic(p, PanopticRaster(4, 3, PanopticLabel::stuff(kRoad)), io::PanopticEncoding::kClass1000);
  EXPECT_EQ(kind_of([&] { io::load_panoptic(p, io::PanopticEncoding::kIdRgb); }), ErrorKind::kBitDepth);
  EXPECT_EQ(kind_of([&] { io::load_difficulty(p); }), ErrorKind::kBitDepth);
  EXPECT_EQ(kind_of([&] { io::load_panoptic(p, io::PanopticEncoding::kClass1000, io::Dims{3, 4}); }),
            ErrorKind::kDimension);
  EXPECT_EQ(kind_of([&] { io::load_panoptic(dir.path() / "missing.png", io::PanopticEncoding::kClass1000); }),
            ErrorKind::kIo);
  std::ofstream(dir.path() / "junk.png") << "definitely not a png";
  EXPECT_EQ(kind_of([&] { io::load_panoptic(dir.path() / "junk.png", io::PanopticEncoding::kClass1000); }),
            ErrorKind::kFormat);
}

TEST(DifficultyIo, RoundTripAndRange) {
  test::TempDir dir("diff");
  DifficultyRaster d(5, 2);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<Difficulty>(i % 3);
  io::save_difficulty(dir.path() / "d.png", d);
  EXPECT_EQ(io::load_difficulty(dir.path() / "d.png"), d);

  io::PngImage bad{2, 1, io::PngLayout::kGray8, {1, 3}};
  io::write_png(dir.path() / "bad.png", bad);
  EXPECT_EQ(kind_of([&] { io::load_difficulty(dir.path() / "bad.png"); }), ErrorKind::kFormat);
}

TEST(ConfidenceIo, QuantizationBounds) {
  EXPECT_EQ(io::quantize_confidence(0.0), 0);
  EXPECT_EQ(io::quantize_confidence(1.0), 65535);
  EXPECT_EQ(kind_of([] { io::quantize_confidence(1.0001); }), ErrorKind::kArgument);

  test::TempDir dir("conf");
  synth::CounterRng rng(3, 3);
  ConfidenceRaster c{ConfidenceKind::kInstance, Raster<double>(64, 64)};
  for (auto& v : c.scores.pixels()) v = rng.uniform();
  c.scores[0] = 0.0;
  c.scores[1] = 1.0;
  io::save_confidence(dir.path() / "c.png", c);
  const ConfidenceRaster back = io::load_confidence(dir.path() / "c.png", ConfidenceKind::kInstance);
  EXPECT_EQ(back.kind, ConfidenceKind::kInstance);
  EXPECT_EQ(back.scores[0], 0.0);
  EXPECT_EQ(back.scores[1], 1.0);
  for (std::size_t i = 0; i < c.scores.size(); ++i) {
    ASSERT_LE(std::abs(back.scores[i] - c.scores[i]), 1.0 / 131070.0 + 1e-15);
  }
}

TEST(MaskClassificationIo, RoundTrip) {
  test::TempDir dir("mc");
  const synth::Scene s = synth::generate_scene(synth::random_spec(4, 16, 24));
  const MaskClassificationOutput mc = synth::mask_classification_for(s.pred, 4);
  const fs::path p = dir.path() / "out.json";
  io::save_mask_classification(p, mc);
  const MaskClassificationOutput back = io::load_mask_classification(p, io::Dims{mc.width, mc.height});
  ASSERT_EQ(back.pairs(), mc.pairs());
  EXPECT_EQ(back.probs, mc.probs);
  for (std::size_t i = 0; i < mc.pairs(); ++i) {
    for (std::size_t px = 0; px < mc.masks[i].size(); ++px) {
      ASSERT_NEAR(back.masks[i][px], mc.masks[i][px], 1.0 / 131070.0 + 1e-15);
    }
  }
  EXPECT_EQ(panoptic_inference(back), panoptic_inference(mc));
  EXPECT_EQ(kind_of([&] { io::load_mask_classification(p, io::Dims{1, 1}); }), ErrorKind::kDimension);
}

TEST(Manifest, RoundTripWithRelativePaths) {
  test::TempDir dir("man");
  io::DatasetManifest m;
  m.encoding = io::PanopticEncoding::kClass1000;
  io::SampleRecord a;
  a.sample_id = "a";
  a.prediction = dir.path() / "pred" / "a.png";
  a.ground_truth = dir.path() / "gt" / "a.png";
  a.conditions = {"fog", "night"};
  io::SampleRecord b;
  b.sample_id = "b";
  b.mask_classification = dir.path() / "mc" / "b.json";
  m.samples = {a, b};
  io::save_manifest(dir.path() / "m.json", m);

  const std::string text = [&] {
    std::ifstream in(dir.path() / "m.json");
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  EXPECT_EQ(text.find(dir.path().string()), std::string::npos);

  const io::DatasetManifest back = io::load_manifest(dir.path() / "m.json");
  EXPECT_EQ(back.encoding, io::PanopticEncoding::kClass1000);
  ASSERT_EQ(back.samples.size(), 2u);
  EXPECT_EQ(back.samples[0].prediction->lexically_normal(), a.prediction->lexically_normal());
  EXPECT_EQ(back.samples[0].conditions, a.conditions);
  EXPECT_FALSE(back.samples[0].difficulty);
  EXPECT_EQ(back.samples[1].mask_classification->lexically_normal(), b.mask_classification->lexically_normal());
}

TEST(Manifest, Rejections) {
  test::TempDir dir("manbad");
  auto load = [&](const std::string& body) {
    std::ofstream(dir.path() / "m.json") << body;
    return kind_of([&] { io::load_manifest(dir.path() / "m.json"); });
  };
  EXPECT_EQ(load(R"({"schema_version":1,"samples":[{"sample_id":"x"},{"sample_id":"x"}]})"), ErrorKind::kFormat);
  EXPECT_EQ(load(R"({"schema_version":1,"samples":[{"sample_id":"x","conditions":["hail"]}]})"), ErrorKind::kFormat);
  EXPECT_EQ(load(R"({"schema_version":1,"panoptic_encoding":"rgba","samples":[]})"), ErrorKind::kFormat);
  EXPECT_EQ(load(R"({"schema_version":2,"samples":[]})"), ErrorKind::kSchema);
  EXPECT_EQ(load(R"({"samples":[]})"), ErrorKind::kFormat);
  EXPECT_EQ(load(R"({"schema_version":1,"samples":[)"), ErrorKind::kFormat);
  EXPECT_EQ(kind_of([&] { io::load_manifest(dir.path() / "nope.json"); }), ErrorKind::kIo);
}

TEST(Report, DeterministicFormatting) {
  io::json r = {{"schema_version", 1}, {"zeta", 0.1}, {"alpha", {{"b", 2}, {"a", nullptr}}},
                {"grid", {0.0, 0.5, 1.0}}, {"nan", std::nan("")}, {"m", {{1.0, 2.0}, {3.0, 4.0}}}};
  const std::string text = io::format_report(r);
  EXPECT_EQ(text, io::format_report(io::json::parse(io::json(r).dump())));
  EXPECT_LT(text.find("\"alpha\""), text.find("\"zeta\""));
  EXPECT_NE(text.find("\"zeta\": 0.100000"), std::string::npos);
  EXPECT_NE(text.find("[0.000000, 0.500000, 1.000000]"), std::string::npos);
  EXPECT_NE(text.find("\"nan\": null"), std::string::npos);

  test::TempDir dir("rep");
  io::save_report(dir.path() / "r.json", r);
  const io::json back = io::load_report(dir.path() / "r.json");
  EXPECT_EQ(io::format_report(back), text);
}

}  // namespace
}  // namespace upq
