#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "upq/io.hpp"
#include "upq/synth.hpp"

namespace upq::synth {

struct DatasetOptions {
  int scenes = 10;
  std::uint64_t first_seed = 1;  // scene k uses first_seed + k
  io::PanopticEncoding encoding = io::PanopticEncoding::kIdRgb;
  bool stages = false;  // write stage-1 labels under h1/
  bool masks = false;   // write mask-classification outputs under masks/
};

/// Writes a synthetic dataset under `root` (gt/, pred/, difficulty/,
/// class_conf/, inst_conf/ and manifest.json) and returns the manifest.
/// Conditions cycle through the weather tags, day and night alternating
/// every four scenes.
inline io::DatasetManifest write_dataset(const std::filesystem::path& root, SceneSpec spec,
                                         const DatasetOptions& opt) {
  namespace fs = std::filesystem;
  spec.validate();
  for (const char* sub : {"gt", "pred", "difficulty", "class_conf", "inst_conf"}) fs::create_directories(root / sub);
  if (opt.stages) fs::create_directories(root / "h1");
  if (opt.masks) fs::create_directories(root / "masks");
  static constexpr const char* kWeather[] = {"clear", "fog", "rain", "snow"};
  io::DatasetManifest manifest;
  manifest.encoding = opt.encoding;
  for (int k = 0; k < opt.scenes; ++k) {
    spec.seed = opt.first_seed + static_cast<std::uint64_t>(k);
    const Scene scene = generate_scene(spec);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", k);
    const std::string file = std::string(name) + ".png";
    io::SampleRecord r;
    r.sample_id = name;
    r.ground_truth = root / "gt" / file;
    r.prediction = root / "pred" / file;
    r.difficulty = root / "difficulty" / file;
    r.class_conf = root / "class_conf" / file;
    r.inst_conf = root / "inst_conf" / file;
    r.conditions = {kWeather[k % 4], (k / 4) % 2 == 0 ? "day" : "night"};
    io::save_panoptic(*r.ground_truth, scene.gt, opt.encoding);
    io::save_panoptic(*r.prediction, scene.pred, opt.encoding);
    io::save_difficulty(*r.difficulty, scene.difficulty);
    io::save_confidence(*r.class_conf, scene.class_conf);
    io::save_confidence(*r.inst_conf, scene.inst_conf);
    if (opt.stages) {
      r.h1 = root / "h1" / file;
      r.h2 = r.ground_truth;
      io::save_panoptic(*r.h1, stage_one_labels(scene.gt, scene.difficulty), opt.encoding);
    }
    if (opt.masks) {
      r.mask_classification = root / "masks" / (std::string(name) + ".json");
      io::save_mask_classification(*r.mask_classification, mask_classification_for(scene.pred, spec.seed));
    }
    manifest.samples.push_back(std::move(r));
  }
  io::save_manifest(root / "manifest.json", manifest);
  return manifest;
}

}  // namespace upq::synth
