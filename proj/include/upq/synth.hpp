#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "upq/baselines.hpp"
#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/raster.hpp"
#include "upq/segments.hpp"

namespace upq::synth {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw n of stream s under seed k is
/// mix64(mix64(k) ^ mix64(s + 0x632BE59BD9B4E019) + n * 0x9E3779B97F4A7C15).
/// Stateless in (seed, stream, n), so any language reproduces it.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : base_(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ull)) {}

  static std::uint64_t at(std::uint64_t seed, std::uint64_t stream, std::uint64_t n) {
    return mix64((mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ull)) + n * 0x9E3779B97F4A7C15ull);
  }

  std::uint64_t next() { return mix64(base_ + (counter_++) * 0x9E3779B97F4A7C15ull); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [lo, hi] (modulo reduction).
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

inline double unit_from(std::uint64_t v) { return static_cast<double>(v >> 11) * 0x1.0p-53; }

struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  int stuff_regions = 5;   // Voronoi cells of the stuff background
  int stuff_classes = 11;  // stuff classes drawn from 0..n-1
  int thing_classes = 8;   // things classes drawn from the first n things
  int min_instances = 0;   // per used things class
  int max_instances = 2;
  int boundary_jitter = 0;  // px
  double class_flip_rate = 0.0;
  double drop_rate = 0.0;
  double difficulty_rate = 0.0;
  double void_rate = 0.0;              // chance of each of four void blocks
  double unknown_instance_rate = 0.0;  // chance an instance has an unknown-instance half
  bool confine_errors = false;         // prediction errors only inside difficult regions
  double confidence_alignment = 1.0;   // share of pixels whose scores follow difficulty

  void validate() const {
    if (width <= 0 || height <= 0 || width > 8192 || height > 8192) {
      throw Error(ErrorKind::kArgument, "scene dimensions must lie in [1, 8192]");
    }
    for (double r : {class_flip_rate, drop_rate, difficulty_rate, void_rate, unknown_instance_rate,
                     confidence_alignment}) {
      if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::kArgument, "scene rates must lie in [0, 1]");
    }
    if (stuff_regions < 1 || stuff_classes < 1 || stuff_classes > kNumStuffClasses || thing_classes < 0 ||
        thing_classes > kNumClasses - kNumStuffClasses) {
      throw Error(ErrorKind::kArgument, "scene class counts out of range");
    }
    if (min_instances < 0 || max_instances < min_instances || boundary_jitter < 0) {
      throw Error(ErrorKind::kArgument, "scene instance range or jitter invalid");
    }
  }
};

struct Scene {
  PanopticRaster gt;
  DifficultyRaster difficulty;
  PanopticRaster pred;
  ConfidenceRaster class_conf;
  ConfidenceRaster inst_conf;
};

namespace detail {

struct Rect {
  int x0, y0, x1, y1;  // half-open
};

inline Rect clip(Rect r, int w, int h) {
  return {std::clamp(r.x0, 0, w), std::clamp(r.y0, 0, h), std::clamp(r.x1, 0, w), std::clamp(r.y1, 0, h)};
}

template <typename T, typename Fn>
void for_rect(Raster<T>& r, Rect rect, Fn&& fn) {
  rect = clip(rect, r.width(), r.height());
  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) fn(r(x, y), x, y);
  }
}

struct Seed {
  int x, y;
  ClassId cls;
};

inline void paint_voronoi(PanopticRaster& out, const std::vector<Seed>& seeds, const std::vector<bool>& dropped) {
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      std::int64_t best = -1;
      std::size_t arg = 0;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const std::int64_t dx = x - seeds[s].x, dy = y - seeds[s].y;
        const std::int64_t d = dx * dx + dy * dy;
        if (best < 0 || d < best) {
          best = d;
          arg = s;
        }
      }
      out(x, y) = dropped[arg] ? PanopticLabel::unknown() : PanopticLabel::stuff(seeds[arg].cls);
    }
  }
}

struct Instance {
  ClassId cls;
  SegmentId id;
  Rect rect;
};

}  // namespace detail

/// Deterministic synthetic scene. Ground truth is a Voronoi stuff
/// background with rectangular instances painted on top; the prediction
/// is the same construction with per-segment class flips, drops, and
/// boundary jitter. Difficulty marks void and unknown-instance ground
/// truth plus randomly chosen instance boxes and background blocks.
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  using detail::Rect;
  const int w = spec.width;
  const int h = spec.height;
  CounterRng rng(spec.seed, 1);

  // Layout.
  std::vector<detail::Seed> seeds;
  for (int s = 0; s < spec.stuff_regions; ++s) {
    seeds.push_back({rng.uniform_int(0, w - 1), rng.uniform_int(0, h - 1),
                     static_cast<ClassId>(rng.uniform_int(0, spec.stuff_classes - 1))});
  }
  std::vector<detail::Instance> instances;
  SegmentId next_id = 1;
  const int min_side = std::max(2, std::min(w, h) / 10);
  const int max_side = std::max(min_side + 1, std::min(w, h) / 3);
  for (int t = 0; t < spec.thing_classes; ++t) {
    const auto cls = static_cast<ClassId>(kFirstThingClass + t);
    const int n = rng.uniform_int(spec.min_instances, spec.max_instances);
    for (int k = 0; k < n; ++k) {
      const int rw = rng.uniform_int(min_side, max_side);
      const int rh = rng.uniform_int(min_side, max_side);
      const int x0 = rng.uniform_int(0, std::max(0, w - rw));
      const int y0 = rng.uniform_int(0, std::max(0, h - rh));
      instances.push_back({cls, next_id++, Rect{x0, y0, x0 + rw, y0 + rh}});
    }
  }

  // Ground truth.
  Scene scene{PanopticRaster(w, h), DifficultyRaster(w, h, Difficulty::kNotDifficult), PanopticRaster(w, h),
              ConfidenceRaster{ConfidenceKind::kClass, Raster<double>(w, h, 1.0)},
              ConfidenceRaster{ConfidenceKind::kInstance, Raster<double>(w, h, 1.0)}};
  detail::paint_voronoi(scene.gt, seeds, std::vector<bool>(seeds.size(), false));
  for (const auto& inst : instances) {
    detail::for_rect(scene.gt, inst.rect, [&](PanopticLabel& px, int, int) { px = PanopticLabel::thing(inst.cls, inst.id); });
  }
  for (const auto& inst : instances) {
    if (!rng.bernoulli(spec.unknown_instance_rate)) continue;
    Rect half = inst.rect;
    half.x0 = (inst.rect.x0 + inst.rect.x1) / 2;
    detail::for_rect(scene.gt, half, [&](PanopticLabel& px, int, int) {
      if (px == PanopticLabel::thing(inst.cls, inst.id)) px = PanopticLabel::unknown_instance(inst.cls);
    });
  }
  for (int k = 0; k < 4; ++k) {
    if (!rng.bernoulli(spec.void_rate)) continue;
    const int rw = rng.uniform_int(min_side, max_side);
    const int rh = rng.uniform_int(min_side, max_side);
    const int x0 = rng.uniform_int(0, std::max(0, w - rw));
    const int y0 = rng.uniform_int(0, std::max(0, h - rh));
    detail::for_rect(scene.gt, Rect{x0, y0, x0 + rw, y0 + rh}, [](PanopticLabel& px, int, int) { px = PanopticLabel::unknown(); });
  }

  // Difficulty: stronger levels override weaker ones.
  auto raise = [](Difficulty& d, Difficulty to) {
    if (static_cast<int>(to) > static_cast<int>(d)) d = to;
  };
  for (std::size_t i = 0; i < scene.gt.size(); ++i) {
    if (scene.gt[i].cls == kUnknownClass) raise(scene.difficulty[i], Difficulty::kDifficultClass);
    if (scene.gt[i].segment == kUnknownInstance && is_thing(scene.gt[i].cls)) {
      raise(scene.difficulty[i], Difficulty::kDifficultInstance);
    }
  }
  const int pad = spec.boundary_jitter + 1;
  for (const auto& inst : instances) {
    if (!rng.bernoulli(spec.difficulty_rate)) continue;
    const bool class_level = rng.bernoulli(0.5);
    const Rect grown{inst.rect.x0 - pad, inst.rect.y0 - pad, inst.rect.x1 + pad, inst.rect.y1 + pad};
    detail::for_rect(scene.difficulty, grown, [&](Difficulty& d, int x, int y) {
      if (class_level) {
        raise(d, Difficulty::kDifficultClass);
      } else if (is_thing(scene.gt(x, y).cls)) {
        raise(d, Difficulty::kDifficultInstance);
      }
    });
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (!rng.bernoulli(spec.difficulty_rate * 0.5)) continue;
    const int rw = rng.uniform_int(min_side, max_side);
    const int rh = rng.uniform_int(min_side, max_side);
    const Rect block{seeds[s].x - rw / 2, seeds[s].y - rh / 2, seeds[s].x + rw - rw / 2, seeds[s].y + rh - rh / 2};
    detail::for_rect(scene.difficulty, block, [&](Difficulty& d, int, int) { raise(d, Difficulty::kDifficultClass); });
  }

  // Prediction.
  std::vector<detail::Seed> pred_seeds = seeds;
  std::vector<bool> seed_dropped(seeds.size(), false);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (rng.bernoulli(spec.class_flip_rate) && spec.stuff_classes > 1) {
      const int shift = rng.uniform_int(1, spec.stuff_classes - 1);
      pred_seeds[s].cls = static_cast<ClassId>((seeds[s].cls + shift) % spec.stuff_classes);
    }
    seed_dropped[s] = rng.bernoulli(spec.drop_rate);
    if (spec.boundary_jitter > 0) {
      pred_seeds[s].x += rng.uniform_int(-spec.boundary_jitter, spec.boundary_jitter);
      pred_seeds[s].y += rng.uniform_int(-spec.boundary_jitter, spec.boundary_jitter);
    }
  }
  detail::paint_voronoi(scene.pred, pred_seeds, seed_dropped);
  for (const auto& inst : instances) {
    detail::Instance p = inst;
    if (rng.bernoulli(spec.class_flip_rate) && spec.thing_classes > 1) {
      const int shift = rng.uniform_int(1, spec.thing_classes - 1);
      p.cls = static_cast<ClassId>(kFirstThingClass + (inst.cls - kFirstThingClass + shift) % spec.thing_classes);
      p.id = inst.id + 100000;
    }
    const bool dropped = rng.bernoulli(spec.drop_rate);
    if (spec.boundary_jitter > 0) {
      const int j = spec.boundary_jitter;
      p.rect.x0 += rng.uniform_int(-j, j);
      p.rect.y0 += rng.uniform_int(-j, j);
      p.rect.x1 += rng.uniform_int(-j, j);
      p.rect.y1 += rng.uniform_int(-j, j);
    }
    if (dropped) {
      detail::for_rect(scene.pred, inst.rect, [](PanopticLabel& px, int, int) { px = PanopticLabel::unknown(); });
    } else {
      detail::for_rect(scene.pred, p.rect, [&](PanopticLabel& px, int, int) { px = PanopticLabel::thing(p.cls, p.id); });
    }
  }
  if (spec.confine_errors) {
    for (std::size_t i = 0; i < scene.pred.size(); ++i) {
      const Difficulty d = scene.difficulty[i];
      if (d == Difficulty::kNotDifficult ||
          (d == Difficulty::kDifficultInstance && scene.pred[i].cls != scene.gt[i].cls)) {
        scene.pred[i] = scene.gt[i];
      }
    }
  }

  // Confidence scores: aligned pixels read low where difficult, high
  // elsewhere; the rest are uniform noise.
  const double align = spec.confidence_alignment;
  for (std::size_t i = 0; i < scene.gt.size(); ++i) {
    const Difficulty d = scene.difficulty[i];
    const double u_align = unit_from(CounterRng::at(spec.seed, 2, 3 * i));
    const double u_class = unit_from(CounterRng::at(spec.seed, 2, 3 * i + 1));
    const double u_inst = unit_from(CounterRng::at(spec.seed, 2, 3 * i + 2));
    if (u_align < align) {
      scene.class_conf.scores[i] = d == Difficulty::kDifficultClass ? 0.45 * u_class : 0.55 + 0.45 * u_class;
      scene.inst_conf.scores[i] = d == Difficulty::kDifficultInstance ? 0.45 * u_inst : 0.55 + 0.45 * u_inst;
    } else {
      scene.class_conf.scores[i] = u_class;
      scene.inst_conf.scores[i] = u_inst;
    }
  }
  return scene;
}

/// Scene spec with randomized size and perturbation controls, for
/// property tests and oracle sweeps. Stream 9 keeps it apart from the
/// scene's own draws.
inline SceneSpec random_spec(std::uint64_t seed, int min_dim = 32, int max_dim = 128) {
  CounterRng rng(seed, 9);
  SceneSpec s;
  s.seed = seed;
  s.width = rng.uniform_int(min_dim, max_dim);
  s.height = rng.uniform_int(min_dim, max_dim);
  s.stuff_regions = rng.uniform_int(1, 8);
  s.stuff_classes = rng.uniform_int(1, kNumStuffClasses);
  s.thing_classes = rng.uniform_int(0, kNumClasses - kNumStuffClasses);
  s.min_instances = 0;
  s.max_instances = rng.uniform_int(0, 4);
  s.boundary_jitter = rng.uniform_int(0, 4);
  s.class_flip_rate = rng.uniform(0.0, 0.4);
  s.drop_rate = rng.uniform(0.0, 0.3);
  s.difficulty_rate = rng.uniform(0.0, 0.8);
  s.void_rate = rng.uniform(0.0, 0.5);
  s.unknown_instance_rate = rng.uniform(0.0, 0.4);
  s.confine_errors = rng.bernoulli(0.25);
  s.confidence_alignment = rng.uniform();
  return s;
}

/// Stage-1 labels consistent with a difficulty map: difficult_class pixels
/// lose their class, difficult_instance pixels their instance.
inline PanopticRaster stage_one_labels(const PanopticRaster& gt, const DifficultyRaster& difficulty) {
  require_same_shape(gt, difficulty, "ground truth and difficulty map differ in size");
  PanopticRaster h1 = gt;
  for (std::size_t i = 0; i < h1.size(); ++i) {
    if (difficulty[i] == Difficulty::kDifficultClass) {
      h1[i] = PanopticLabel::unknown();
    } else if (difficulty[i] == Difficulty::kDifficultInstance && is_thing(gt[i].cls)) {
      h1[i] = PanopticLabel::unknown_instance(gt[i].cls);
    }
  }
  return h1;
}

/// Mask-classification output that reproduces `pred` approximately: one
/// pair per predicted segment, a peaked class distribution, a high soft
/// mask inside the segment and low noise outside, plus one no-object pair.
inline MaskClassificationOutput mask_classification_for(const PanopticRaster& pred, std::uint64_t seed) {
  const IndexedRaster idx = index_panoptic(pred);
  MaskClassificationOutput mc;
  mc.width = pred.width();
  mc.height = pred.height();
  CounterRng rng(seed, 5);
  std::vector<std::size_t> pair_of(idx.keys.size(), SIZE_MAX);
  for (std::size_t k = 0; k < idx.keys.size(); ++k) {
    if (!idx.keys[k].is_segment()) continue;
    MaskClassificationOutput::Distribution d{};
    const double peak = rng.uniform(0.5, 0.95);
    d.fill((1.0 - peak) / static_cast<double>(d.size() - 1));
    d[idx.keys[k].cls] = peak;
    pair_of[k] = mc.probs.size();
    mc.probs.push_back(d);
  }
  MaskClassificationOutput::Distribution none{};
  none.fill(0.01 / static_cast<double>(none.size() - 1));
  none[MaskClassificationOutput::kNoObject] = 0.99;
  mc.probs.push_back(none);
  const std::size_t pairs = mc.probs.size();
  for (std::size_t i = 0; i < pairs; ++i) mc.masks.emplace_back(mc.width, mc.height, 0.0);
  for (std::size_t px = 0; px < pred.size(); ++px) {
    const std::uint64_t base = px * pairs;
    const std::size_t own = pair_of[idx.index[px]];
    for (std::size_t i = 0; i < pairs; ++i) {
      const double u = unit_from(CounterRng::at(seed, 6, base + i));
      mc.masks[i][px] = i == own ? 0.6 + 0.4 * u : 0.2 * u;
    }
  }
  return mc;
}

}  // namespace upq::synth
