#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "upq/error.hpp"
#include "upq/labels.hpp"
#include "upq/raster.hpp"

namespace upq {

/// Output of a mask-classification model: N (class distribution, soft
/// mask) pairs. Distributions run over the 19 classes plus a trailing
/// no-object entry.
struct MaskClassificationOutput {
  static constexpr int kNoObject = kNumClasses;
  using Distribution = std::array<double, kNumClasses + 1>;

  int width = 0;
  int height = 0;
  std::vector<Distribution> probs;
  std::vector<Raster<double>> masks;

  std::size_t pairs() const { return probs.size(); }

  /// Most likely class of pair i; ties go to the lower class index.
  int top_class(std::size_t i) const {
    int best = 0;
    for (int c = 1; c <= kNoObject; ++c) {
      if (probs[i][c] > probs[i][best]) best = c;
    }
    return best;
  }

  void validate() const {
    if (probs.empty()) throw Error(ErrorKind::kArgument, "mask-classification output has no pairs");
    if (probs.size() != masks.size()) {
      throw Error(ErrorKind::kArgument, "mask-classification output has mismatched pair lists");
    }
    for (std::size_t i = 0; i < probs.size(); ++i) {
      double sum = 0.0;
      for (double p : probs[i]) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kArgument, "class probability outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw Error(ErrorKind::kArgument, "class distribution of pair " + std::to_string(i) + " sums to " +
                                              std::to_string(sum));
      }
      if (masks[i].width() != width || masks[i].height() != height) {
        throw Error(ErrorKind::kDimension, "mask " + std::to_string(i) + " differs from the output size");
      }
      for (double m : masks[i].pixels()) {
        if (!(m >= 0.0 && m <= 1.0)) throw Error(ErrorKind::kArgument, "mask value outside [0, 1]");
      }
    }
  }
};

inline constexpr int kUnassigned = -1;

/// Per-pixel winning pair: argmax over pairs whose top class is not
/// no-object of p_i(c_i) * m_i. Ties go to the lower pair index; pixels
/// where no eligible pair scores above zero stay unassigned.
inline Raster<int> assign_pairs(const MaskClassificationOutput& mc) {
  mc.validate();
  Raster<int> winner(mc.width, mc.height, kUnassigned);
  std::vector<double> best(winner.size(), 0.0);
  for (std::size_t i = 0; i < mc.pairs(); ++i) {
    const int c = mc.top_class(i);
    if (c == MaskClassificationOutput::kNoObject) continue;
    const double p = mc.probs[i][c];
    const auto& mask = mc.masks[i];
    for (std::size_t px = 0; px < winner.size(); ++px) {
      const double score = p * mask[px];
      if (score > best[px]) {
        best[px] = score;
        winner[px] = static_cast<int>(i);
      }
    }
  }
  return winner;
}

/// Panoptic prediction from mask-classification output. Things pixels of
/// pair i get instance id i + 1; stuff pairs of one class merge into that
/// class's single stuff segment.
inline PanopticRaster panoptic_inference(const MaskClassificationOutput& mc) {
  const Raster<int> winner = assign_pairs(mc);
  PanopticRaster out(mc.width, mc.height, PanopticLabel::unknown());
  for (std::size_t px = 0; px < out.size(); ++px) {
    const int i = winner[px];
    if (i == kUnassigned) continue;
    const auto c = static_cast<ClassId>(mc.top_class(static_cast<std::size_t>(i)));
    out[px] = is_thing(c) ? PanopticLabel::thing(c, static_cast<SegmentId>(i + 1)) : PanopticLabel::stuff(c);
  }
  return out;
}

struct ConfidencePair {
  ConfidenceRaster class_conf;
  ConfidenceRaster inst_conf;
};

/// Class confidence by marginalizing over all pairs, instance confidence
/// as the share of the winning pair within it:
///   s_class = sum_i p_i(c*) * mbar_i,   s_inst = p_i*(c*) * mbar_i* / s_class
/// with masks normalized to sum to one over the pairs. Unassigned pixels,
/// an all-zero mask column, or s_class = 0 give zero for both scores.
inline ConfidencePair marginal_confidences(const MaskClassificationOutput& mc, const PanopticRaster& assignment) {
  const Raster<int> winner = assign_pairs(mc);
  if (assignment.width() != mc.width || assignment.height() != mc.height) {
    throw Error(ErrorKind::kDimension, "assignment differs from the mask-classification output size");
  }
  ConfidencePair out{{ConfidenceKind::kClass, Raster<double>(mc.width, mc.height, 0.0)},
                     {ConfidenceKind::kInstance, Raster<double>(mc.width, mc.height, 0.0)}};
  for (std::size_t px = 0; px < winner.size(); ++px) {
    const int w = winner[px];
    const ClassId expected =
        w == kUnassigned ? kUnknownClass : static_cast<ClassId>(mc.top_class(static_cast<std::size_t>(w)));
    if (assignment[px].cls != expected) {
      throw Error(ErrorKind::kArgument, "assignment was not produced by panoptic inference on this output (pixel " +
                                            std::to_string(px) + ")");
    }
    if (w == kUnassigned) continue;
    double mask_sum = 0.0;
    for (std::size_t i = 0; i < mc.pairs(); ++i) mask_sum += mc.masks[i][px];
    if (mask_sum <= 0.0) continue;
    double s_class = 0.0;
    for (std::size_t i = 0; i < mc.pairs(); ++i) s_class += mc.probs[i][expected] * (mc.masks[i][px] / mask_sum);
    if (s_class <= 0.0) continue;
    const double winning = mc.probs[w][expected] * (mc.masks[w][px] / mask_sum);
    out.class_conf.scores[px] = std::min(s_class, 1.0);
    out.inst_conf.scores[px] = std::min(winning / s_class, 1.0);
  }
  return out;
}

inline ConfidencePair constant_confidence(int width, int height, double value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorKind::kArgument, "constant confidence " + std::to_string(value) + " outside [0, 1]");
  }
  return {{ConfidenceKind::kClass, Raster<double>(width, height, value)},
          {ConfidenceKind::kInstance, Raster<double>(width, height, value)}};
}

/// Confidences read off the ground-truth difficulty map. Difficult-class
/// pixels keep instance score 1: the class branch consumes them first.
inline ConfidencePair oracle_confidence(const DifficultyRaster& difficulty) {
  ConfidencePair out = constant_confidence(difficulty.width(), difficulty.height(), 1.0);
  for (std::size_t px = 0; px < difficulty.size(); ++px) {
    switch (difficulty[px]) {
      case Difficulty::kDifficultClass: out.class_conf.scores[px] = 0.0; break;
      case Difficulty::kDifficultInstance: out.inst_conf.scores[px] = 0.0; break;
      case Difficulty::kNotDifficult: break;
    }
  }
  return out;
}

}  // namespace upq
