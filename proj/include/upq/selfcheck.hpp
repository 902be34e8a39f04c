#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "upq/baselines.hpp"
#include "upq/ledger.hpp"
#include "upq/oracle.hpp"
#include "upq/parallel.hpp"
#include "upq/pq.hpp"
#include "upq/sweep.hpp"
#include "upq/synth.hpp"

// Fast-path versus reference checks over seeded synthetic scenes.
namespace upq::selfcheck {

struct Options {
  int scenes = 100;
  std::uint64_t seed = 1;
  int min_dim = 32;
  int max_dim = 128;
  int workers = 1;
  int sweep_every = 10;  // the costlier sweep checks run on every n-th scene
};

struct CheckResult {
  std::string name;
  std::uint64_t cases = 0;
  std::uint64_t diffs = 0;
  std::string first_diff;

  bool pass() const { return cases > 0 && diffs == 0; }
};

inline constexpr std::array<const char*, 7> kCheckNames = {
    "pq-oracle", "upq-oracle", "matching-uniqueness", "pq-identity", "pq-equals-sq-rq", "sweep-incremental",
    "constant-identity"};

inline constexpr std::array<std::array<double, 2>, 9> kOraclePairs = {
    {{0.0, 0.0}, {0.0, 0.5}, {0.0, 1.0}, {0.5, 0.0}, {0.5, 0.5}, {0.5, 1.0}, {1.0, 0.0}, {1.0, 0.5}, {1.0, 1.0}}};

namespace detail {

using Outcome = std::optional<std::string>;  // difference, if any

struct SceneChecks {
  std::array<std::uint64_t, kCheckNames.size()> cases{};
  std::array<std::uint64_t, kCheckNames.size()> diffs{};
  std::array<std::string, kCheckNames.size()> first{};

  void record(std::size_t check, const Outcome& o) {
    ++cases[check];
    if (o) {
      if (diffs[check] == 0) first[check] = *o;
      ++diffs[check];
    }
  }
};

inline Outcome unique_matches(const MatchLedger& l) {
  std::set<SegmentKey> preds, gts;
  for (const auto& cl : l.classes) {
    for (const auto& m : cl.matches) {
      if (!preds.insert(m.pred).second) return "predicted segment matched twice";
      if (!gts.insert(m.gt).second) return "ground-truth segment matched twice";
    }
  }
  return std::nullopt;
}

inline Outcome identity_is_perfect(const PanopticRaster& gt) {
  const MetricReport r = compute_pq(evaluate_pq_ledger(gt, gt));
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& q = r.per_class[c];
    if (q.valid() && (*q.pq != 1.0 || q.sq.value_or(0.0) != 1.0 || *q.rq != 1.0)) {
      return std::string(class_name(static_cast<ClassId>(c))) + ": identity PQ below 1";
    }
  }
  return std::nullopt;
}

inline Outcome product_holds(const MetricReport& r) {
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& q = r.per_class[c];
    if (q.tp > 0 && std::abs(*q.pq - *q.sq * *q.rq) > 1e-12) {
      return std::string(class_name(static_cast<ClassId>(c))) + ": PQ != SQ*RQ";
    }
  }
  return std::nullopt;
}

inline Outcome same_cells(const std::vector<MatchLedger>& a, const std::vector<MatchLedger>& b) {
  if (a.size() != b.size()) return "cell counts differ";
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (auto d = oracle::compare_ledgers(a[k], b[k])) return "cell " + std::to_string(k) + ": " + *d;
  }
  return std::nullopt;
}

inline Outcome constant_one_is_pq(const synth::Scene& s) {
  const auto conf = constant_confidence(s.gt.width(), s.gt.height(), 1.0);
  const SampleView view{s.pred, s.gt, s.difficulty, conf.class_conf, conf.inst_conf};
  const ThresholdGrid grid = ThresholdGrid::linear(16);
  SweepAccumulator acc(grid, Binarization::kAtLeast, Aggregation::kDataset);
  acc.add(sweep_image(view, grid));
  const SweepReport sweep = acc.finalize();
  const MetricReport pq = compute_pq(evaluate_pq_ledger(s.pred, s.gt));
  for (ClassGroup g : kClassGroups) {
    if (sweep.area(g) != summary_of(pq, g)) return "area summary differs from PQ";
  }
  return std::nullopt;
}

inline SceneChecks check_scene(std::uint64_t seed, const Options& opt, bool with_sweep) {
  SceneChecks out;
  const synth::Scene s = synth::generate_scene(synth::random_spec(seed, opt.min_dim, opt.max_dim));
  auto tag = [&](Outcome o) -> Outcome {
    if (o) return "seed " + std::to_string(seed) + ": " + *o;
    return o;
  };

  const MatchLedger pq = evaluate_pq_ledger(s.pred, s.gt);
  out.record(0, tag(oracle::compare_ledgers(pq, oracle::brute_force_match(s.pred, s.gt))));
  out.record(2, tag(unique_matches(pq)));
  out.record(3, tag(identity_is_perfect(s.gt)));
  out.record(4, tag(product_holds(compute_pq(pq))));

  const SampleView view{s.pred, s.gt, s.difficulty, s.class_conf, s.inst_conf};
  for (const auto& [tc, ti] : kOraclePairs) {
    const MatchLedger fast = evaluate_upq_ledger(view, tc, ti);
    const auto state = oracle::augment(s.pred, s.gt, s.difficulty, s.class_conf, s.inst_conf, tc, ti);
    out.record(1, tag(oracle::compare_ledgers(fast, oracle::brute_force_match(s.pred, s.gt, &state))));
    out.record(2, tag(unique_matches(fast)));
    out.record(4, tag(product_holds(compute_upq(fast))));
  }

  if (with_sweep) {
    const ThresholdGrid grid = ThresholdGrid::linear(5);
    out.record(5, tag(same_cells(sweep_image(view, grid), sweep_image_naive(view, grid))));
    out.record(6, tag(constant_one_is_pq(s)));
  }
  return out;
}

}  // namespace detail

/// Runs every check over `opt.scenes` scenes with seeds seed, seed+1, ...
inline std::vector<CheckResult> run(const Options& opt) {
  if (opt.scenes < 1 || opt.min_dim < 1 || opt.max_dim < opt.min_dim || opt.sweep_every < 1) {
    throw Error(ErrorKind::kArgument, "invalid selfcheck options");
  }
  std::vector<detail::SceneChecks> per_scene(static_cast<std::size_t>(opt.scenes));
  parallel_for(per_scene.size(), opt.workers, [&](std::size_t k) {
    per_scene[k] = detail::check_scene(opt.seed + k, opt, k % static_cast<std::size_t>(opt.sweep_every) == 0);
  });
  std::vector<CheckResult> out;
  for (std::size_t c = 0; c < kCheckNames.size(); ++c) {
    CheckResult r;
    r.name = kCheckNames[c];
    for (const auto& s : per_scene) {
      if (r.diffs == 0 && s.diffs[c] > 0) r.first_diff = s.first[c];
      r.cases += s.cases[c];
      r.diffs += s.diffs[c];
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace upq::selfcheck
