#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "upq/baselines.hpp"
#include "upq/error.hpp"
#include "upq/io.hpp"
#include "upq/labels.hpp"
#include "upq/ledger.hpp"
#include "upq/parallel.hpp"
#include "upq/pq.hpp"
#include "upq/sweep.hpp"

namespace upq {

enum class MetricKind { kPq, kUpq, kAupq, kMiou };

inline const char* metric_name(MetricKind m) {
  switch (m) {
    case MetricKind::kPq: return "pq";
    case MetricKind::kUpq: return "upq";
    case MetricKind::kAupq: return "aupq";
    case MetricKind::kMiou: return "miou";
  }
  return "?";
}

inline MetricKind parse_metric(const std::string& s) {
  if (s == "pq") return MetricKind::kPq;
  if (s == "upq") return MetricKind::kUpq;
  if (s == "aupq") return MetricKind::kAupq;
  if (s == "miou") return MetricKind::kMiou;
  throw Error(ErrorKind::kArgument, "unknown metric '" + s + "' (pq | upq | aupq | miou)");
}

inline const char* binarization_name(Binarization b) { return b == Binarization::kAtLeast ? "ge" : "gt"; }

inline Binarization parse_binarization(const std::string& s) {
  if (s == "ge") return Binarization::kAtLeast;
  if (s == "gt") return Binarization::kAbove;
  throw Error(ErrorKind::kArgument, "unknown binarization '" + s + "' (ge | gt)");
}

inline const char* aggregation_name(Aggregation a) { return a == Aggregation::kDataset ? "dataset" : "per-image-mean"; }

inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "dataset") return Aggregation::kDataset;
  if (s == "per-image-mean") return Aggregation::kPerImageMean;
  throw Error(ErrorKind::kArgument, "unknown aggregation '" + s + "' (dataset | per-image-mean)");
}

/// Where confidences come from when evaluating UPQ or AUPQ.
struct Baseline {
  enum class Kind { kNone, kConstant, kMarginal, kOracle };
  Kind kind = Kind::kNone;
  double value = 1.0;  // kConstant only

  static Baseline parse(const std::string& s) {
    if (s == "none") return {Kind::kNone};
    if (s == "marginal") return {Kind::kMarginal};
    if (s == "oracle") return {Kind::kOracle};
    if (s.rfind("constant:", 0) == 0) {
      const std::string num = s.substr(9);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(num, &used);
      } catch (...) {
        used = 0;
      }
      if (num.empty() || used != num.size() || !(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::kArgument, "constant baseline needs a value in [0, 1], got '" + num + "'");
      }
      return {Kind::kConstant, v};
    }
    throw Error(ErrorKind::kArgument, "unknown baseline '" + s + "' (none | constant:v | marginal | oracle)");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::kNone: return "none";
      case Kind::kMarginal: return "marginal";
      case Kind::kOracle: return "oracle";
      case Kind::kConstant: {
        char buf[48];
        std::snprintf(buf, sizeof buf, "constant:%.6f", value);
        return buf;
      }
    }
    return "?";
  }
};

struct EvalConfig {
  MetricKind metric = MetricKind::kPq;
  int grid_size = 16;
  double grid_lo = 0.0;
  double grid_hi = 1.0;
  Binarization rule = Binarization::kAtLeast;
  Aggregation aggregation = Aggregation::kDataset;
  int workers = 1;
  std::vector<std::string> condition_filter;  // keep samples carrying all of these tags
  Baseline baseline;
  double class_threshold = 0.5;  // single operating point for upq
  double inst_threshold = 0.5;
  bool stage_labels = false;     // score stage-1 labels against stage-2 labels

  void validate() const {
    if (grid_size < 1) throw Error(ErrorKind::kArgument, "grid size must be at least 1");
    if (workers < 1) throw Error(ErrorKind::kArgument, "worker count must be at least 1");
    ThresholdGrid::linear(grid_size, grid_lo, grid_hi);
    for (double t : {class_threshold, inst_threshold}) {
      if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::kArgument, "thresholds must lie in [0, 1]");
    }
    for (const auto& c : condition_filter) {
      if (!io::condition_tags().contains(c)) throw Error(ErrorKind::kArgument, "unknown condition '" + c + "'");
    }
    if (stage_labels && metric != MetricKind::kPq && metric != MetricKind::kMiou) {
      throw Error(ErrorKind::kArgument, "stage-label evaluation supports pq and miou only");
    }
  }
};

namespace detail {

namespace fs = std::filesystem;
using Path = std::optional<fs::path>;

struct Plan {
  Path pred;  // panoptic prediction raster, if read from disk
  bool pred_from_masks = false;
  Path gt;
  Path difficulty;
  Path class_conf;
  Path inst_conf;
  Path masks;
};

// Which files a sample needs under a config; absent manifest fields are
// appended to `missing`.
inline Plan plan_sample(const io::SampleRecord& r, const EvalConfig& cfg, std::vector<std::string>& missing) {
  Plan p;
  auto need = [&](const Path& path, const char* field) {
    if (!path) missing.push_back(std::string("no '") + field + "' entry");
    return path;
  };
  if (cfg.stage_labels) {
    p.pred = need(r.h1, "h1");
    p.gt = need(r.h2, "h2");
    return p;
  }
  p.gt = need(r.ground_truth, "ground_truth");
  const bool uncertain = cfg.metric == MetricKind::kUpq || cfg.metric == MetricKind::kAupq;
  const bool marginal = uncertain && cfg.baseline.kind == Baseline::Kind::kMarginal;
  if (cfg.metric == MetricKind::kMiou && r.semantic_prediction) {
    p.pred = r.semantic_prediction;
  } else if (marginal || (!r.prediction && r.mask_classification)) {
    p.masks = need(r.mask_classification, "mask_classification");
    p.pred_from_masks = true;
  } else {
    p.pred = need(r.prediction, "prediction");
  }
  if (uncertain) {
    p.difficulty = need(r.difficulty, "difficulty");
    if (cfg.baseline.kind == Baseline::Kind::kNone) {
      p.class_conf = need(r.class_conf, "class_conf");
      p.inst_conf = need(r.inst_conf, "inst_conf");
    }
  }
  return p;
}

inline std::vector<fs::path> plan_files(const Plan& p) {
  std::vector<fs::path> out;
  for (const Path* path : {&p.pred, &p.gt, &p.difficulty, &p.class_conf, &p.inst_conf, &p.masks}) {
    if (*path) out.push_back(**path);
  }
  return out;
}

struct SampleOutcome {
  MatchLedger ledger;                // pq, upq
  std::vector<MatchLedger> cells;    // aupq
  ConfusionMatrix confusion;         // miou
};

inline SampleOutcome evaluate_sample(const Plan& plan, const EvalConfig& cfg, io::PanopticEncoding enc) {
  const PanopticRaster gt = io::load_panoptic(*plan.gt, enc);
  const io::Dims dims{gt.width(), gt.height()};
  std::optional<MaskClassificationOutput> mc;
  PanopticRaster pred = [&] {
    if (plan.pred_from_masks) {
      mc = io::load_mask_classification(*plan.masks, dims);
      return panoptic_inference(*mc);
    }
    return io::load_panoptic(*plan.pred, enc, dims);
  }();

  SampleOutcome out;
  if (cfg.metric == MetricKind::kPq) {
    out.ledger = evaluate_pq_ledger(pred, gt);
    return out;
  }
  if (cfg.metric == MetricKind::kMiou) {
    out.confusion = confusion_matrix(pred, gt);
    return out;
  }

  const DifficultyRaster difficulty = io::load_difficulty(*plan.difficulty, dims);
  ConfidencePair conf = [&]() -> ConfidencePair {
    switch (cfg.baseline.kind) {
      case Baseline::Kind::kConstant: return constant_confidence(dims.width, dims.height, cfg.baseline.value);
      case Baseline::Kind::kOracle: return oracle_confidence(difficulty);
      case Baseline::Kind::kMarginal: return marginal_confidences(*mc, pred);
      case Baseline::Kind::kNone: break;
    }
    return {io::load_confidence(*plan.class_conf, ConfidenceKind::kClass, dims),
            io::load_confidence(*plan.inst_conf, ConfidenceKind::kInstance, dims)};
  }();
  const SampleView view{pred, gt, difficulty, conf.class_conf, conf.inst_conf};
  if (cfg.metric == MetricKind::kUpq) {
    out.ledger = evaluate_upq_ledger(view, cfg.class_threshold, cfg.inst_threshold, cfg.rule);
  } else {
    out.cells = sweep_image(view, ThresholdGrid::linear(cfg.grid_size, cfg.grid_lo, cfg.grid_hi), cfg.rule);
  }
  return out;
}

// Accumulators for one reporting slice (the whole set or one condition).
struct Slice {
  std::size_t samples = 0;
  QualityAccumulator quality;
  std::optional<SweepAccumulator> sweep;
  ConfusionMatrix confusion;

  Slice(const EvalConfig& cfg)
      : quality(cfg.aggregation) {
    if (cfg.metric == MetricKind::kAupq) {
      sweep.emplace(ThresholdGrid::linear(cfg.grid_size, cfg.grid_lo, cfg.grid_hi), cfg.rule, cfg.aggregation);
    }
  }

  void add(const SampleOutcome& o, MetricKind metric) {
    ++samples;
    switch (metric) {
      case MetricKind::kPq:
      case MetricKind::kUpq: quality.add(o.ledger); break;
      case MetricKind::kAupq: sweep->add(o.cells); break;
      case MetricKind::kMiou: confusion.merge(o.confusion); break;
    }
  }
};

using json = nlohmann::json;

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Names of the three quantities under each metric.
struct Names {
  const char* q;
  const char* s;
  const char* r;
};

inline Names names_for(MetricKind m) {
  switch (m) {
    case MetricKind::kUpq: return {"upq", "usq", "urq"};
    case MetricKind::kAupq: return {"aupq", "ausq", "aurq"};
    default: return {"pq", "sq", "rq"};
  }
}

inline const char* group_name(ClassGroup g) {
  return g == ClassGroup::kAll ? "all" : g == ClassGroup::kStuff ? "stuff" : "things";
}

}  // namespace detail

/// JSON form of a quality report (pq or upq).
inline nlohmann::json quality_to_json(const MetricReport& r, MetricKind metric) {
  using detail::json;
  const auto n = detail::names_for(metric);
  json classes = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassQuality& q = r.per_class[c];
    classes[std::string(class_name(static_cast<ClassId>(c)))] = {
        {n.q, detail::opt(q.pq)}, {n.s, detail::opt(q.sq)}, {n.r, detail::opt(q.rq)}, {"tp", q.tp},
        {"fp", q.fp},             {"fn", q.fn},            {"iou_sum", q.iou_sum}};
  }
  json out{{"classes", classes}};
  for (ClassGroup g : kClassGroups) {
    const QualitySummary& s = summary_of(r, g);
    out[detail::group_name(g)] = {
        {n.q, detail::opt(s.pq)}, {n.s, detail::opt(s.sq)}, {n.r, detail::opt(s.rq)}, {"classes", s.classes}};
  }
  return out;
}

inline nlohmann::json sweep_to_json(const SweepReport& r) {
  using detail::json;
  const auto n = detail::names_for(MetricKind::kAupq);
  json classes = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassArea& a = r.per_class[c];
    classes[std::string(class_name(static_cast<ClassId>(c)))] = {
        {n.q, detail::opt(a.pq)}, {n.s, detail::opt(a.sq)}, {n.r, detail::opt(a.rq)}};
  }
  json out{{"classes", classes},
           {"grid", {{"class_thresholds", r.grid.class_thresholds}, {"inst_thresholds", r.grid.inst_thresholds}}}};
  json matrices = json::object();
  for (ClassGroup g : kClassGroups) {
    const QualitySummary& a = r.area(g);
    out[detail::group_name(g)] = {
        {n.q, detail::opt(a.pq)}, {n.s, detail::opt(a.sq)}, {n.r, detail::opt(a.rq)}, {"classes", a.classes}};
    json upq = json::array(), usq = json::array(), urq = json::array();
    for (std::size_t kc = 0; kc < r.grid.class_count(); ++kc) {
      json rq_row = json::array(), sq_row = json::array(), pq_row = json::array();
      for (std::size_t ki = 0; ki < r.grid.inst_count(); ++ki) {
        const QualitySummary& s = summary_of(r.cells[r.grid.cell(kc, ki)], g);
        pq_row.push_back(detail::opt(s.pq));
        sq_row.push_back(detail::opt(s.sq));
        rq_row.push_back(detail::opt(s.rq));
      }
      upq.push_back(pq_row);
      usq.push_back(sq_row);
      urq.push_back(rq_row);
    }
    matrices[detail::group_name(g)] = {{"upq", upq}, {"usq", usq}, {"urq", urq}};
  }
  out["matrices"] = matrices;
  return out;
}

inline nlohmann::json miou_to_json(const IouReport& r) {
  using detail::json;
  json classes = json::object();
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    classes[std::string(class_name(static_cast<ClassId>(c)))] = detail::opt(r.per_class[c]);
    present += r.per_class[c].has_value();
  }
  return {{"classes", classes}, {"miou", detail::opt(r.mean)}, {"classes_present", present}};
}

/// Error raised while evaluating one sample; the message names it.
class SampleError : public Error {
 public:
  SampleError(const std::string& sample_id, const Error& cause)
      : Error(cause.kind(), "sample '" + sample_id + "': " + cause.detail()), sample_id_(sample_id) {}
  const std::string& sample_id() const noexcept { return sample_id_; }

 private:
  std::string sample_id_;
};

/// Evaluates a manifest and returns the report document. Output depends
/// only on the inputs and the config, never on the worker count.
inline nlohmann::json evaluate_manifest(const io::DatasetManifest& manifest, const EvalConfig& cfg) {
  cfg.validate();
  using detail::json;

  std::vector<const io::SampleRecord*> kept;
  for (const auto& r : manifest.samples) {
    const bool ok = std::all_of(cfg.condition_filter.begin(), cfg.condition_filter.end(), [&](const std::string& c) {
      return std::find(r.conditions.begin(), r.conditions.end(), c) != r.conditions.end();
    });
    if (ok) kept.push_back(&r);
  }

  // All missing inputs are reported up front, before any work.
  std::vector<detail::Plan> plans;
  std::vector<std::string> problems;
  for (const auto* r : kept) {
    std::vector<std::string> missing;
    plans.push_back(detail::plan_sample(*r, cfg, missing));
    for (const auto& path : detail::plan_files(plans.back())) {
      if (!std::filesystem::exists(path)) missing.push_back("missing file " + path.string());
    }
    for (const auto& m : missing) problems.push_back("sample '" + r->sample_id + "': " + m);
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " input problem(s)";
    for (std::size_t k = 0; k < problems.size() && k < 20; ++k) msg += "\n  " + problems[k];
    if (problems.size() > 20) msg += "\n  ...";
    throw Error(ErrorKind::kIo, msg);
  }

  detail::Slice all(cfg);
  std::map<std::string, detail::Slice> by_condition;

  // Bounded batches keep memory flat for sweeps; each batch is reduced in
  // manifest order.
  constexpr std::size_t kBatch = 64;
  for (std::size_t start = 0; start < kept.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, kept.size() - start);
    std::vector<detail::SampleOutcome> outcomes(n);
    parallel_for(n, cfg.workers, [&](std::size_t k) {
      const auto& r = *kept[start + k];
      try {
        outcomes[k] = detail::evaluate_sample(plans[start + k], cfg, manifest.encoding);
      } catch (const Error& e) {
        throw SampleError(r.sample_id, e);
      }
    });
    for (std::size_t k = 0; k < n; ++k) {
      all.add(outcomes[k], cfg.metric);
      for (const auto& tag : kept[start + k]->conditions) {
        by_condition.try_emplace(tag, cfg).first->second.add(outcomes[k], cfg.metric);
      }
    }
  }

  auto result_of = [&](const detail::Slice& s) -> json {
    switch (cfg.metric) {
      case MetricKind::kPq:
      case MetricKind::kUpq: return quality_to_json(s.quality.finalize(), cfg.metric);
      case MetricKind::kAupq: return sweep_to_json(s.sweep->finalize());
      case MetricKind::kMiou: return miou_to_json(iou_from_confusion(s.confusion));
    }
    return nullptr;
  };

  json config{{"aggregation", aggregation_name(cfg.aggregation)},
              {"baseline", cfg.baseline.to_string()},
              {"binarization", binarization_name(cfg.rule)},
              {"condition_filter", cfg.condition_filter},
              {"grid", {{"size", cfg.grid_size}, {"lo", cfg.grid_lo}, {"hi", cfg.grid_hi}}},
              {"panoptic_encoding", io::encoding_name(manifest.encoding)},
              {"stage_labels", cfg.stage_labels}};
  if (cfg.metric == MetricKind::kUpq) {
    config["class_threshold"] = cfg.class_threshold;
    config["inst_threshold"] = cfg.inst_threshold;
  }
  json conditions = json::object();
  for (const auto& [tag, slice] : by_condition) {
    conditions[tag] = {{"samples", slice.samples}, {"result", result_of(slice)}};
  }
  return {{"schema_version", io::kSchemaVersion},
          {"metric", metric_name(cfg.metric)},
          {"config", config},
          {"samples", all.samples},
          {"result", result_of(all)},
          {"conditions", conditions}};
}

/// Paths at which two report documents differ; numbers compare within
/// `tolerance`, everything else exactly.
inline std::vector<std::string> diff_reports(const nlohmann::json& a, const nlohmann::json& b, double tolerance,
                                             const std::string& path = "") {
  std::vector<std::string> out;
  const std::string here = path.empty() ? "/" : path;
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    if (!(std::abs(x - y) <= tolerance)) out.push_back(here + ": " + a.dump() + " vs " + b.dump());
    return out;
  }
  if (a.type() != b.type()) {
    out.push_back(here + ": " + a.dump() + " vs " + b.dump());
    return out;
  }
  if (a.is_object()) {
    std::set<std::string> keys;
    for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
    for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
    for (const auto& k : keys) {
      const std::string sub = path + "/" + k;
      if (!a.contains(k) || !b.contains(k)) {
        out.push_back(sub + ": present in only one report");
        continue;
      }
      auto d = diff_reports(a.at(k), b.at(k), tolerance, sub);
      out.insert(out.end(), d.begin(), d.end());
    }
    return out;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      out.push_back(here + ": array lengths " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
      return out;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
      auto d = diff_reports(a[k], b[k], tolerance, path + "/" + std::to_string(k));
      out.insert(out.end(), d.begin(), d.end());
    }
    return out;
  }
  if (a != b) out.push_back(here + ": " + a.dump() + " vs " + b.dump());
  return out;
}

}  // namespace upq
