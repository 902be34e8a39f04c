// upqeval: dataset evaluation, difficulty derivation, synthetic data,
// self-checks and report comparison.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upq/all.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int {
  kOk = 0,
  kDifferent = 1,  // report-diff found differences, or a selfcheck failed
  kUsage = 2,
  kInputFailure = 3,
  kValidationFailure = 4,
};

int exit_code_for(upq::ErrorKind kind) {
  switch (kind) {
    case upq::ErrorKind::kIo:
    case upq::ErrorKind::kFormat:
    case upq::ErrorKind::kBitDepth:
    case upq::ErrorKind::kSchema: return kInputFailure;
    case upq::ErrorKind::kArgument:
    case upq::ErrorKind::kDimension:
    case upq::ErrorKind::kStructure: return kValidationFailure;
  }
  return kValidationFailure;
}

void write_or_print(const std::string& out, const json& report) {
  if (out.empty() || out == "-") {
    std::cout << upq::io::format_report(report);
  } else {
    upq::io::save_report(out, report);
  }
}

struct EvaluateArgs {
  std::string manifest;
  std::string out;
  std::string metric = "pq";
  int grid = 16;
  double grid_lo = 0.0;
  double grid_hi = 1.0;
  std::string binarization = "ge";
  std::string aggregation = "dataset";
  int workers = upq::default_workers();
  std::vector<std::string> conditions;
  std::string baseline = "none";
  double class_threshold = 0.5;
  double inst_threshold = 0.5;
  bool stage_labels = false;
};

int run_evaluate(const EvaluateArgs& a) {
  upq::EvalConfig cfg;
  cfg.metric = upq::parse_metric(a.metric);
  cfg.grid_size = a.grid;
  cfg.grid_lo = a.grid_lo;
  cfg.grid_hi = a.grid_hi;
  cfg.rule = upq::parse_binarization(a.binarization);
  cfg.aggregation = upq::parse_aggregation(a.aggregation);
  cfg.workers = a.workers;
  cfg.condition_filter = a.conditions;
  cfg.baseline = upq::Baseline::parse(a.baseline);
  cfg.class_threshold = a.class_threshold;
  cfg.inst_threshold = a.inst_threshold;
  cfg.stage_labels = a.stage_labels;
  const auto manifest = upq::io::load_manifest(a.manifest);
  write_or_print(a.out, upq::evaluate_manifest(manifest, cfg));
  return kOk;
}

struct DeriveArgs {
  std::string h1_dir;
  std::string h2_dir;
  std::string manifest;
  std::string out_dir;
  std::string encoding = "id_rgb";
  int workers = upq::default_workers();
};

json coverage_json(const upq::CoverageBucket& b) {
  return {{"samples", b.samples},
          {"pixels", b.pixels},
          {"h1_labeled", b.h1_labeled},
          {"h2_added", b.h2_added},
          {"unlabeled", b.unlabeled},
          {"h1_fraction", b.h1_fraction()},
          {"added_fraction", b.added_fraction()},
          {"unlabeled_fraction", b.unlabeled_fraction()},
          {"h1_instances", b.h1_instances},
          {"h2_instances", b.h2_instances}};
}

int run_derive(const DeriveArgs& a) {
  struct Job {
    std::string name;
    fs::path h1, h2;
    std::vector<std::string> conditions;
  };
  std::vector<Job> jobs;
  upq::io::PanopticEncoding enc = upq::io::parse_encoding(a.encoding);
  if (!a.manifest.empty()) {
    const auto m = upq::io::load_manifest(a.manifest);
    enc = m.encoding;
    for (const auto& r : m.samples) {
      if (!r.h1 || !r.h2) {
        throw upq::Error(upq::ErrorKind::kIo, "sample '" + r.sample_id + "' lacks an h1 or h2 entry");
      }
      jobs.push_back({r.sample_id, *r.h1, *r.h2, r.conditions});
    }
  } else {
    if (a.h1_dir.empty() || a.h2_dir.empty()) {
      throw upq::Error(upq::ErrorKind::kArgument, "give --manifest, or both --h1 and --h2");
    }
    for (const auto& entry : fs::directory_iterator(a.h1_dir)) {
      if (entry.path().extension() != ".png") continue;
      const fs::path other = fs::path(a.h2_dir) / entry.path().filename();
      if (!fs::exists(other)) {
        throw upq::Error(upq::ErrorKind::kIo, "no stage-2 file for " + entry.path().filename().string());
      }
      jobs.push_back({entry.path().stem().string(), entry.path(), other, {}});
    }
    std::sort(jobs.begin(), jobs.end(), [](const Job& x, const Job& y) { return x.name < y.name; });
  }
  fs::create_directories(a.out_dir);
  std::vector<upq::CoverageBucket> buckets(jobs.size());
  upq::parallel_for(jobs.size(), a.workers, [&](std::size_t k) {
    const Job& j = jobs[k];
    try {
      const auto h1 = upq::io::load_panoptic(j.h1, enc);
      const auto h2 = upq::io::load_panoptic(j.h2, enc, upq::io::Dims{h1.width(), h1.height()});
      upq::io::save_difficulty(fs::path(a.out_dir) / (j.name + ".png"), upq::derive_difficulty(h1, h2));
      buckets[k] = upq::coverage_of(h1, h2);
    } catch (const upq::Error& e) {
      throw upq::SampleError(j.name, e);
    }
  });
  upq::CoverageStats stats;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    stats.overall.merge(buckets[k]);
    for (const auto& tag : jobs[k].conditions) stats.per_condition[tag].merge(buckets[k]);
  }
  json per = json::object();
  for (const auto& [tag, b] : stats.per_condition) per[tag] = coverage_json(b);
  upq::io::save_report(fs::path(a.out_dir) / "coverage.json", {{"schema_version", upq::io::kSchemaVersion},
                                                              {"overall", coverage_json(stats.overall)},
                                                              {"conditions", per}});
  return kOk;
}

struct SynthArgs {
  std::string out_dir;
  int scenes = 10;
  std::uint64_t seed = 1;
  std::string encoding = "id_rgb";
  upq::synth::SceneSpec spec;
  bool stages = false;
  bool masks = false;
};

int run_synth(const SynthArgs& a) {
  upq::synth::DatasetOptions opt;
  opt.scenes = a.scenes;
  opt.first_seed = a.seed;
  opt.encoding = upq::io::parse_encoding(a.encoding);
  opt.stages = a.stages;
  opt.masks = a.masks;
  upq::synth::write_dataset(a.out_dir, a.spec, opt);
  return kOk;
}

int run_selfcheck(const upq::selfcheck::Options& opt) {
  const auto results = upq::selfcheck::run(opt);
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.pass();
    std::cout << (r.pass() ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases << " diffs=" << r.diffs;
    if (!r.first_diff.empty()) std::cout << " first: " << r.first_diff;
    std::cout << "\n";
  }
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kDifferent;
}

int run_report_diff(const std::string& a, const std::string& b, double tolerance) {
  const auto diffs = upq::diff_reports(upq::io::load_report(a), upq::io::load_report(b), tolerance);
  for (const auto& d : diffs) std::cout << d << "\n";
  std::cout << (diffs.empty() ? "identical" : std::to_string(diffs.size()) + " difference(s)") << "\n";
  return diffs.empty() ? kOk : kDifferent;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panoptic and uncertainty-aware panoptic quality evaluation"};
  app.require_subcommand(1);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a dataset manifest");
  evaluate->add_option("manifest", ev.manifest, "Dataset manifest (JSON)")->required();
  evaluate->add_option("-o,--out", ev.out, "Report path (stdout if omitted)");
  evaluate->add_option("-m,--metric", ev.metric, "pq | upq | aupq | miou")
      ->check(CLI::IsMember({"pq", "upq", "aupq", "miou"}))
      ->capture_default_str();
  evaluate->add_option("--grid", ev.grid, "Thresholds per grid axis")->capture_default_str();
  evaluate->add_option("--grid-lo", ev.grid_lo, "Lowest grid threshold")->capture_default_str();
  evaluate->add_option("--grid-hi", ev.grid_hi, "Highest grid threshold")->capture_default_str();
  evaluate->add_option("--binarization", ev.binarization, "ge (score >= t) | gt (score > t)")
      ->check(CLI::IsMember({"ge", "gt"}))
      ->capture_default_str();
  evaluate->add_option("--aggregation", ev.aggregation, "dataset | per-image-mean")
      ->check(CLI::IsMember({"dataset", "per-image-mean"}))
      ->capture_default_str();
  evaluate->add_option("-j,--workers", ev.workers, "Worker threads (default: UPQ_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--condition", ev.conditions, "Keep samples carrying this tag (repeatable)");
  evaluate->add_option("--baseline", ev.baseline, "none | constant:v | marginal | oracle")->capture_default_str();
  evaluate->add_option("--class-threshold", ev.class_threshold, "Class threshold for upq")->capture_default_str();
  evaluate->add_option("--inst-threshold", ev.inst_threshold, "Instance threshold for upq")->capture_default_str();
  evaluate->add_flag("--stage-labels", ev.stage_labels, "Score h1 labels against h2 labels");

  DeriveArgs dv;
  auto* derive = app.add_subcommand("derive-difficulty", "Derive difficulty maps from two annotation stages");
  derive->add_option("--h1", dv.h1_dir, "Directory of stage-1 rasters");
  derive->add_option("--h2", dv.h2_dir, "Directory of stage-2 rasters (same file names)");
  derive->add_option("--manifest", dv.manifest, "Manifest with h1/h2 entries instead of directories");
  derive->add_option("-o,--out", dv.out_dir, "Output directory")->required();
  derive->add_option("--encoding", dv.encoding, "id_rgb | class1000 (directory mode)")
      ->check(CLI::IsMember({"id_rgb", "class1000"}))
      ->capture_default_str();
  derive->add_option("-j,--workers", dv.workers, "Worker threads");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  synth->add_option("-o,--out", sy.out_dir, "Output directory")->required();
  synth->add_option("-n,--scenes", sy.scenes, "Number of scenes")->capture_default_str();
  synth->add_option("--seed", sy.seed, "Seed of the first scene")->capture_default_str();
  synth->add_option("--encoding", sy.encoding, "id_rgb | class1000")
      ->check(CLI::IsMember({"id_rgb", "class1000"}))
      ->capture_default_str();
  synth->add_option("--width", sy.spec.width)->capture_default_str();
  synth->add_option("--height", sy.spec.height)->capture_default_str();
  synth->add_option("--stuff-regions", sy.spec.stuff_regions)->capture_default_str();
  synth->add_option("--max-instances", sy.spec.max_instances)->capture_default_str();
  synth->add_option("--jitter", sy.spec.boundary_jitter, "Boundary jitter in pixels")->capture_default_str();
  synth->add_option("--flip-rate", sy.spec.class_flip_rate)->capture_default_str();
  synth->add_option("--drop-rate", sy.spec.drop_rate)->capture_default_str();
  synth->add_option("--difficulty-rate", sy.spec.difficulty_rate)->capture_default_str();
  synth->add_option("--void-rate", sy.spec.void_rate)->capture_default_str();
  synth->add_option("--unknown-instance-rate", sy.spec.unknown_instance_rate)->capture_default_str();
  synth->add_option("--alignment", sy.spec.confidence_alignment, "Share of scores following difficulty")
      ->capture_default_str();
  synth->add_flag("--confine-errors", sy.spec.confine_errors, "Prediction errors only in difficult regions");
  synth->add_flag("--stages", sy.stages, "Also write stage-1 labels (h1)");
  synth->add_flag("--masks", sy.masks, "Also write mask-classification outputs");

  upq::selfcheck::Options sc;
  sc.workers = upq::default_workers();
  auto* selfcheck = app.add_subcommand("selfcheck", "Compare fast paths with the brute-force reference");
  selfcheck->add_option("-n,--scenes", sc.scenes)->capture_default_str();
  selfcheck->add_option("--seed", sc.seed)->capture_default_str();
  selfcheck->add_option("--min-dim", sc.min_dim)->capture_default_str();
  selfcheck->add_option("--max-dim", sc.max_dim)->capture_default_str();
  selfcheck->add_option("--sweep-every", sc.sweep_every, "Run sweep checks on every n-th scene")
      ->capture_default_str();
  selfcheck->add_option("-j,--workers", sc.workers);

  std::string diff_a, diff_b;
  double tolerance = 0.0;
  auto* report_diff = app.add_subcommand("report-diff", "Compare two report files");
  report_diff->add_option("a", diff_a)->required();
  report_diff->add_option("b", diff_b)->required();
  report_diff->add_option("--tolerance", tolerance, "Numeric tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (evaluate->parsed()) return run_evaluate(ev);
    if (derive->parsed()) return run_derive(dv);
    if (synth->parsed()) return run_synth(sy);
    if (selfcheck->parsed()) return run_selfcheck(sc);
    if (report_diff->parsed()) return run_report_diff(diff_a, diff_b, tolerance);
  } catch (const upq::Error& e) {
    std::cerr << "upqeval: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "upqeval: io error: " << e.what() << "\n";
    return kInputFailure;
  }
  return kUsage;
}
