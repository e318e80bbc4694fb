#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclepref/cyclescore/cyclescore.hpp"
#include "cyclepref/prefbuild/prefbuild.hpp"
#include "cyclepref/reward/model.hpp"
#include "cyclepref/reward/train.hpp"

namespace cyclepref::pipeline {

using nlohmann::json;

nlohmann::json mapping_spec_to_json(const mappings::MappingSpec& s);
mappings::MappingSpec mapping_spec_from_json(const json& j);
nlohmann::json scorer_to_json(const cyclescore::ScorerConfig& s);
cyclescore::ScorerConfig scorer_from_json(const json& j);

// Where condition samples come from. "random": seeded random images (i2t) or
// captions of random images at `coverage` (t2i). "file": JSONL of samples.
struct ConditionSource {
  std::string kind = "random";
  int count = 100;
  double coverage = 0.75;
  std::uint64_t seed = 1;
  std::string path;
};

struct DirectionConfig {
  bool enabled = false;
  ConditionSource conditions;
  std::vector<mappings::MappingSpec> forward;
  int seeds_per_spec = 1;
  cyclescore::ScorerConfig scorer;
  core::FilterConfig filter;
  bool apply_filter = true;
  std::size_t max_pairs_per_condition = 0;
};

// "bitgrid" runs the in-process toy world; "http" talks to adapter servers.
struct BackendConfig {
  std::string kind = "bitgrid";
  std::string mapping_url;
  std::string embedding_url;
  std::vector<std::string> embedding_metrics;
  int max_attempts = 3;
  int backoff_ms = 200;
};

// Toy-world evaluation: fresh held-out conditions with ground-truth alignment.
struct EvalConfig {
  bool enabled = true;
  int conditions = 100;
  std::uint64_t seed = 1001;
  int bon_pool = 20;
  int bon_trials = 200;
  // Backward mapping of the single-seed raw-cycle baseline (i2t direction).
  std::string baseline_backward;
};

struct PipelineConfig {
  std::string name = "toy";
  std::uint64_t global_seed = 7;
  std::filesystem::path output_root = "runs/toy";
  BackendConfig backend;
  int bits = 8;
  DirectionConfig i2t;
  DirectionConfig t2i;
  prefbuild::SplitRatios splits;
  std::uint64_t split_seed = 17;
  bool train_enabled = true;
  reward::ModelConfig model;
  reward::TrainConfig train;
  EvalConfig eval;
  std::size_t parallelism = 1;

  json to_json() const;
  static PipelineConfig from_json(const json& j);
  // to_json() without the operational fields (output_root, parallelism).
  json identity_json() const;
  // SHA-256 of identity_json(); equal for the same run in different roots.
  std::string hash() const;
};

// Every cross-field violation; empty means the config is usable.
std::vector<std::string> validate_config(const PipelineConfig& cfg);

std::vector<std::string> preset_names();
// "toy", "paper-scale-i2t", "paper-scale-t2i", "ablation-grid". The grid
// preset returns its base config; expand it with ablation_grid().
PipelineConfig preset(std::string_view name);
// 3 image metrics x 2 backward fills, each with its own output directory.
std::vector<PipelineConfig> ablation_grid(const PipelineConfig& base);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

// Backends and metrics for a config.
struct Runtime {
  std::shared_ptr<mappings::MappingBackend> backend;
  std::shared_ptr<similarity::MetricRegistry> metrics;
  core::MediaStore media;
};

Runtime make_runtime(const PipelineConfig& cfg);

struct RunResult {
  std::filesystem::path manifest_path;
  json manifest;
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  bool partial = false;
};

inline constexpr const char* kRunManifest = "run_manifest.json";

// Runs conditions -> pools -> scores -> prefs -> train -> eval under
// cfg.output_root. A stage is skipped when the manifest holds the same input
// hash and its outputs are intact. Throws InvalidInput for an invalid config
// or a held lock; stage errors are recorded in the manifest and rethrown.
RunResult run_pipeline(const PipelineConfig& cfg);

}  // namespace cyclepref::pipeline
