#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cyclepref/core/sample.hpp"

namespace cyclepref::core {

// One scored (condition, candidate) pair with full provenance.
struct CycleScoreRecord {
  Sample condition;
  Sample candidate;
  Direction direction = Direction::i2t;
  double score = 0.0;
  std::string forward_model_id;
  std::string backward_model_id;
  std::string similarity_metric_id;
  std::vector<std::int64_t> reconstruction_seed_list;
  int num_reconstructions = 1;
};

// Scorer metadata attached to a comparison pair. forward_model_id is the
// generator of the preferred candidate; rejected_forward_model_id of the other.
struct PairProvenance {
  std::string forward_model_id;
  std::string rejected_forward_model_id;
  std::string backward_model_id;
  std::string similarity_metric_id;
  std::vector<std::int64_t> reconstruction_seed_list;
  int num_reconstructions = 1;

  friend bool operator==(const PairProvenance&, const PairProvenance&) = default;
};

enum class Split { train, val, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ComparisonPair {
  Sample condition;
  Sample preferred;
  Sample rejected;
  Direction direction = Direction::i2t;
  double score_preferred = 0.0;
  double score_rejected = 0.0;
  double margin = 0.0;
  PairProvenance provenance;
  Split split = Split::train;

  friend bool operator==(const ComparisonPair&, const ComparisonPair&) = default;
};

// Every violated ComparisonPair invariant; empty means ok.
std::vector<std::string> validate_pair(const ComparisonPair& p);

// Margin equality tolerance used by validate_pair.
inline constexpr double kMarginTolerance = 1e-12;

struct FilterConfig {
  double tau_sim = 0.005;
  double tau_neg = 0.7;
  bool dedup = true;

  // tau_neg 0.7 for image-similarity (i2t) datasets, 0.4 for text-similarity (t2i).
  static FilterConfig defaults_for(Direction d);

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

struct DatasetStats {
  std::size_t raw_pairs = 0;
  std::size_t deduped = 0;
  std::size_t dropped_low_margin = 0;
  std::size_t dropped_low_positive = 0;
  std::size_t kept = 0;

  bool accounts() const { return deduped + dropped_low_margin + dropped_low_positive + kept == raw_pairs; }

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

struct PreferenceDataset {
  std::vector<ComparisonPair> pairs;
  Direction direction = Direction::i2t;
  std::optional<FilterConfig> filter_config;
  DatasetStats stats;

  friend bool operator==(const PreferenceDataset&, const PreferenceDataset&) = default;
};

}  // namespace cyclepref::core
