#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclepref/core/records.hpp"
#include "cyclepref/core/serialize.hpp"
#include "cyclepref/cyclescore/cyclescore.hpp"
#include "cyclepref/mappings/mapping.hpp"

namespace cyclepref::prefbuild {

using core::ComparisonPair;
using core::CycleScoreRecord;
using core::DatasetStats;
using core::Direction;
using core::FilterConfig;
using core::PreferenceDataset;
using core::Sample;
using core::Split;

// Every pair of records with strictly different scores, higher score preferred.
// Ties yield nothing. Ordered by preferred score (descending), preferred hash,
// rejected score (descending), rejected hash. Fewer than two records -> empty.
// Throws InvalidInput when records disagree on condition or direction.
// max_pairs keeps only the first max_pairs pairs of that order (0 = all).
std::vector<ComparisonPair> build_pairs(const Sample& condition, const std::vector<CycleScoreRecord>& scored,
                                        std::size_t max_pairs = 0);

// Applies dedup -> margin -> minimum-positive, in that order, keeping the
// relative order of survivors. Every input pair is counted exactly once.
PreferenceDataset filter_pairs(const std::vector<ComparisonPair>& pairs, const FilterConfig& cfg, Direction direction);

struct SplitRatios {
  double train = 0.9;
  double val = 0.05;
  double test = 0.05;

  void validate() const;
  std::array<double, 3> as_array() const { return {train, val, test}; }
};

// Deterministic split from the condition hash and split seed.
Split assign_split(const core::Digest& condition_hash, std::uint64_t split_seed, const SplitRatios& ratios);

struct ConditionPool {
  Sample condition;
  std::vector<mappings::Candidate> candidates;
};

struct SkippedCondition {
  std::string condition_hash;
  std::string reason;
};

struct CandidateFailure {
  std::string condition_hash;
  std::string candidate_hash;
  std::vector<std::int64_t> failed_seeds;
  std::string message;
};

struct AssembleOptions {
  FilterConfig filter;
  SplitRatios splits;
  std::uint64_t split_seed = 17;
  std::size_t max_pairs_per_condition = 0;  // 0 = all pairs
  bool apply_filter = true;
};

struct AssemblyResult {
  PreferenceDataset dataset;
  std::vector<SkippedCondition> skipped;
  std::vector<CandidateFailure> failures;
  std::size_t num_conditions = 0;
};

// Scores each pool, builds and filters pairs, assigns splits. Pairs are merged
// in ascending condition-hash order.
AssemblyResult assemble_dataset(const cyclescore::ScoringContext& ctx, const std::vector<ConditionPool>& pools,
                                const cyclescore::ScorerConfig& scorer, const AssembleOptions& opts);

// Same pipeline from already-scored records (grouped by condition hash).
AssemblyResult assemble_from_scores(const std::vector<CycleScoreRecord>& records, Direction direction,
                                    const AssembleOptions& opts);

// pairs.jsonl + manifest.json under `dir`. Extra manifest fields are merged in.
struct DatasetFiles {
  std::filesystem::path pairs;
  std::filesystem::path manifest;
};

DatasetFiles write_dataset(const std::filesystem::path& dir, const AssemblyResult& result, const AssembleOptions& opts,
                           const nlohmann::json& extra_manifest = nlohmann::json::object());
PreferenceDataset read_dataset(const std::filesystem::path& dir, const core::MediaStore& media);
nlohmann::json read_manifest(const std::filesystem::path& dir);

std::vector<ComparisonPair> pairs_in_split(const PreferenceDataset& d, Split s);

enum class DpoFlavor { vl_instruct, t2i_pairs };

std::string_view to_string(DpoFlavor f);
DpoFlavor parse_dpo_flavor(std::string_view s);

// vl_instruct rows: {image, instruction, chosen, rejected}
// t2i_pairs rows:   {caption, preferred, rejected}
// Throws InvalidInput when the dataset direction does not fit the flavor.
std::vector<nlohmann::json> export_dpo(const PreferenceDataset& dataset, DpoFlavor flavor,
                                       const std::string& instruction = mappings::kPromptLlava);

struct HashTriple {
  core::Digest condition;
  core::Digest preferred;
  core::Digest rejected;
  friend auto operator<=>(const HashTriple&, const HashTriple&) = default;
};

std::vector<HashTriple> import_dpo(const std::vector<nlohmann::json>& rows, DpoFlavor flavor, const core::MediaStore& media);

}  // namespace cyclepref::prefbuild
