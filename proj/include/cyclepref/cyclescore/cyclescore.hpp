#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cyclepref/core/records.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/mappings/mapping.hpp"
#include "cyclepref/similarity/registry.hpp"

namespace cyclepref::cyclescore {

using core::CycleScoreRecord;
using core::Direction;
using core::Sample;

// direction is the direction of the candidates being scored. The backward
// mapping runs the other way: i2t scoring reconstructs the condition image
// from the candidate text with a text-to-image mapping, and vice versa.
struct ScorerConfig {
  Direction direction = Direction::i2t;
  mappings::MappingSpec backward;
  std::string metric_id;
  int num_reconstructions = 1;
  std::int64_t seed_base = 0;

  // seed_base, seed_base+1, ..., seed_base+N-1
  std::vector<std::int64_t> reconstruction_seeds() const;

  // Throws InvalidInput when the config is inconsistent with itself or with
  // the registry (unknown metric, wrong metric modality, N < 1, same-direction backward).
  void validate(const similarity::MetricRegistry& metrics) const;
};

struct ScoringContext {
  const mappings::MappingBackend& backend;
  const similarity::MetricRegistry& metrics;
  std::size_t parallelism = 1;
};

// Mean over N seeded reconstructions of sim(condition, backward(candidate)).
// Any failed reconstruction aborts with ScoringError listing the failed seeds.
CycleScoreRecord cycle_score(const ScoringContext& ctx, const ScorerConfig& cfg, const Sample& condition, const Sample& candidate,
                             const std::string& forward_model_id = "");

// Same computation under the multi-reconstruction name; N = 1 reduces to cycle_score.
CycleScoreRecord mean_cycle_score(const ScoringContext& ctx, const ScorerConfig& cfg, const Sample& condition,
                                  const Sample& candidate, const std::string& forward_model_id = "");

// Rebuilds the scorer from a record's provenance and scores again. For
// deterministic backends the result is bit-identical to record.score.
CycleScoreRecord rescore(const ScoringContext& ctx, const CycleScoreRecord& record,
                         const mappings::Decoding& decoding = {});

// Log-domain quantities of the shared joint p(x, y) = prior(x) p_F(y | x) in an
// enumerable world. p(x | y) is the posterior of that joint.
struct JointScore {
  double log_p_x_given_y = 0.0;
  double log_p_y_given_x = 0.0;
  double log_p_xy = 0.0;
  double log_p_x = 0.0;
  double log_p_y = 0.0;
  double pmi = 0.0;
  double joint_score = 0.0;  // log p(x|y) + log p(y|x)
};

// Uniform prior over all 2^K images when `prior` is empty; otherwise a table
// indexed by the image read as a little-endian integer (bit 0 first).
// Throws CapacityError for K > 12 and UndefinedLog when a factor is zero.
JointScore joint_distributional_score(const mappings::BitGridWorld& world, const Sample& image, const Sample& text,
                                      const std::vector<double>& prior = {});

}  // namespace cyclepref::cyclescore
