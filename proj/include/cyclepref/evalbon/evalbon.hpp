#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cyclepref/cyclescore/cyclescore.hpp"
#include "cyclepref/reward/model.hpp"

namespace cyclepref::evalbon {

using core::Direction;
using core::Sample;

// Scores (condition, candidate) pairs for one direction.
class Verifier {
 public:
  enum class Kind { reward_model, raw_cycle, function };
  using ScoreFn = std::function<double(const Sample& condition, const Sample& candidate)>;

  static Verifier reward_model(std::shared_ptr<const reward::RewardModel> model, Direction direction);
  // The backend and registry must outlive the verifier.
  static Verifier raw_cycle(cyclescore::ScorerConfig cfg, const mappings::MappingBackend& backend,
                            const similarity::MetricRegistry& metrics);
  static Verifier function(ScoreFn fn, Direction direction);

  Kind kind() const { return kind_; }
  Direction direction() const { return direction_; }

  // Throws InvalidInput on modality mismatch, ScoringError on backend failure.
  double score(const Sample& condition, const Sample& candidate) const;
  std::vector<double> score_pool(const Sample& condition, const std::vector<Sample>& pool, std::size_t parallelism = 1) const;

 private:
  Verifier(Kind kind, Direction direction, ScoreFn fn) : kind_(kind), direction_(direction), fn_(std::move(fn)) {}

  Kind kind_;
  Direction direction_;
  ScoreFn fn_;
};

// Indices sorted by descending score; equal scores order by ascending content
// hash, then by position.
std::vector<std::size_t> rank_by_score(const std::vector<Sample>& pool, const std::vector<double>& scores);

struct BestOfN {
  std::size_t winner = 0;
  Sample winner_sample;
  std::vector<double> scores;        // aligned with the pool
  std::vector<std::size_t> ranking;  // best first
};

BestOfN best_of_n(const Verifier& v, const Sample& condition, const std::vector<Sample>& pool, std::size_t parallelism = 1);
// Selection from precomputed scores.
BestOfN best_of_n_from_scores(const std::vector<Sample>& pool, const std::vector<double>& scores);

// Over unordered pairs with distinct reference scores: 1 when the predicted
// order agrees, 0.5 for a predicted tie, 0 otherwise. Throws UndefinedMetric
// for fewer than 2 items or when every reference pair is tied, InvalidInput
// when the key sets differ.
double pairwise_accuracy(const std::map<std::string, double>& predicted, const std::map<std::string, double>& reference);

enum class Choice { a, b };

struct LabeledPair {
  Sample condition;
  Sample a;
  Sample b;
  Choice choice;
};

// Fraction of pairs where the verifier prefers the labeled candidate; verifier ties count 0.5.
double agreement_rate(const Verifier& v, const std::vector<LabeledPair>& pairs, std::size_t parallelism = 1);

struct TrendPoint {
  double factor = 0.0;
  double score = 0.0;
};

struct TrendReport {
  double pearson_r = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<TrendPoint> table;
};

// Pearson r and least-squares score = slope * factor + intercept. Throws
// UndefinedMetric for fewer than 3 points or zero variance in either column.
TrendReport trend_report(const std::vector<TrendPoint>& points);

struct TrendItem {
  Sample condition;
  Sample candidate;
  double factor = 0.0;
};

TrendReport trend_report(const Verifier& v, const std::vector<TrendItem>& items, std::size_t parallelism = 1);

}  // namespace cyclepref::evalbon
