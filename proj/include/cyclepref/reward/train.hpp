#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclepref/core/records.hpp"
#include "cyclepref/reward/model.hpp"

namespace cyclepref::reward {

using core::ComparisonPair;

enum class Objective { bradley_terry_i2t, bradley_terry_t2i, joint, mse_regression };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

// AdamW hyperparameters plus the objective.
struct TrainConfig {
  Objective objective = Objective::joint;
  double lambda = 1.0;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Desk scale: batch 64, lr 1e-3, 20 epochs.
  static TrainConfig desk(Objective o = Objective::joint);
  // Full-scale AdamW settings: batch 2048, 2 epochs; lr 3e-5 with weight decay
  // 1e-4 for the text-conditioned loss, lr 2e-5 without decay otherwise.
  static TrainConfig paper(Objective o);

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainData {
  std::vector<ComparisonPair> i2t_train;
  std::vector<ComparisonPair> t2i_train;
  std::vector<ComparisonPair> i2t_val;
  std::vector<ComparisonPair> t2i_val;
};

// Every mismatch between the objective and the supplied data.
std::vector<std::string> check_train_data(const TrainConfig& cfg, const TrainData& data);

struct StepLog {
  std::size_t step = 0;
  int epoch = 0;
  double loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  RewardModel best;  // highest validation accuracy seen (first on ties)
  RewardModel last;
  std::vector<StepLog> log;
  std::size_t best_step = 0;
  double best_val_accuracy = 0.0;
};

// Fraction of pairs with r(preferred) > r(rejected); equal rewards count 0.5.
double preference_accuracy(const RewardModel& model, const std::vector<ComparisonPair>& pairs);

// Reward for a pair's (preferred or rejected) candidate in image/text order.
double pair_reward(const RewardModel& model, const ComparisonPair& p, bool preferred);

// Deterministic given cfg.seed. Throws InvalidInput on mismatched data and
// TrainingDiverged when a loss turns non-finite.
TrainResult train(const RewardModel& init, const TrainData& data, const TrainConfig& cfg);

}  // namespace cyclepref::reward
