#pragma once

#include <filesystem>

#include <json.hpp>

#include "cyclepref/reward/model.hpp"
#include "cyclepref/reward/train.hpp"

namespace cyclepref::reward {

inline constexpr const char* kCheckpointFormat = "cyclepref-reward-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  RewardModel model;
  TrainConfig train_config;
  // dataset_manifest_hash, metric / backward-model provenance, anything else.
  nlohmann::json metadata = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

// Writes <dir>/checkpoint.json; parameters round-trip exactly.
std::filesystem::path save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace cyclepref::reward
