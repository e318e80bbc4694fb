#include "cyclepref/reward/checkpoint.hpp"

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/serialize.hpp"

namespace cyclepref::reward {

using nlohmann::json;

json checkpoint_to_json(const Checkpoint& ckpt) {
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"model_config", ckpt.model.config().to_json()},
              {"train_config", ckpt.train_config.to_json()},
              {"parameters", ckpt.model.flat_parameters()},
              {"metadata", ckpt.metadata}};
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat) throw InvalidInput("not a reward checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw InvalidInput("unsupported checkpoint version");
  RewardModel model(ModelConfig::from_json(j.at("model_config")));
  const auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != model.flat_parameters().size()) throw InvalidInput("checkpoint parameter count mismatch");
  model.set_flat_parameters(params);
  return Checkpoint{std::move(model), TrainConfig::from_json(j.at("train_config")), j.value("metadata", json::object())};
}

std::filesystem::path save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);
  auto path = dir / "checkpoint.json";
  core::write_json(path, checkpoint_to_json(ckpt));
  return path;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  auto path = std::filesystem::is_directory(dir) ? dir / "checkpoint.json" : dir;
  if (!std::filesystem::exists(path)) throw InvalidInput("no checkpoint at " + path.string());
  return checkpoint_from_json(core::read_json(path));
}

}  // namespace cyclepref::reward
