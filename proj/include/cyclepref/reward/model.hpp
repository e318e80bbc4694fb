#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclepref/core/sample.hpp"
#include "cyclepref/reward/mlp.hpp"

namespace cyclepref::reward {

using core::Sample;

// How encoder outputs are combined before the head. concat_product appends
// the elementwise product and needs equal encoder output widths.
enum class Fusion { concat, concat_product };

std::string_view to_string(Fusion f);
Fusion parse_fusion(std::string_view s);

struct ModelConfig {
  // Bit-grid featurizer: image -> K values in {-1, +1}; text -> 2K indicators
  // (index asserted as 1, index asserted as 0).
  int bits = 8;
  std::vector<int> image_encoder_widths{32, 32};
  std::vector<int> text_encoder_widths{32, 32};
  // Hidden widths of the head; a final width-1 layer is appended, so the
  // default head has 5 linear layers.
  std::vector<int> head_hidden_widths{64, 32, 16, 8};
  double freeze_fraction = 0.7;
  Fusion fusion = Fusion::concat;
  std::uint64_t init_seed = 0;

  int head_layers() const { return static_cast<int>(head_hidden_widths.size()) + 1; }
  // Frozen groups per encoder: floor(freeze_fraction * layers).
  int frozen_layers(std::size_t encoder_layers) const;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ForwardCache {
  Mlp::Cache image;
  Mlp::Cache text;
  Mlp::Cache head;
  MatrixXd image_out;
  MatrixXd text_out;
};

// Gradients aligned with RewardModel::groups().
using Gradients = std::vector<DenseGrad>;

// Scalar scorer r(image, text): two encoders, fusion, MLP head.
class RewardModel {
 public:
  explicit RewardModel(ModelConfig cfg);
  RewardModel(ModelConfig cfg, Mlp image_encoder, Mlp text_encoder, Mlp head);

  const ModelConfig& config() const { return cfg_; }

  // Throws InferenceError when a sample cannot be featurized.
  double reward(const Sample& image, const Sample& text) const;

  VectorXd image_features(const Sample& image) const;
  VectorXd text_features(const Sample& text) const;
  int image_feature_dim() const { return cfg_.bits; }
  int text_feature_dim() const { return 2 * cfg_.bits; }

  // Features are column batches (dim x B). Returns B rewards.
  VectorXd forward(const MatrixXd& image_feats, const MatrixXd& text_feats, ForwardCache* cache = nullptr) const;
  // Adds dL/dparams for upstream gradient d_rewards into `grads`.
  void backward(const ForwardCache& cache, const VectorXd& d_rewards, Gradients& grads) const;

  // Image encoder layers, then text encoder layers, then head layers.
  std::vector<Dense*> groups();
  std::vector<const Dense*> groups() const;
  Gradients zero_gradients() const;

  const Mlp& image_encoder() const { return image_encoder_; }
  const Mlp& text_encoder() const { return text_encoder_; }
  const Mlp& head() const { return head_; }

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  static std::vector<double> flatten(const Gradients& g);

 private:
  void apply_freeze();

  ModelConfig cfg_;
  Mlp image_encoder_;
  Mlp text_encoder_;
  Mlp head_;
};

}  // namespace cyclepref::reward
