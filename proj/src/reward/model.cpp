#include "cyclepref/reward/model.hpp"

#include <cmath>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/mappings/bitgrid.hpp"

namespace cyclepref::reward {

using nlohmann::json;

std::string_view to_string(Fusion f) { return f == Fusion::concat ? "concat" : "concat_product"; }

Fusion parse_fusion(std::string_view s) {
  if (s == "concat") return Fusion::concat;
  if (s == "concat_product") return Fusion::concat_product;
  throw InvalidInput("unknown fusion '" + std::string(s) + "'");
}

int ModelConfig::frozen_layers(std::size_t encoder_layers) const {
  return static_cast<int>(std::floor(freeze_fraction * static_cast<double>(encoder_layers) + 1e-9));
}

void ModelConfig::validate() const {
  if (bits < 1) throw InvalidInput("model bits must be positive");
  if (image_encoder_widths.empty() || text_encoder_widths.empty()) throw InvalidInput("encoders need at least one layer");
  if (!(freeze_fraction >= 0.0 && freeze_fraction <= 1.0)) throw InvalidInput("freeze_fraction must lie in [0, 1]");
  if (fusion == Fusion::concat_product && image_encoder_widths.back() != text_encoder_widths.back()) {
    throw InvalidInput("concat_product fusion needs equal encoder output widths");
  }
}

json ModelConfig::to_json() const {
  return json{{"featurizer", {{"kind", "bitgrid"}, {"bits", bits}}},
              {"image_encoder_widths", image_encoder_widths},
              {"text_encoder_widths", text_encoder_widths},
              {"head_hidden_widths", head_hidden_widths},
              {"head_layers", head_layers()},
              {"freeze_fraction", freeze_fraction},
              {"fusion", to_string(fusion)},
              {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.bits = j.at("featurizer").at("bits").get<int>();
  c.image_encoder_widths = j.at("image_encoder_widths").get<std::vector<int>>();
  c.text_encoder_widths = j.at("text_encoder_widths").get<std::vector<int>>();
  c.head_hidden_widths = j.at("head_hidden_widths").get<std::vector<int>>();
  c.freeze_fraction = j.at("freeze_fraction").get<double>();
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

namespace {

int fused_width(const ModelConfig& c) {
  int w = c.image_encoder_widths.back() + c.text_encoder_widths.back();
  if (c.fusion == Fusion::concat_product) w += c.image_encoder_widths.back();
  return w;
}

std::vector<int> head_widths(const ModelConfig& c) {
  auto w = c.head_hidden_widths;
  w.push_back(1);
  return w;
}

}  // namespace

RewardModel::RewardModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  core::Rng rng(cfg_.init_seed);
  image_encoder_ = Mlp("image_encoder", image_feature_dim(), cfg_.image_encoder_widths, Activation::tanh, Activation::tanh, rng);
  text_encoder_ = Mlp("text_encoder", text_feature_dim(), cfg_.text_encoder_widths, Activation::tanh, Activation::tanh, rng);
  head_ = Mlp("head", fused_width(cfg_), head_widths(cfg_), Activation::tanh, Activation::identity, rng);
  apply_freeze();
}

RewardModel::RewardModel(ModelConfig cfg, Mlp image_encoder, Mlp text_encoder, Mlp head)
    : cfg_(std::move(cfg)), image_encoder_(std::move(image_encoder)), text_encoder_(std::move(text_encoder)), head_(std::move(head)) {
  cfg_.validate();
  if (image_encoder_.input_dim() != image_feature_dim() || text_encoder_.input_dim() != text_feature_dim() ||
      head_.input_dim() != fused_width(cfg_) || head_.output_dim() != 1) {
    throw InvalidInput("reward model layers do not match the architecture config");
  }
  apply_freeze();
}

void RewardModel::apply_freeze() {
  for (auto* enc : {&image_encoder_, &text_encoder_}) {
    auto& layers = enc->layers();
    const int frozen = cfg_.frozen_layers(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].frozen = static_cast<int>(l) < frozen;
  }
  for (auto& d : head_.layers()) d.frozen = false;
}

VectorXd RewardModel::image_features(const Sample& image) const {
  try {
    auto bits = mappings::image_bits(image);
    if (static_cast<int>(bits.size()) != cfg_.bits) throw InvalidInput("image has the wrong number of bits");
    VectorXd f(cfg_.bits);
    for (int i = 0; i < cfg_.bits; ++i) f[i] = bits[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    return f;
  } catch (const InvalidInput& e) {
    throw InferenceError(std::string("image encoder failed: ") + e.what());
  }
}

VectorXd RewardModel::text_features(const Sample& text) const {
  try {
    VectorXd f = VectorXd::Zero(2 * cfg_.bits);
    for (const auto& a : mappings::text_assertions(text, cfg_.bits)) f[a.bit ? a.index : cfg_.bits + a.index] = 1.0;
    return f;
  } catch (const InvalidInput& e) {
    throw InferenceError(std::string("text encoder failed: ") + e.what());
  }
}

double RewardModel::reward(const Sample& image, const Sample& text) const {
  if (!image.is_image() || !text.is_text()) throw InvalidInput("reward takes (image, text)");
  MatrixXd xi = image_features(image);
  MatrixXd xt = text_features(text);
  double r = forward(xi, xt)[0];
  if (!std::isfinite(r)) throw InferenceError("reward model produced a non-finite value");
  return r;
}

VectorXd RewardModel::forward(const MatrixXd& image_feats, const MatrixXd& text_feats, ForwardCache* cache) const {
  if (image_feats.cols() != text_feats.cols()) throw InvalidInput("image and text batches differ in size");
  MatrixXd hi = image_encoder_.forward(image_feats, cache ? &cache->image : nullptr);
  MatrixXd ht = text_encoder_.forward(text_feats, cache ? &cache->text : nullptr);
  const auto wi = hi.rows(), wt = ht.rows();
  MatrixXd fused(head_.input_dim(), hi.cols());
  fused.topRows(wi) = hi;
  fused.middleRows(wi, wt) = ht;
  if (cfg_.fusion == Fusion::concat_product) fused.bottomRows(wi) = (hi.array() * ht.array()).matrix();
  VectorXd r = head_.forward(fused, cache ? &cache->head : nullptr).row(0).transpose();
  if (cache) {
    cache->image_out = std::move(hi);
    cache->text_out = std::move(ht);
  }
  return r;
}

void RewardModel::backward(const ForwardCache& cache, const VectorXd& d_rewards, Gradients& grads) const {
  const auto ni = image_encoder_.layers().size();
  const auto nt = text_encoder_.layers().size();
  if (grads.size() != ni + nt + head_.layers().size()) grads = zero_gradients();

  std::vector<DenseGrad> gi(grads.begin(), grads.begin() + static_cast<std::ptrdiff_t>(ni));
  std::vector<DenseGrad> gt(grads.begin() + static_cast<std::ptrdiff_t>(ni), grads.begin() + static_cast<std::ptrdiff_t>(ni + nt));
  std::vector<DenseGrad> gh(grads.begin() + static_cast<std::ptrdiff_t>(ni + nt), grads.end());

  MatrixXd d_fused = head_.backward(cache.head, d_rewards.transpose(), gh);
  const auto wi = cache.image_out.rows(), wt = cache.text_out.rows();
  MatrixXd d_hi = d_fused.topRows(wi);
  MatrixXd d_ht = d_fused.middleRows(wi, wt);
  if (cfg_.fusion == Fusion::concat_product) {
    MatrixXd d_prod = d_fused.bottomRows(wi);
    d_hi += (d_prod.array() * cache.text_out.array()).matrix();
    d_ht += (d_prod.array() * cache.image_out.array()).matrix();
  }
  image_encoder_.backward(cache.image, d_hi, gi);
  text_encoder_.backward(cache.text, d_ht, gt);

  std::size_t k = 0;
  for (auto* part : {&gi, &gt, &gh}) {
    for (auto& g : *part) grads[k++] = std::move(g);
  }
}

std::vector<Dense*> RewardModel::groups() {
  std::vector<Dense*> out;
  for (auto* m : {&image_encoder_, &text_encoder_, &head_}) {
    for (auto& d : m->layers()) out.push_back(&d);
  }
  return out;
}

std::vector<const Dense*> RewardModel::groups() const {
  std::vector<const Dense*> out;
  for (const auto* m : {&image_encoder_, &text_encoder_, &head_}) {
    for (const auto& d : m->layers()) out.push_back(&d);
  }
  return out;
}

Gradients RewardModel::zero_gradients() const {
  Gradients g;
  for (const auto* d : groups()) g.push_back({MatrixXd::Zero(d->weight.rows(), d->weight.cols()), VectorXd::Zero(d->bias.size())});
  return g;
}

std::vector<double> RewardModel::flat_parameters() const {
  std::vector<double> out;
  for (const auto* d : groups()) {
    out.insert(out.end(), d->weight.data(), d->weight.data() + d->weight.size());
    out.insert(out.end(), d->bias.data(), d->bias.data() + d->bias.size());
  }
  return out;
}

void RewardModel::set_flat_parameters(std::span<const double> values) {
  std::size_t k = 0;
  for (auto* d : groups()) {
    if (k + d->size() > values.size()) throw InvalidInput("flat parameter vector is too short");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k), d->weight.size(), d->weight.data());
    k += static_cast<std::size_t>(d->weight.size());
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(k), d->bias.size(), d->bias.data());
    k += static_cast<std::size_t>(d->bias.size());
  }
  if (k != values.size()) throw InvalidInput("flat parameter vector is too long");
}

std::vector<double> RewardModel::flatten(const Gradients& g) {
  std::vector<double> out;
  for (const auto& d : g) {
    out.insert(out.end(), d.weight.data(), d.weight.data() + d.weight.size());
    out.insert(out.end(), d.bias.data(), d.bias.data() + d.bias.size());
  }
  return out;
}

}  // namespace cyclepref::reward
