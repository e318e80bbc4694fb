#include <cmath>
#include <fstream>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/hash.hpp"
#include "cyclepref/core/serialize.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/mappings/http_adapter.hpp"
#include "cyclepref/pipeline/pipeline.hpp"
#include "cyclepref/similarity/embedding.hpp"

namespace cyclepref::pipeline {

using core::Direction;
using mappings::BitGridWorld;
using mappings::FillRule;
using mappings::MappingSpec;

json mapping_spec_to_json(const MappingSpec& s) {
  return json{{"model_id", s.model_id},
              {"direction", core::to_string(s.direction)},
              {"seed", s.decoding.seed},
              {"max_tokens", s.decoding.max_tokens},
              {"temperature", s.decoding.temperature},
              {"top_p", s.decoding.top_p},
              {"prompt_template", s.prompt_template}};
}

MappingSpec mapping_spec_from_json(const json& j) {
  MappingSpec s;
  s.model_id = j.at("model_id").get<std::string>();
  s.direction = core::parse_direction(j.at("direction").get<std::string>());
  s.decoding.seed = j.value("seed", std::int64_t{0});
  s.decoding.max_tokens = j.value("max_tokens", mappings::kDefaultMaxTokens);
  s.decoding.temperature = j.value("temperature", 0.0);
  s.decoding.top_p = j.value("top_p", 1.0);
  s.prompt_template = j.value("prompt_template", std::string(mappings::kPromptLlava));
  return s;
}

json scorer_to_json(const cyclescore::ScorerConfig& s) {
  return json{{"direction", core::to_string(s.direction)},
              {"backward", mapping_spec_to_json(s.backward)},
              {"metric_id", s.metric_id},
              {"num_reconstructions", s.num_reconstructions},
              {"seed_base", s.seed_base}};
}

cyclescore::ScorerConfig scorer_from_json(const json& j) {
  cyclescore::ScorerConfig s;
  s.direction = core::parse_direction(j.at("direction").get<std::string>());
  s.backward = mapping_spec_from_json(j.at("backward"));
  s.metric_id = j.at("metric_id").get<std::string>();
  s.num_reconstructions = j.value("num_reconstructions", 1);
  s.seed_base = j.value("seed_base", std::int64_t{0});
  return s;
}

namespace {

json direction_to_json(const DirectionConfig& d) {
  json forward = json::array();
  for (const auto& s : d.forward) forward.push_back(mapping_spec_to_json(s));
  return json{{"enabled", d.enabled},
              {"conditions",
               {{"kind", d.conditions.kind},
                {"count", d.conditions.count},
                {"coverage", d.conditions.coverage},
                {"seed", d.conditions.seed},
                {"path", d.conditions.path}}},
              {"forward", forward},
              {"seeds_per_spec", d.seeds_per_spec},
              {"scorer", scorer_to_json(d.scorer)},
              {"filter", core::filter_to_json(d.filter)},
              {"apply_filter", d.apply_filter},
              {"max_pairs_per_condition", d.max_pairs_per_condition}};
}

DirectionConfig direction_from_json(const json& j, Direction dir) {
  DirectionConfig d;
  d.filter = core::FilterConfig::defaults_for(dir);
  d.scorer.direction = dir;
  if (j.is_null()) return d;
  d.enabled = j.value("enabled", false);
  if (j.contains("conditions")) {
    const auto& c = j.at("conditions");
    d.conditions.kind = c.value("kind", d.conditions.kind);
    d.conditions.count = c.value("count", d.conditions.count);
    d.conditions.coverage = c.value("coverage", d.conditions.coverage);
    d.conditions.seed = c.value("seed", d.conditions.seed);
    d.conditions.path = c.value("path", d.conditions.path);
  }
  if (j.contains("forward")) {
    for (const auto& s : j.at("forward")) d.forward.push_back(mapping_spec_from_json(s));
  }
  d.seeds_per_spec = j.value("seeds_per_spec", 1);
  if (j.contains("scorer")) d.scorer = scorer_from_json(j.at("scorer"));
  if (j.contains("filter")) d.filter = core::filter_from_json(j.at("filter"));
  d.apply_filter = j.value("apply_filter", true);
  d.max_pairs_per_condition = j.value("max_pairs_per_condition", std::size_t{0});
  return d;
}

MappingSpec bitgrid_spec(const BitGridWorld& w, Direction d) {
  MappingSpec s;
  s.model_id = w.model_id();
  s.direction = d;
  return s;
}

MappingSpec named_spec(const std::string& id, Direction d, const char* prompt = mappings::kPromptLlava) {
  MappingSpec s;
  s.model_id = id;
  s.direction = d;
  s.prompt_template = prompt;
  return s;
}

PipelineConfig toy_preset() {
  PipelineConfig c;
  c.name = "toy";
  c.output_root = "runs/toy";
  c.bits = 10;
  c.splits = {0.8, 0.1, 0.1};

  const double coverages[] = {1.0, 0.75, 0.5, 0.25, 0.1};

  c.i2t.enabled = true;
  c.i2t.conditions = {"random", 200, 1.0, 11, ""};
  for (double rho : coverages) c.i2t.forward.push_back(bitgrid_spec({c.bits, rho, 0.0, FillRule::zeros}, Direction::i2t));
  c.i2t.seeds_per_spec = 2;
  c.i2t.scorer.direction = Direction::i2t;
  c.i2t.scorer.backward = bitgrid_spec({c.bits, 1.0, 0.0, FillRule::seeded_uniform}, Direction::t2i);
  c.i2t.scorer.metric_id = similarity::kBitgridHammingSim;
  c.i2t.scorer.num_reconstructions = 4;
  c.i2t.scorer.seed_base = 1000;
  c.i2t.filter = core::FilterConfig::defaults_for(Direction::i2t);

  c.t2i.enabled = true;
  c.t2i.conditions = {"random", 200, 0.75, 12, ""};
  for (double rho : coverages) {
    c.t2i.forward.push_back(bitgrid_spec({c.bits, rho, 0.0, FillRule::seeded_uniform}, Direction::t2i));
  }
  c.t2i.seeds_per_spec = 2;
  c.t2i.scorer.direction = Direction::t2i;
  c.t2i.scorer.backward = bitgrid_spec({c.bits, 1.0, 0.0, FillRule::zeros}, Direction::i2t);
  c.t2i.scorer.metric_id = similarity::kBitgridJaccard;
  c.t2i.scorer.num_reconstructions = 1;
  c.t2i.scorer.seed_base = 2000;
  c.t2i.filter = core::FilterConfig::defaults_for(Direction::t2i);

  c.model.bits = c.bits;
  c.model.fusion = reward::Fusion::concat_product;
  c.model.init_seed = 3;
  c.train = reward::TrainConfig::desk(reward::Objective::joint);
  c.train.seed = 5;
  c.eval.baseline_backward = BitGridWorld{c.bits, 1.0, 0.0, FillRule::seeded_uniform}.model_id();
  return c;
}

PipelineConfig paper_i2t_preset() {
  PipelineConfig c;
  c.name = "paper-scale-i2t";
  c.output_root = "runs/paper-scale-i2t";
  c.backend = {"http", "http://127.0.0.1:8088", "http://127.0.0.1:8089", {"dreamsim:image", "sbert:text"}, 3, 200};
  c.i2t.enabled = true;
  c.i2t.conditions = {"file", 0, 1.0, 1, "data/conditions_i2t.jsonl"};
  c.i2t.forward = {named_spec("blip2-t5-xxl", Direction::i2t, mappings::kPromptBlip2),
                   named_spec("llava-1.5-7b", Direction::i2t),
                   named_spec("llava-1.5-13b", Direction::i2t),
                   named_spec("llava-1.6-7b", Direction::i2t),
                   named_spec("llava-1.6-34b", Direction::i2t),
                   named_spec("llava-onevision-0.5b", Direction::i2t),
                   named_spec("llava-onevision-7b", Direction::i2t),
                   named_spec("internvl2-2b", Direction::i2t, mappings::kPromptInternVl2),
                   named_spec("internvl2-8b", Direction::i2t, mappings::kPromptInternVl2),
                   named_spec("internvl2-26b", Direction::i2t, mappings::kPromptInternVl2),
                   named_spec("internvl2-40b", Direction::i2t, mappings::kPromptInternVl2)};
  c.i2t.seeds_per_spec = 1;
  c.i2t.scorer.direction = Direction::i2t;
  c.i2t.scorer.backward = named_spec(mappings::kDefaultTextToImageBackward, Direction::t2i);
  c.i2t.scorer.metric_id = "dreamsim";
  c.i2t.filter = core::FilterConfig::defaults_for(Direction::i2t);
  c.train_enabled = false;
  c.model = reward::ModelConfig{};
  c.train = reward::TrainConfig::paper(reward::Objective::bradley_terry_i2t);
  c.eval.enabled = false;
  c.parallelism = 8;
  return c;
}

PipelineConfig paper_t2i_preset() {
  PipelineConfig c = paper_i2t_preset();
  c.name = "paper-scale-t2i";
  c.output_root = "runs/paper-scale-t2i";
  c.i2t = DirectionConfig{};
  c.i2t.filter = core::FilterConfig::defaults_for(Direction::i2t);
  c.t2i.enabled = true;
  c.t2i.conditions = {"file", 0, 1.0, 1, "data/conditions_t2i.jsonl"};
  c.t2i.forward = {named_spec("stable-diffusion-1.5", Direction::t2i), named_spec("stable-diffusion-xl", Direction::t2i),
                   named_spec("stable-diffusion-3", Direction::t2i), named_spec("flux.1-schnell", Direction::t2i)};
  c.t2i.seeds_per_spec = 3;
  c.t2i.scorer.direction = Direction::t2i;
  c.t2i.scorer.backward = named_spec(mappings::kDefaultImageToTextBackward, Direction::i2t);
  c.t2i.scorer.metric_id = "sbert";
  c.t2i.filter = core::FilterConfig::defaults_for(Direction::t2i);
  c.train = reward::TrainConfig::paper(reward::Objective::bradley_terry_t2i);
  return c;
}

PipelineConfig ablation_base() {
  PipelineConfig c = toy_preset();
  c.name = "ablation-grid";
  c.output_root = "runs/ablation-grid";
  c.t2i.enabled = false;
  c.i2t.conditions.count = 80;
  c.train = reward::TrainConfig::desk(reward::Objective::bradley_terry_i2t);
  c.train.epochs = 5;
  c.train.seed = 5;
  c.eval.conditions = 40;
  c.eval.bon_trials = 40;
  return c;
}

bool fail(std::vector<std::string>& v, bool bad, std::string msg) {
  if (bad) v.push_back(std::move(msg));
  return bad;
}

void check_direction(std::vector<std::string>& v, const PipelineConfig& cfg, const DirectionConfig& d, Direction dir,
                     const similarity::MetricRegistry* metrics) {
  const std::string tag = std::string(core::to_string(dir)) + ": ";
  fail(v, d.forward.empty(), tag + "no forward mapping specs");
  for (const auto& s : d.forward) {
    fail(v, s.direction != dir, tag + "forward spec '" + s.model_id + "' has the wrong direction");
    fail(v, s.model_id.empty(), tag + "forward spec without model id");
  }
  fail(v, d.seeds_per_spec < 1, tag + "seeds_per_spec must be >= 1");
  if (d.conditions.kind == "random") {
    fail(v, d.conditions.count < 1, tag + "condition count must be >= 1");
    fail(v, !(d.conditions.coverage > 0.0 && d.conditions.coverage <= 1.0), tag + "condition coverage must lie in (0, 1]");
    fail(v, cfg.backend.kind != "bitgrid", tag + "random conditions need the bitgrid backend");
  } else if (d.conditions.kind == "file") {
    fail(v, d.conditions.path.empty(), tag + "condition file path is empty");
  } else {
    v.push_back(tag + "unknown condition source '" + d.conditions.kind + "'");
  }
  fail(v, d.scorer.direction != dir, tag + "scorer direction differs from the dataset direction");
  fail(v, d.scorer.backward.direction != core::opposite(dir), tag + "backward mapping must run opposite to the candidates");
  fail(v, d.scorer.num_reconstructions < 1, tag + "num_reconstructions must be >= 1");
  if (metrics != nullptr) {
    if (!metrics->contains(d.scorer.metric_id)) {
      v.push_back(tag + "unknown similarity metric '" + d.scorer.metric_id + "'");
    } else {
      fail(v, metrics->info(d.scorer.metric_id).modality != core::condition_modality(dir),
           tag + "metric modality must match the condition modality");
    }
  }
  fail(v, !(d.filter.tau_sim >= 0.0) || !std::isfinite(d.filter.tau_sim), tag + "tau_sim must be finite and >= 0");
  fail(v, !std::isfinite(d.filter.tau_neg), tag + "tau_neg must be finite");
  if (cfg.backend.kind == "bitgrid") {
    std::vector<std::string> ids{d.scorer.backward.model_id};
    for (const auto& s : d.forward) ids.push_back(s.model_id);
    for (const auto& id : ids) {
      try {
        auto w = BitGridWorld::from_model_id(id);
        fail(v, w.bits != cfg.bits, tag + "model '" + id + "' disagrees with the world bit count");
      } catch (const Error&) {
        v.push_back(tag + "'" + id + "' is not a bitgrid model id");
      }
    }
  }
}

}  // namespace

json PipelineConfig::to_json() const {
  return json{{"schema_version", core::kSchemaVersion},
              {"name", name},
              {"global_seed", global_seed},
              {"output_root", output_root.generic_string()},
              {"backend",
               {{"kind", backend.kind},
                {"mapping_url", backend.mapping_url},
                {"embedding_url", backend.embedding_url},
                {"embedding_metrics", backend.embedding_metrics},
                {"max_attempts", backend.max_attempts},
                {"backoff_ms", backend.backoff_ms}}},
              {"bits", bits},
              {"i2t", direction_to_json(i2t)},
              {"t2i", direction_to_json(t2i)},
              {"splits", {{"train", splits.train}, {"val", splits.val}, {"test", splits.test}}},
              {"split_seed", split_seed},
              {"train_enabled", train_enabled},
              {"model", model.to_json()},
              {"train", train.to_json()},
              {"eval",
               {{"enabled", eval.enabled},
                {"conditions", eval.conditions},
                {"seed", eval.seed},
                {"bon_pool", eval.bon_pool},
                {"bon_trials", eval.bon_trials},
                {"baseline_backward", eval.baseline_backward}}},
              {"parallelism", parallelism}};
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  c.name = j.value("name", c.name);
  c.global_seed = j.value("global_seed", c.global_seed);
  c.output_root = j.value("output_root", c.output_root.string());
  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    c.backend.kind = b.value("kind", c.backend.kind);
    c.backend.mapping_url = b.value("mapping_url", std::string{});
    c.backend.embedding_url = b.value("embedding_url", std::string{});
    c.backend.embedding_metrics = b.value("embedding_metrics", std::vector<std::string>{});
    c.backend.max_attempts = b.value("max_attempts", c.backend.max_attempts);
    c.backend.backoff_ms = b.value("backoff_ms", c.backend.backoff_ms);
  }
  c.bits = j.value("bits", c.bits);
  c.i2t = direction_from_json(j.value("i2t", json()), Direction::i2t);
  c.t2i = direction_from_json(j.value("t2i", json()), Direction::t2i);
  if (j.contains("splits")) {
    const auto& s = j.at("splits");
    c.splits = {s.value("train", 0.9), s.value("val", 0.05), s.value("test", 0.05)};
  }
  c.split_seed = j.value("split_seed", c.split_seed);
  c.train_enabled = j.value("train_enabled", c.train_enabled);
  if (j.contains("model")) c.model = reward::ModelConfig::from_json(j.at("model"));
  if (j.contains("train")) c.train = reward::TrainConfig::from_json(j.at("train"));
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    c.eval.enabled = e.value("enabled", c.eval.enabled);
    c.eval.conditions = e.value("conditions", c.eval.conditions);
    c.eval.seed = e.value("seed", c.eval.seed);
    c.eval.bon_pool = e.value("bon_pool", c.eval.bon_pool);
    c.eval.bon_trials = e.value("bon_trials", c.eval.bon_trials);
    c.eval.baseline_backward = e.value("baseline_backward", std::string{});
  }
  c.parallelism = j.value("parallelism", c.parallelism);
  return c;
}

json PipelineConfig::identity_json() const {
  auto j = to_json();
  j.erase("output_root");
  j.erase("parallelism");
  return j;
}

std::string PipelineConfig::hash() const { return core::canonical_hash(identity_json().dump()).hex(); }

std::vector<std::string> validate_config(const PipelineConfig& cfg) {
  std::vector<std::string> v;
  fail(v, cfg.name.empty(), "name is empty");
  fail(v, cfg.output_root.empty(), "output_root is empty");
  fail(v, cfg.parallelism < 1, "parallelism must be >= 1");
  fail(v, cfg.bits < 1 || cfg.bits > 64, "bits must lie in [1, 64]");

  std::unique_ptr<similarity::MetricRegistry> metrics;
  if (cfg.backend.kind == "bitgrid") {
    metrics = std::make_unique<similarity::MetricRegistry>(similarity::MetricRegistry::with_builtins());
  } else if (cfg.backend.kind == "http") {
    fail(v, cfg.backend.mapping_url.empty(), "http backend needs mapping_url");
    fail(v, cfg.backend.max_attempts < 1, "max_attempts must be >= 1");
    metrics = std::make_unique<similarity::MetricRegistry>(similarity::MetricRegistry::with_builtins());
    for (const auto& spec : cfg.backend.embedding_metrics) {
      const auto colon = spec.rfind(':');
      if (colon == std::string::npos) {
        v.push_back("embedding metric '" + spec + "' must be written id:modality");
        continue;
      }
      fail(v, cfg.backend.embedding_url.empty(), "embedding metrics need embedding_url");
      try {
        auto modality = core::parse_modality(spec.substr(colon + 1));
        similarity::MetricInfo info{spec.substr(0, colon), modality, -1.0, 1.0};
        metrics->register_metric(info, [](const core::Sample&, const core::Sample&) { return 0.0; });
      } catch (const Error& e) {
        v.push_back(std::string("embedding metric '") + spec + "': " + e.what());
      }
    }
  } else {
    v.push_back("unknown backend kind '" + cfg.backend.kind + "'");
  }

  fail(v, !cfg.i2t.enabled && !cfg.t2i.enabled, "no direction enabled");
  if (cfg.i2t.enabled) check_direction(v, cfg, cfg.i2t, Direction::i2t, metrics.get());
  if (cfg.t2i.enabled) check_direction(v, cfg, cfg.t2i, Direction::t2i, metrics.get());

  try {
    cfg.splits.validate();
  } catch (const Error& e) {
    v.push_back(e.what());
  }
  fail(v, cfg.splits.val <= 0.0 && cfg.train_enabled, "training needs a non-empty validation split");

  try {
    cfg.train.validate();
  } catch (const Error& e) {
    v.push_back(std::string("train: ") + e.what());
  }
  try {
    cfg.model.validate();
  } catch (const Error& e) {
    v.push_back(std::string("model: ") + e.what());
  }
  using reward::Objective;
  switch (cfg.train.objective) {
    case Objective::joint:
      fail(v, !cfg.i2t.enabled || !cfg.t2i.enabled, "joint objective needs both an i2t and a t2i dataset");
      break;
    case Objective::bradley_terry_i2t:
      fail(v, !cfg.i2t.enabled || cfg.t2i.enabled, "bradley_terry_i2t needs exactly one (i2t) dataset");
      break;
    case Objective::bradley_terry_t2i:
      fail(v, !cfg.t2i.enabled || cfg.i2t.enabled, "bradley_terry_t2i needs exactly one (t2i) dataset");
      break;
    case Objective::mse_regression:
      fail(v, cfg.i2t.enabled == cfg.t2i.enabled, "mse_regression needs exactly one dataset");
      break;
  }
  if (cfg.train_enabled) {
    fail(v, cfg.backend.kind != "bitgrid", "reward-model training needs bitgrid samples");
    fail(v, cfg.model.bits != cfg.bits, "model bits differ from world bits");
  }
  if (cfg.eval.enabled) {
    fail(v, cfg.backend.kind != "bitgrid", "evaluation needs the bitgrid world");
    fail(v, !cfg.train_enabled, "evaluation needs a trained reward model");
    fail(v, cfg.eval.conditions < 1, "eval.conditions must be >= 1");
    fail(v, cfg.eval.bon_pool < 1, "eval.bon_pool must be >= 1");
    fail(v, cfg.eval.bon_trials < 0, "eval.bon_trials must be >= 0");
    if (cfg.i2t.enabled) {
      try {
        auto w = BitGridWorld::from_model_id(cfg.eval.baseline_backward);
        fail(v, w.bits != cfg.bits, "eval.baseline_backward disagrees with the world bit count");
      } catch (const Error&) {
        v.push_back("eval.baseline_backward must be a bitgrid model id");
      }
    }
  }
  return v;
}

std::vector<std::string> preset_names() { return {"toy", "paper-scale-i2t", "paper-scale-t2i", "ablation-grid"}; }

PipelineConfig preset(std::string_view name) {
  if (name == "toy") return toy_preset();
  if (name == "paper-scale-i2t") return paper_i2t_preset();
  if (name == "paper-scale-t2i") return paper_t2i_preset();
  if (name == "ablation-grid") return ablation_base();
  throw InvalidInput("unknown preset '" + std::string(name) + "'");
}

std::vector<PipelineConfig> ablation_grid(const PipelineConfig& base) {
  const char* metrics[] = {similarity::kBitgridHammingSim, similarity::kBitgridL2Sim, similarity::kBitgridOnesJaccard};
  const FillRule fills[] = {FillRule::zeros, FillRule::seeded_uniform};
  std::vector<PipelineConfig> out;
  for (const char* metric : metrics) {
    for (FillRule fill : fills) {
      PipelineConfig c = base;
      auto w = BitGridWorld::from_model_id(c.i2t.scorer.backward.model_id);
      w.fill = fill;
      c.i2t.scorer.backward.model_id = w.model_id();
      c.i2t.scorer.metric_id = metric;
      const std::string tag = std::string(metric) + "__" + std::string(mappings::to_string(fill));
      c.name = base.name + "/" + tag;
      c.output_root = base.output_root / tag;
      out.push_back(std::move(c));
    }
  }
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = core::read_json(path);
  } catch (const json::exception& e) {
    throw InvalidInput("cannot parse config " + path.string() + ": " + e.what());
  }
  if (j.contains("preset")) {
    auto base = preset(j.at("preset").get<std::string>()).to_json();
    json overrides = j;
    overrides.erase("preset");
    base.merge_patch(overrides);
    j = base;
  }
  try {
    return PipelineConfig::from_json(j);
  } catch (const json::exception& e) {
    throw InvalidInput("invalid config " + path.string() + ": " + e.what());
  }
}

void save_config(const std::filesystem::path& path, const PipelineConfig& cfg) { core::write_json(path, cfg.to_json()); }

Runtime make_runtime(const PipelineConfig& cfg) {
  Runtime rt;
  rt.media = core::MediaStore(cfg.output_root / "media");
  rt.metrics = std::make_shared<similarity::MetricRegistry>(similarity::MetricRegistry::with_builtins());
  if (cfg.backend.kind == "bitgrid") {
    rt.backend = std::make_shared<mappings::BitGridBackend>();
    return rt;
  }
  mappings::RetryPolicy retry{cfg.backend.max_attempts, std::chrono::milliseconds(cfg.backend.backoff_ms)};
  rt.backend = std::make_shared<mappings::HttpMappingBackend>(mappings::Endpoint::parse(cfg.backend.mapping_url), rt.media, retry);
  if (!cfg.backend.embedding_metrics.empty()) {
    auto emb = std::make_shared<similarity::HttpEmbeddingBackend>(mappings::Endpoint::parse(cfg.backend.embedding_url), retry);
    for (const auto& spec : cfg.backend.embedding_metrics) {
      const auto colon = spec.rfind(':');
      similarity::register_embedding_cosine(*rt.metrics, spec.substr(0, colon), core::parse_modality(spec.substr(colon + 1)), emb);
    }
  }
  return rt;
}

}  // namespace cyclepref::pipeline
