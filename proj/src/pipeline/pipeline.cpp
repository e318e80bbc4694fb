#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"
#include "cyclepref/core/serialize.hpp"
#include "cyclepref/evalbon/evalbon.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/pipeline/pipeline.hpp"
#include "cyclepref/reward/checkpoint.hpp"

namespace cyclepref::pipeline {

namespace fs = std::filesystem;
using core::Direction;
using core::Sample;
using mappings::BitGridWorld;

namespace {

class RootLock {
 public:
  explicit RootLock(const fs::path& root) : path_(root / ".lock") {
    fs::create_directories(root);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) throw InvalidInput("output root " + root.string() + " is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~RootLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RootLock(const RootLock&) = delete;
  RootLock& operator=(const RootLock&) = delete;

 private:
  fs::path path_;
};

std::string dir_name(Direction d) { return std::string(core::to_string(d)); }

const DirectionConfig& dir_config(const PipelineConfig& cfg, Direction d) { return d == Direction::i2t ? cfg.i2t : cfg.t2i; }

std::vector<Direction> enabled(const PipelineConfig& cfg) {
  std::vector<Direction> out;
  if (cfg.i2t.enabled) out.push_back(Direction::i2t);
  if (cfg.t2i.enabled) out.push_back(Direction::t2i);
  return out;
}

json forward_json(const DirectionConfig& d) {
  json a = json::array();
  for (const auto& s : d.forward) a.push_back(mapping_spec_to_json(s));
  return a;
}

// Random toy-world conditions, distinct by content hash.
std::vector<Sample> random_conditions(const PipelineConfig& cfg, Direction d, const ConditionSource& src, int count,
                                      std::uint64_t seed, const std::set<core::Digest>& exclude = {}) {
  core::Rng rng(core::Rng::mix(cfg.global_seed) ^ seed);
  std::vector<Sample> out;
  std::set<core::Digest> seen = exclude;
  const std::size_t max_draws = static_cast<std::size_t>(count) * 1000;
  for (std::size_t draw = 0; out.size() < static_cast<std::size_t>(count) && draw < max_draws; ++draw) {
    mappings::Bits bits(static_cast<std::size_t>(cfg.bits));
    for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
    std::optional<Sample> s;
    if (d == Direction::i2t) {
      s = mappings::make_image(bits);
    } else {
      mappings::Assertions a;
      for (int i = 0; i < cfg.bits; ++i) {
        if (rng.bernoulli(src.coverage)) a.push_back({i, bits[static_cast<std::size_t>(i)]});
      }
      if (a.empty()) continue;
      s = mappings::make_text(a);
    }
    if (seen.insert(s->content_hash()).second) out.push_back(*s);
  }
  return out;
}

std::vector<Sample> read_samples(const fs::path& path, core::Modality m, const core::MediaStore& media) {
  std::vector<Sample> out;
  for (const auto& row : core::read_jsonl(path)) out.push_back(core::sample_from_json(row.contains("sample") ? row.at("sample") : row, m, media));
  return out;
}

void write_samples(const fs::path& path, const std::vector<Sample>& samples) {
  std::vector<json> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(core::sample_to_json(s));
  core::write_jsonl(path, rows);
}

json pool_to_json(const Sample& condition, const mappings::PoolResult& pool) {
  json cands = json::array();
  for (const auto& c : pool.candidates) cands.push_back({{"sample", core::sample_to_json(c.sample)}, {"model_id", c.model_id}, {"seed", c.seed}});
  json errs = json::array();
  for (const auto& e : pool.errors) errs.push_back({{"model_id", e.model_id}, {"seed", e.seed}, {"message", e.message}});
  return json{{"condition", core::sample_to_json(condition)}, {"candidates", cands}, {"errors", errs}};
}

prefbuild::ConditionPool pool_from_json(const json& j, Direction d, const core::MediaStore& media) {
  prefbuild::ConditionPool p{core::sample_from_json(j.at("condition"), core::condition_modality(d), media), {}};
  for (const auto& c : j.at("candidates")) {
    p.candidates.push_back({core::sample_from_json(c.at("sample"), core::candidate_modality(d), media),
                            c.at("model_id").get<std::string>(), c.at("seed").get<std::int64_t>()});
  }
  return p;
}

// Ground-truth alignment of a (condition, candidate) pair in the toy world.
int truth(Direction d, int bits, const Sample& condition, const Sample& candidate) {
  if (d == Direction::i2t) return mappings::true_alignment(mappings::image_bits(condition), mappings::text_assertions(candidate, bits));
  return mappings::true_alignment(mappings::image_bits(candidate), mappings::text_assertions(condition, bits));
}

struct StageOutcome {
  std::vector<std::string> outputs;  // relative to the output root
  json summary = json::object();
  bool partial = false;
};

struct Stage {
  std::string name;
  std::function<json()> inputs;
  std::function<StageOutcome()> run;
};

class Runner {
 public:
  Runner(const PipelineConfig& cfg) : cfg_(cfg), root_(cfg.output_root), rt_(make_runtime(cfg)) {}

  RunResult run() {
    RootLock lock(root_);
    const auto manifest_path = root_ / kRunManifest;
    json previous = fs::exists(manifest_path) ? core::read_json(manifest_path) : json::object();

    manifest_ = json{{"schema_version", core::kSchemaVersion},
                     {"config", cfg_.identity_json()},
                     {"config_hash", cfg_.hash()},
                     {"status", "running"},
                     {"stages", json::array()}};
    RunResult result;
    result.manifest_path = manifest_path;

    for (const auto& stage : stages()) {
      const std::string input_hash = core::canonical_hash(stage.inputs().dump()).hex();
      const json* prior = find_stage(previous, stage.name);
      if (prior != nullptr && prior->value("input_hash", "") == input_hash && prior->value("status", "") != "failed" &&
          outputs_intact(*prior)) {
        manifest_["stages"].push_back(*prior);
        result.partial = result.partial || prior->value("status", "") == "partial";
        result.skipped.push_back(stage.name);
        continue;
      }
      json entry{{"name", stage.name}, {"input_hash", input_hash}};
      try {
        auto outcome = stage.run();
        json outs = json::array();
        for (const auto& rel : outcome.outputs) outs.push_back({{"path", rel}, {"sha256", core::file_sha256(root_ / rel)}});
        entry["status"] = outcome.partial ? "partial" : "done";
        entry["outputs"] = outs;
        entry["summary"] = outcome.summary;
        result.partial = result.partial || outcome.partial;
      } catch (const std::exception& e) {
        entry["status"] = "failed";
        entry["outputs"] = json::array();
        entry["error"] = e.what();
        manifest_["stages"].push_back(entry);
        manifest_["status"] = "failed";
        core::write_json(manifest_path, manifest_);
        throw;
      }
      manifest_["stages"].push_back(entry);
      result.executed.push_back(stage.name);
      core::write_json(manifest_path, manifest_);
    }
    manifest_["status"] = result.partial ? "partial" : "complete";
    core::write_json(manifest_path, manifest_);
    result.manifest = manifest_;
    return result;
  }

 private:
  static const json* find_stage(const json& manifest, const std::string& name) {
    if (!manifest.contains("stages")) return nullptr;
    for (const auto& s : manifest.at("stages")) {
      if (s.value("name", "") == name) return &s;
    }
    return nullptr;
  }

  bool outputs_intact(const json& stage) const {
    for (const auto& o : stage.at("outputs")) {
      const auto path = root_ / o.at("path").get<std::string>();
      if (!fs::exists(path) || core::file_sha256(path) != o.at("sha256").get<std::string>()) return false;
    }
    return true;
  }

  json output_hashes(const std::string& stage) const {
    const json* s = find_stage(manifest_, stage);
    return s == nullptr ? json() : s->at("outputs");
  }

  std::vector<Stage> stages() {
    std::vector<Stage> s;
    s.push_back({"conditions", [this] { return conditions_inputs(); }, [this] { return run_conditions(); }});
    s.push_back({"pools", [this] { return pools_inputs(); }, [this] { return run_pools(); }});
    s.push_back({"scores", [this] { return scores_inputs(); }, [this] { return run_scores(); }});
    s.push_back({"prefs", [this] { return prefs_inputs(); }, [this] { return run_prefs(); }});
    if (cfg_.train_enabled) s.push_back({"train", [this] { return train_inputs(); }, [this] { return run_train(); }});
    if (cfg_.eval.enabled) s.push_back({"eval", [this] { return eval_inputs(); }, [this] { return run_eval(); }});
    return s;
  }

  json conditions_inputs() const {
    json j{{"global_seed", cfg_.global_seed}, {"bits", cfg_.bits}};
    for (auto d : enabled(cfg_)) {
      const auto& c = dir_config(cfg_, d).conditions;
      j[dir_name(d)] = {{"kind", c.kind}, {"count", c.count}, {"coverage", c.coverage}, {"seed", c.seed}, {"path", c.path}};
      if (c.kind == "file") j[dir_name(d)]["sha256"] = core::file_sha256(c.path);
    }
    return j;
  }

  StageOutcome run_conditions() {
    StageOutcome out;
    for (auto d : enabled(cfg_)) {
      const auto& src = dir_config(cfg_, d).conditions;
      auto samples = src.kind == "file" ? read_samples(src.path, core::condition_modality(d), rt_.media)
                                        : random_conditions(cfg_, d, src, src.count, src.seed);
      const std::string rel = "conditions_" + dir_name(d) + ".jsonl";
      write_samples(root_ / rel, samples);
      out.outputs.push_back(rel);
      out.summary[dir_name(d)] = samples.size();
    }
    return out;
  }

  json pools_inputs() const {
    json j{{"upstream", output_hashes("conditions")}, {"backend", cfg_.backend.kind}};
    for (auto d : enabled(cfg_)) {
      j[dir_name(d)] = {{"forward", forward_json(dir_config(cfg_, d))}, {"seeds_per_spec", dir_config(cfg_, d).seeds_per_spec}};
    }
    return j;
  }

  StageOutcome run_pools() {
    StageOutcome out;
    for (auto d : enabled(cfg_)) {
      const auto& dc = dir_config(cfg_, d);
      auto conditions = read_samples(root_ / ("conditions_" + dir_name(d) + ".jsonl"), core::condition_modality(d), rt_.media);
      std::vector<json> rows;
      std::size_t candidates = 0, errors = 0;
      for (const auto& c : conditions) {
        auto pool = mappings::generate_candidate_pool(*rt_.backend, c, dc.forward, dc.seeds_per_spec, cfg_.parallelism);
        candidates += pool.candidates.size();
        errors += pool.errors.size();
        rows.push_back(pool_to_json(c, pool));
      }
      const std::string rel = "pools_" + dir_name(d) + ".jsonl";
      core::write_jsonl(root_ / rel, rows);
      out.outputs.push_back(rel);
      out.summary[dir_name(d)] = {{"conditions", conditions.size()}, {"candidates", candidates}, {"generation_errors", errors}};
      out.partial = out.partial || errors > 0;
    }
    return out;
  }

  json scores_inputs() const {
    json j{{"upstream", output_hashes("pools")}};
    for (auto d : enabled(cfg_)) j[dir_name(d)] = scorer_to_json(dir_config(cfg_, d).scorer);
    return j;
  }

  StageOutcome run_scores() {
    StageOutcome out;
    for (auto d : enabled(cfg_)) {
      const auto& scorer = dir_config(cfg_, d).scorer;
      scorer.validate(*rt_.metrics);
      cyclescore::ScoringContext ctx{*rt_.backend, *rt_.metrics, 1};
      std::vector<json> rows;
      json failures = json::array();
      for (const auto& row : core::read_jsonl(root_ / ("pools_" + dir_name(d) + ".jsonl"))) {
        auto pool = pool_from_json(row, d, rt_.media);
        std::vector<std::optional<core::CycleScoreRecord>> recs(pool.candidates.size());
        std::vector<std::string> errs(pool.candidates.size());
        mappings::parallel_for(pool.candidates.size(), cfg_.parallelism, [&](std::size_t i) {
          try {
            recs[i] = cyclescore::cycle_score(ctx, scorer, pool.condition, pool.candidates[i].sample, pool.candidates[i].model_id);
          } catch (const ScoringError& e) {
            errs[i] = e.what();
          }
        });
        for (std::size_t i = 0; i < recs.size(); ++i) {
          if (recs[i]) {
            rows.push_back(core::record_to_json(*recs[i]));
          } else {
            failures.push_back({{"condition_hash", pool.condition.content_hash().hex()},
                                {"candidate_hash", pool.candidates[i].sample.content_hash().hex()},
                                {"message", errs[i]}});
          }
        }
      }
      const std::string rel = "scores_" + dir_name(d) + ".jsonl";
      core::write_jsonl(root_ / rel, rows);
      out.outputs.push_back(rel);
      out.summary[dir_name(d)] = {{"records", rows.size()}, {"failures", failures}};
      out.partial = out.partial || !failures.empty();
    }
    return out;
  }

  prefbuild::AssembleOptions assemble_options(Direction d) const {
    const auto& dc = dir_config(cfg_, d);
    return prefbuild::AssembleOptions{dc.filter, cfg_.splits, cfg_.split_seed, dc.max_pairs_per_condition, dc.apply_filter};
  }

  json prefs_inputs() const {
    json j{{"upstream", output_hashes("scores")}};
    for (auto d : enabled(cfg_)) {
      const auto o = assemble_options(d);
      j[dir_name(d)] = {{"filter", core::filter_to_json(o.filter)},
                        {"apply_filter", o.apply_filter},
                        {"splits", {o.splits.train, o.splits.val, o.splits.test}},
                        {"split_seed", o.split_seed},
                        {"max_pairs_per_condition", o.max_pairs_per_condition}};
    }
    return j;
  }

  StageOutcome run_prefs() {
    StageOutcome out;
    for (auto d : enabled(cfg_)) {
      std::vector<core::CycleScoreRecord> records;
      for (const auto& row : core::read_jsonl(root_ / ("scores_" + dir_name(d) + ".jsonl"))) {
        records.push_back(core::record_from_json(row, rt_.media));
      }
      const auto opts = assemble_options(d);
      auto result = prefbuild::assemble_from_scores(records, d, opts);
      const std::string rel = "prefs_" + dir_name(d);
      prefbuild::write_dataset(root_ / rel, result, opts, json{{"config_hash", cfg_.hash()}});
      out.outputs.push_back(rel + "/pairs.jsonl");
      out.outputs.push_back(rel + "/manifest.json");
      out.summary[dir_name(d)] = core::stats_to_json(result.dataset.stats);
    }
    return out;
  }

  json train_inputs() const {
    return json{{"upstream", output_hashes("prefs")}, {"model", cfg_.model.to_json()}, {"train", cfg_.train.to_json()}};
  }

  StageOutcome run_train() {
    reward::TrainData data;
    json dataset_hashes = json::object();
    for (auto d : enabled(cfg_)) {
      const auto dir = root_ / ("prefs_" + dir_name(d));
      auto ds = prefbuild::read_dataset(dir, rt_.media);
      auto& train = d == Direction::i2t ? data.i2t_train : data.t2i_train;
      auto& val = d == Direction::i2t ? data.i2t_val : data.t2i_val;
      train = prefbuild::pairs_in_split(ds, core::Split::train);
      val = prefbuild::pairs_in_split(ds, core::Split::val);
      dataset_hashes[dir_name(d)] = core::file_sha256(dir / "manifest.json");
    }
    auto result = reward::train(reward::RewardModel(cfg_.model), data, cfg_.train);

    StageOutcome out;
    std::vector<json> log;
    for (const auto& s : result.log) log.push_back({{"step", s.step}, {"epoch", s.epoch}, {"loss", s.loss}, {"val_accuracy", s.val_accuracy}});
    core::write_jsonl(root_ / "train_log.jsonl", log);
    reward::Checkpoint ckpt{result.best, cfg_.train,
                            json{{"config_hash", cfg_.hash()},
                                 {"dataset_manifest_sha256", dataset_hashes},
                                 {"best_step", result.best_step},
                                 {"best_val_accuracy", result.best_val_accuracy}}};
    reward::save_checkpoint(root_ / "reward", ckpt);
    out.outputs = {"train_log.jsonl", "reward/checkpoint.json"};
    out.summary = {{"steps", result.log.size()},
                   {"best_step", result.best_step},
                   {"best_val_accuracy", result.best_val_accuracy},
                   {"train_pairs", data.i2t_train.size() + data.t2i_train.size()},
                   {"val_pairs", data.i2t_val.size() + data.t2i_val.size()}};
    return out;
  }

  json eval_inputs() const {
    json j{{"upstream", output_hashes("train")},
           {"prefs", output_hashes("prefs")},
           {"global_seed", cfg_.global_seed},
           {"bits", cfg_.bits},
           {"eval",
            {{"conditions", cfg_.eval.conditions},
             {"seed", cfg_.eval.seed},
             {"bon_pool", cfg_.eval.bon_pool},
             {"bon_trials", cfg_.eval.bon_trials},
             {"baseline_backward", cfg_.eval.baseline_backward}}}};
    for (auto d : enabled(cfg_)) {
      j[dir_name(d)] = {{"forward", forward_json(dir_config(cfg_, d))}, {"scorer", scorer_to_json(dir_config(cfg_, d).scorer)},
                        {"conditions", dir_config(cfg_, d).conditions.coverage}};
    }
    return j;
  }

  StageOutcome run_eval() {
    auto ckpt = reward::load_checkpoint(root_ / "reward");
    auto model = std::make_shared<const reward::RewardModel>(ckpt.model);
    json report{{"config_hash", cfg_.hash()}};

    for (auto d : enabled(cfg_)) {
      const auto& dc = dir_config(cfg_, d);
      auto verifier = evalbon::Verifier::reward_model(model, d);

      std::set<core::Digest> train_conditions;
      for (const auto& s : read_samples(root_ / ("conditions_" + dir_name(d) + ".jsonl"), core::condition_modality(d), rt_.media)) {
        train_conditions.insert(s.content_hash());
      }
      auto conditions = random_conditions(cfg_, d, dc.conditions, cfg_.eval.conditions, cfg_.eval.seed + (d == Direction::t2i ? 1 : 0),
                                          train_conditions);

      cyclescore::ScorerConfig baseline = dc.scorer;
      baseline.num_reconstructions = 1;
      if (d == Direction::i2t && !cfg_.eval.baseline_backward.empty()) baseline.backward.model_id = cfg_.eval.baseline_backward;
      cyclescore::ScoringContext ctx{*rt_.backend, *rt_.metrics, 1};

      double credit_model = 0, credit_raw = 0, credit_mean = 0;
      std::size_t counted = 0;
      for (const auto& cond : conditions) {
        auto pool = mappings::generate_candidate_pool(*rt_.backend, cond, dc.forward, dc.seeds_per_spec, cfg_.parallelism);
        const auto n = pool.candidates.size();
        std::vector<int> t(n);
        std::vector<double> rm(n), raw(n), mean(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& c = pool.candidates[i].sample;
          t[i] = truth(d, cfg_.bits, cond, c);
          rm[i] = verifier.score(cond, c);
          raw[i] = cyclescore::cycle_score(ctx, baseline, cond, c).score;
          mean[i] = cyclescore::cycle_score(ctx, dc.scorer, cond, c).score;
        }
        auto credit = [](double a, double b, int ta, int tb) {
          if (a == b) return 0.5;
          return (a > b) == (ta > tb) ? 1.0 : 0.0;
        };
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = i + 1; k < n; ++k) {
            if (t[i] == t[k]) continue;
            ++counted;
            credit_model += credit(rm[i], rm[k], t[i], t[k]);
            credit_raw += credit(raw[i], raw[k], t[i], t[k]);
            credit_mean += credit(mean[i], mean[k], t[i], t[k]);
          }
        }
      }
      json dr;
      dr["heldout_conditions"] = conditions.size();
      dr["heldout_pairs"] = counted;
      if (counted > 0) {
        dr["reward_model_accuracy"] = credit_model / static_cast<double>(counted);
        dr["raw_cycle_single_seed_accuracy"] = credit_raw / static_cast<double>(counted);
        dr["cycle_score_accuracy"] = credit_mean / static_cast<double>(counted);
      }
      dr["baseline_backward"] = baseline.backward.model_id;

      auto ds = prefbuild::read_dataset(root_ / ("prefs_" + dir_name(d)), rt_.media);
      auto test = prefbuild::pairs_in_split(ds, core::Split::test);
      dr["test_split_pairs"] = test.size();
      if (!test.empty()) dr["test_split_preference_accuracy"] = reward::preference_accuracy(*model, test);

      dr["bon"] = best_of_n_eval(d, verifier, conditions);
      report[dir_name(d)] = dr;
    }
    core::write_json(root_ / "eval_report.json", report);
    StageOutcome out;
    out.outputs = {"eval_report.json"};
    out.summary = report;
    return out;
  }

  // Share of trials whose winner's true alignment reaches the top 10% of its pool.
  json best_of_n_eval(Direction d, const evalbon::Verifier& v, const std::vector<Sample>& conditions) {
    const auto& dc = dir_config(cfg_, d);
    if (conditions.empty() || cfg_.eval.bon_trials == 0) return json{{"trials", 0}};
    const auto pool_size = static_cast<std::size_t>(cfg_.eval.bon_pool);
    const auto top_k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(pool_size))));
    std::size_t hits = 0;
    for (int t = 0; t < cfg_.eval.bon_trials; ++t) {
      const auto& cond = conditions[static_cast<std::size_t>(t) % conditions.size()];
      std::vector<Sample> pool;
      std::vector<int> truths;
      for (std::size_t i = 0; i < pool_size; ++i) {
        auto spec = dc.forward[i % dc.forward.size()];
        spec.decoding.seed = 50000 + static_cast<std::int64_t>(t) * static_cast<std::int64_t>(pool_size) + static_cast<std::int64_t>(i);
        pool.push_back(mappings::apply_mapping(*rt_.backend, spec, cond));
        truths.push_back(truth(d, cfg_.bits, cond, pool.back()));
      }
      auto bon = evalbon::best_of_n(v, cond, pool);
      auto sorted = truths;
      std::sort(sorted.rbegin(), sorted.rend());
      if (truths[bon.winner] >= sorted[std::min(top_k, sorted.size()) - 1]) ++hits;
    }
    return json{{"trials", cfg_.eval.bon_trials},
                {"pool", cfg_.eval.bon_pool},
                {"top_fraction", 0.1},
                {"hit_rate", static_cast<double>(hits) / cfg_.eval.bon_trials}};
  }

  const PipelineConfig& cfg_;
  fs::path root_;
  Runtime rt_;
  json manifest_;
};

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg) {
  if (auto v = validate_config(cfg); !v.empty()) throw InvalidInput("invalid config: " + v.front());
  return Runner(cfg).run();
}

}  // namespace cyclepref::pipeline
