#include <algorithm>
#include <iterator>
#include <sstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/serialize.hpp"
#include "cyclepref/evalbon/evalbon.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/mappings/stub_server.hpp"
#include "cyclepref/pipeline/pipeline.hpp"
#include "cyclepref/prefbuild/prefbuild.hpp"
#include "cyclepref/reward/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace cyclepref;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitPartial = 4;

// Raised to leave with a specific exit code.
struct Exit {
  int code;
};

struct ConfigArgs {
  std::string config;
  std::string preset = "toy";

  pipeline::PipelineConfig load() const {
    auto cfg = config.empty() ? pipeline::preset(preset) : pipeline::load_config(config);
    return cfg;
  }
};

void add_config_args(CLI::App* app, ConfigArgs& a) {
  app->add_option("--config", a.config, "pipeline config (JSON)");
  app->add_option("--preset", a.preset, "preset used when --config is absent")->capture_default_str();
}

core::Direction direction_arg(const std::string& s) { return core::parse_direction(s); }

core::MediaStore media_at(const std::string& dir) { return dir.empty() ? core::MediaStore() : core::MediaStore(dir); }

std::vector<core::Sample> read_sample_file(const fs::path& path, core::Modality m, const core::MediaStore& media) {
  std::vector<core::Sample> out;
  for (const auto& row : core::read_jsonl(path)) out.push_back(core::sample_from_json(row.contains("sample") ? row.at("sample") : row, m, media));
  return out;
}

// A verifier from "raw" (cycle scoring per config) or a checkpoint directory.
struct VerifierHolder {
  pipeline::Runtime runtime;
  std::optional<evalbon::Verifier> verifier;
};

std::unique_ptr<VerifierHolder> make_verifier(const std::string& spec, core::Direction d, const ConfigArgs& ca, int n_override) {
  auto holder = std::make_unique<VerifierHolder>();
  if (spec == "raw") {
    auto cfg = ca.load();
    holder->runtime = pipeline::make_runtime(cfg);
    auto scorer = (d == core::Direction::i2t ? cfg.i2t : cfg.t2i).scorer;
    if (n_override > 0) scorer.num_reconstructions = n_override;
    holder->verifier = evalbon::Verifier::raw_cycle(scorer, *holder->runtime.backend, *holder->runtime.metrics);
  } else {
    auto ckpt = reward::load_checkpoint(spec);
    holder->verifier = evalbon::Verifier::reward_model(std::make_shared<const reward::RewardModel>(ckpt.model), d);
  }
  return holder;
}

int cmd_generate_pool(const ConfigArgs& ca, const std::string& dir_s, const std::string& input, const std::string& out,
                      int seeds_per_spec, const std::string& media_dir) {
  auto cfg = ca.load();
  const auto d = direction_arg(dir_s);
  const auto& dc = d == core::Direction::i2t ? cfg.i2t : cfg.t2i;
  if (dc.forward.empty()) throw InvalidInput("config has no forward specs for " + dir_s);
  auto rt = pipeline::make_runtime(cfg);
  if (!media_dir.empty()) rt.media = core::MediaStore(media_dir);
  std::vector<json> rows;
  bool partial = false;
  std::size_t generated = 0;
  for (const auto& cond : read_sample_file(input, core::condition_modality(d), rt.media)) {
    auto pool = mappings::generate_candidate_pool(*rt.backend, cond, dc.forward, seeds_per_spec > 0 ? seeds_per_spec : dc.seeds_per_spec,
                                                  cfg.parallelism);
    json cands = json::array();
    for (const auto& c : pool.candidates) cands.push_back({{"sample", core::sample_to_json(c.sample)}, {"model_id", c.model_id}, {"seed", c.seed}});
    json errs = json::array();
    for (const auto& e : pool.errors) errs.push_back({{"model_id", e.model_id}, {"seed", e.seed}, {"message", e.message}});
    partial = partial || !pool.errors.empty();
    generated += pool.candidates.size();
    rows.push_back({{"condition", core::sample_to_json(cond)}, {"candidates", cands}, {"errors", errs}});
  }
  core::write_jsonl(out, rows);
  std::cout << "wrote " << rows.size() << " pools to " << out << "\n";
  if (partial && generated == 0) {
    std::cerr << "error: every generation call failed\n";
    return kExitBackend;
  }
  return partial ? kExitPartial : kExitOk;
}

struct ScoreArgs {
  std::string direction = "i2t";
  std::string pools;
  std::string out;
  int n = 0;
  std::string backward;
  std::string metric;
  std::optional<std::int64_t> seed_base;
  std::string media;
};

int cmd_score(const ConfigArgs& ca, const ScoreArgs& a) {
  auto cfg = ca.load();
  const auto d = direction_arg(a.direction);
  auto scorer = (d == core::Direction::i2t ? cfg.i2t : cfg.t2i).scorer;
  scorer.direction = d;
  scorer.backward.direction = core::opposite(d);
  if (a.n > 0) scorer.num_reconstructions = a.n;
  if (!a.backward.empty()) scorer.backward.model_id = a.backward;
  if (!a.metric.empty()) scorer.metric_id = a.metric;
  if (a.seed_base) scorer.seed_base = *a.seed_base;
  const auto& pools = a.pools;
  const auto& out = a.out;
  const auto& media_dir = a.media;
  auto rt = pipeline::make_runtime(cfg);
  if (!media_dir.empty()) rt.media = core::MediaStore(media_dir);
  scorer.validate(*rt.metrics);
  cyclescore::ScoringContext ctx{*rt.backend, *rt.metrics, cfg.parallelism};
  std::vector<json> rows;
  std::size_t failures = 0;
  for (const auto& row : core::read_jsonl(pools)) {
    auto cond = core::sample_from_json(row.at("condition"), core::condition_modality(d), rt.media);
    for (const auto& c : row.at("candidates")) {
      auto cand = core::sample_from_json(c.at("sample"), core::candidate_modality(d), rt.media);
      try {
        rows.push_back(core::record_to_json(cyclescore::cycle_score(ctx, scorer, cond, cand, c.value("model_id", std::string{}))));
      } catch (const ScoringError& e) {
        ++failures;
        std::cerr << "scoring failed for " << cand.content_hash().hex() << ": " << e.what() << "\n";
      }
    }
  }
  core::write_jsonl(out, rows);
  std::cout << "wrote " << rows.size() << " scores to " << out << " (" << failures << " failures)\n";
  return failures > 0 ? kExitPartial : kExitOk;
}

struct PrefArgs {
  std::string direction = "i2t";
  std::string scores;
  std::string out;
  std::optional<double> tau_sim;
  std::optional<double> tau_neg;
  bool no_filter = false;
  bool no_dedup = false;
  std::vector<double> splits;
  std::size_t max_pairs = 0;
  std::uint64_t split_seed = 17;
  std::string media;
};

int cmd_build_prefs(const PrefArgs& a) {
  const auto d = direction_arg(a.direction);
  auto media = media_at(a.media);
  std::vector<core::CycleScoreRecord> records;
  for (const auto& row : core::read_jsonl(a.scores)) records.push_back(core::record_from_json(row, media));
  prefbuild::AssembleOptions opts;
  opts.filter = core::FilterConfig::defaults_for(d);
  if (a.tau_sim) opts.filter.tau_sim = *a.tau_sim;
  if (a.tau_neg) opts.filter.tau_neg = *a.tau_neg;
  if (opts.filter.tau_sim < 0.0) throw InvalidInput("tau_sim must be >= 0");
  if (a.no_dedup) opts.filter.dedup = false;
  if (!a.splits.empty()) {
    if (a.splits.size() != 3) throw InvalidInput("--splits takes train,val,test");
    opts.splits = {a.splits[0], a.splits[1], a.splits[2]};
  }
  opts.apply_filter = !a.no_filter;
  opts.max_pairs_per_condition = a.max_pairs;
  opts.split_seed = a.split_seed;
  auto result = prefbuild::assemble_from_scores(records, d, opts);
  prefbuild::write_dataset(a.out, result, opts);
  std::cout << core::stats_to_json(result.dataset.stats).dump() << "\n";
  return kExitOk;
}

int cmd_export_dpo(const std::string& prefs, const std::string& flavor, const std::string& out, const std::string& instruction,
                   const std::string& media_dir) {
  auto ds = prefbuild::read_dataset(prefs, media_at(media_dir));
  auto rows = prefbuild::export_dpo(ds, prefbuild::parse_dpo_flavor(flavor), instruction);
  core::write_jsonl(out, rows);
  std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string i2t;
  std::string t2i;
  std::string objective = "joint";
  std::string scale = "desk";
  std::string out;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<double> lambda;
  std::uint64_t seed = 0;
  int bits = 8;
  std::string fusion = "concat";
  bool flip = false;
  std::string media;
};

std::vector<core::ComparisonPair> flipped(std::vector<core::ComparisonPair> pairs) {
  for (auto& p : pairs) {
    std::swap(p.preferred, p.rejected);
    std::swap(p.score_preferred, p.score_rejected);
  }
  return pairs;
}

int cmd_train_reward(const TrainArgs& a) {
  const auto objective = reward::parse_objective(a.objective);
  auto tc = a.scale == "paper" ? reward::TrainConfig::paper(objective) : reward::TrainConfig::desk(objective);
  if (a.scale != "paper" && a.scale != "desk") throw InvalidInput("--scale must be desk or paper");
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.lambda) tc.lambda = *a.lambda;
  tc.seed = a.seed;
  tc.validate();

  auto media = media_at(a.media);
  reward::TrainData data;
  json hashes = json::object();
  auto load = [&](const std::string& dir, std::vector<core::ComparisonPair>& train, std::vector<core::ComparisonPair>& val,
                  const char* key) {
    if (dir.empty()) return;
    auto ds = prefbuild::read_dataset(dir, media);
    train = prefbuild::pairs_in_split(ds, core::Split::train);
    val = prefbuild::pairs_in_split(ds, core::Split::val);
    if (a.flip) {
      train = flipped(train);
      val = flipped(val);
    }
    hashes[key] = core::file_sha256(fs::path(dir) / "manifest.json");
  };
  load(a.i2t, data.i2t_train, data.i2t_val, "i2t");
  load(a.t2i, data.t2i_train, data.t2i_val, "t2i");
  if (auto v = reward::check_train_data(tc, data); !v.empty()) {
    for (const auto& s : v) std::cerr << "violation: " << s << "\n";
    return kExitConfig;
  }
  reward::ModelConfig mc;
  mc.bits = a.bits;
  mc.fusion = reward::parse_fusion(a.fusion);
  mc.init_seed = a.seed;
  auto result = reward::train(reward::RewardModel(mc), data, tc);
  reward::save_checkpoint(a.out, {result.best, tc,
                                  json{{"dataset_manifest_sha256", hashes},
                                       {"best_step", result.best_step},
                                       {"best_val_accuracy", result.best_val_accuracy},
                                       {"flipped_preferences", a.flip}}});
  std::vector<json> log;
  for (const auto& s : result.log) log.push_back({{"step", s.step}, {"epoch", s.epoch}, {"loss", s.loss}, {"val_accuracy", s.val_accuracy}});
  core::write_jsonl(fs::path(a.out) / "train_log.jsonl", log);
  std::cout << "best val accuracy " << result.best_val_accuracy << " at step " << result.best_step << "\n";
  return kExitOk;
}

int cmd_bon(const ConfigArgs& ca, const std::string& verifier, const std::string& dir_s, int n, const std::string& pool_file,
            const std::string& out, const std::string& media_dir) {
  const auto d = direction_arg(dir_s);
  auto holder = make_verifier(verifier, d, ca, 0);
  auto media = media_dir.empty() ? holder->runtime.media : core::MediaStore(media_dir);
  json results = json::array();
  for (const auto& row : core::read_jsonl(pool_file)) {
    auto cond = core::sample_from_json(row.at("condition"), core::condition_modality(d), media);
    std::vector<core::Sample> pool;
    for (const auto& c : row.at("candidates")) {
      if (n > 0 && static_cast<int>(pool.size()) >= n) break;
      pool.push_back(core::sample_from_json(c.at("sample"), core::candidate_modality(d), media));
    }
    auto bon = evalbon::best_of_n(*holder->verifier, cond, pool);
    json ranking = json::array();
    for (auto i : bon.ranking) ranking.push_back({{"index", i}, {"score", bon.scores[i]}, {"hash", pool[i].content_hash().hex()}});
    results.push_back({{"condition", core::sample_to_json(cond)},
                       {"winner", core::sample_to_json(bon.winner_sample)},
                       {"winner_index", bon.winner},
                       {"ranking", ranking}});
  }
  core::write_json(out, json{{"verifier", verifier}, {"direction", dir_s}, {"n", n}, {"results", results}});
  std::cout << "wrote " << results.size() << " selections to " << out << "\n";
  return kExitOk;
}

std::map<std::string, double> read_scores(const fs::path& path) {
  std::map<std::string, double> m;
  for (const auto& row : core::read_jsonl(path)) {
    auto item = row.at("item");
    m[item.is_string() ? item.get<std::string>() : item.dump()] = row.at("score").get<double>();
  }
  return m;
}

int cmd_eval_pairwise(const std::string& pred, const std::string& ref) {
  const double acc = evalbon::pairwise_accuracy(read_scores(pred), read_scores(ref));
  std::cout << json{{"pairwise_accuracy", acc}}.dump() << "\n";
  return kExitOk;
}

int cmd_eval_agreement(const ConfigArgs& ca, const std::string& verifier, const std::string& dir_s, const std::string& pairs_file,
                       const std::string& media_dir) {
  const auto d = direction_arg(dir_s);
  auto holder = make_verifier(verifier, d, ca, 0);
  auto media = media_dir.empty() ? holder->runtime.media : core::MediaStore(media_dir);
  std::vector<evalbon::LabeledPair> pairs;
  for (const auto& row : core::read_jsonl(pairs_file)) {
    const auto choice = row.at("choice").get<std::string>();
    if (choice != "a" && choice != "b") throw InvalidInput("choice must be \"a\" or \"b\"");
    pairs.push_back({core::sample_from_json(row.at("condition"), core::condition_modality(d), media),
                     core::sample_from_json(row.at("a"), core::candidate_modality(d), media),
                     core::sample_from_json(row.at("b"), core::candidate_modality(d), media),
                     choice == "a" ? evalbon::Choice::a : evalbon::Choice::b});
  }
  std::cout << json{{"agreement_rate", evalbon::agreement_rate(*holder->verifier, pairs)}, {"pairs", pairs.size()}}.dump() << "\n";
  return kExitOk;
}

// Factor value for a row: taken from the row when present, otherwise derived
// for bit-grid samples.
double factor_of(const json& row, const std::string& factor, core::Direction d, const core::Sample& cond, const core::Sample& cand) {
  if (row.contains(factor)) return row.at(factor).get<double>();
  if (row.contains("factor_value")) return row.at("factor_value").get<double>();
  const auto& text = d == core::Direction::i2t ? cand : cond;
  const auto& image = d == core::Direction::i2t ? cond : cand;
  if (factor == "caption_length") {
    const auto& t = text.text_value();
    if (t.starts_with("{")) return static_cast<double>(std::count(t.begin(), t.end(), ':'));
    std::istringstream in(t);
    return static_cast<double>(std::distance(std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()));
  }
  if (factor == "hallucination_rate") {
    const auto bits = mappings::image_bits(image);
    const auto a = mappings::text_assertions(text, static_cast<int>(bits.size()));
    if (a.empty()) return 0.0;
    std::size_t wrong = 0;
    for (const auto& x : a) wrong += bits[static_cast<std::size_t>(x.index)] != x.bit ? 1 : 0;
    return static_cast<double>(wrong) / static_cast<double>(a.size());
  }
  throw InvalidInput("row lacks a '" + factor + "' value");
}

int cmd_eval_trend(const ConfigArgs& ca, const std::string& factor, const std::string& in, const std::string& verifier,
                   const std::string& dir_s, const std::string& media_dir) {
  if (factor != "caption_length" && factor != "hallucination_rate" && factor != "resolution") {
    throw InvalidInput("--factor must be caption_length, hallucination_rate or resolution");
  }
  const auto d = direction_arg(dir_s);
  std::unique_ptr<VerifierHolder> holder;
  if (!verifier.empty()) holder = make_verifier(verifier, d, ca, 0);
  auto media = media_at(media_dir);
  std::vector<evalbon::TrendPoint> points;
  for (const auto& row : core::read_jsonl(in)) {
    auto cond = core::sample_from_json(row.at("condition"), core::condition_modality(d), media);
    auto cand = core::sample_from_json(row.at("candidate"), core::candidate_modality(d), media);
    const double f = factor_of(row, factor, d, cond, cand);
    double score = 0.0;
    if (holder) {
      score = holder->verifier->score(cond, cand);
    } else if (row.contains("score")) {
      score = row.at("score").get<double>();
    } else {
      throw InvalidInput("rows need a score when no --verifier is given");
    }
    points.push_back({f, score});
  }
  auto r = evalbon::trend_report(points);
  json table = json::array();
  for (const auto& p : r.table) table.push_back({p.factor, p.score});
  std::cout << json{{"factor", factor}, {"pearson_r", r.pearson_r}, {"slope", r.slope}, {"intercept", r.intercept}, {"table", table}}.dump()
            << "\n";
  return kExitOk;
}

int cmd_run(const ConfigArgs& ca, const std::string& out_root, bool dump) {
  auto cfg = ca.load();
  std::vector<pipeline::PipelineConfig> runs;
  if (cfg.name == "ablation-grid") {
    if (!out_root.empty()) cfg.output_root = out_root;
    runs = pipeline::ablation_grid(cfg);
  } else {
    if (!out_root.empty()) cfg.output_root = out_root;
    runs.push_back(cfg);
  }
  if (dump) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return kExitOk;
  }
  bool violations = false;
  for (const auto& r : runs) {
    for (const auto& v : pipeline::validate_config(r)) {
      std::cerr << "config violation (" << r.name << "): " << v << "\n";
      violations = true;
    }
  }
  if (violations) return kExitConfig;
  bool partial = false;
  for (const auto& r : runs) {
    auto res = pipeline::run_pipeline(r);
    std::cout << r.name << ": " << res.manifest.value("status", "") << " (ran " << res.executed.size() << ", skipped "
              << res.skipped.size() << ") manifest " << res.manifest_path.string() << " config " << r.hash() << "\n";
    partial = partial || res.partial;
  }
  return partial ? kExitPartial : kExitOk;
}

int cmd_stub_server(const std::string& host, int port, int bits) {
  mappings::StubServer server(bits);
  std::cout << "serving bitgrid adapter on " << host << ":" << port << std::endl;
  server.listen_blocking(host, port);
  return kExitOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Cycle-consistency preference pipeline"};
  app.require_subcommand(1);
  int result = kExitOk;
  std::string media;

  ConfigArgs gp_cfg;
  std::string gp_dir = "i2t", gp_in, gp_out;
  int gp_seeds = 0;
  auto* gp = app.add_subcommand("generate-pool", "generate candidate pools for condition samples");
  add_config_args(gp, gp_cfg);
  gp->add_option("--direction", gp_dir)->check(CLI::IsMember({"i2t", "t2i"}));
  gp->add_option("--in", gp_in, "conditions JSONL")->required();
  gp->add_option("--out", gp_out, "pools JSONL")->required();
  gp->add_option("--seeds-per-spec", gp_seeds);
  gp->add_option("--media", media);
  gp->callback([&] { result = cmd_generate_pool(gp_cfg, gp_dir, gp_in, gp_out, gp_seeds, media); });

  ConfigArgs sc_cfg;
  ScoreArgs sa;
  auto* sc = app.add_subcommand("score", "cycle-score every candidate of every pool");
  add_config_args(sc, sc_cfg);
  sc->add_option("--direction", sa.direction)->check(CLI::IsMember({"i2t", "t2i"}));
  sc->add_option("--in,--pools", sa.pools, "pools JSONL")->required();
  sc->add_option("--out", sa.out)->required();
  sc->add_option("--n", sa.n, "reconstructions (overrides the config)");
  sc->add_option("--backward", sa.backward, "backward model id (overrides the config)");
  sc->add_option("--metric", sa.metric, "similarity metric id (overrides the config)");
  sc->add_option("--seed-base", sa.seed_base);
  sc->add_option("--media", sa.media);
  sc->callback([&] { result = cmd_score(sc_cfg, sa); });

  PrefArgs pa;
  auto* bp = app.add_subcommand("build-prefs", "build and filter comparison pairs");
  bp->add_option("--direction", pa.direction)->check(CLI::IsMember({"i2t", "t2i"}));
  bp->add_option("--scores", pa.scores)->required();
  bp->add_option("--out", pa.out, "dataset directory")->required();
  bp->add_option("--tau-sim", pa.tau_sim);
  bp->add_option("--tau-neg", pa.tau_neg);
  bp->add_flag("--no-filter", pa.no_filter);
  bp->add_flag("--no-dedup", pa.no_dedup);
  bp->add_option("--splits", pa.splits, "train,val,test ratios")->delimiter(',');
  bp->add_option("--max-pairs", pa.max_pairs);
  bp->add_option("--split-seed", pa.split_seed);
  bp->add_option("--media", pa.media);
  bp->callback([&] { result = cmd_build_prefs(pa); });

  std::string ex_prefs, ex_flavor = "vl_instruct", ex_out, ex_instr = mappings::kPromptLlava;
  auto* ex = app.add_subcommand("export-dpo", "export a preference dataset as DPO rows");
  ex->add_option("--in,--prefs", ex_prefs, "dataset directory")->required();
  ex->add_option("--flavor", ex_flavor)->check(CLI::IsMember({"vl_instruct", "t2i_pairs"}));
  ex->add_option("--out", ex_out)->required();
  ex->add_option("--instruction", ex_instr);
  ex->add_option("--media", media);
  ex->callback([&] { result = cmd_export_dpo(ex_prefs, ex_flavor, ex_out, ex_instr, media); });

  TrainArgs ta;
  auto* tr = app.add_subcommand("train-reward", "train a reward model on preference datasets");
  tr->add_option("--i2t", ta.i2t, "i2t dataset directory");
  tr->add_option("--t2i", ta.t2i, "t2i dataset directory");
  tr->add_option("--objective", ta.objective)->check(CLI::IsMember({"joint", "bradley_terry_i2t", "bradley_terry_t2i", "mse_regression"}));
  tr->add_option("--preset,--scale", ta.scale)->check(CLI::IsMember({"desk", "paper"}));
  tr->add_option("--out", ta.out, "checkpoint directory")->required();
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--lr", ta.lr);
  tr->add_option("--batch-size", ta.batch_size);
  tr->add_option("--lambda", ta.lambda);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--bits", ta.bits);
  tr->add_option("--fusion", ta.fusion)->check(CLI::IsMember({"concat", "concat_product"}));
  tr->add_flag("--flip", ta.flip, "swap preferred and rejected");
  tr->add_option("--media", ta.media);
  tr->callback([&] { result = cmd_train_reward(ta); });

  ConfigArgs bon_cfg;
  std::string bon_verifier, bon_dir = "i2t", bon_pool, bon_out;
  int bon_n = 0;
  auto* bon = app.add_subcommand("bon", "best-of-N selection over candidate pools");
  add_config_args(bon, bon_cfg);
  bon->add_option("--verifier", bon_verifier, "checkpoint directory or 'raw'")->required();
  bon->add_option("--direction", bon_dir)->check(CLI::IsMember({"i2t", "t2i"}));
  bon->add_option("--n", bon_n, "use the first n candidates (0 = all)");
  bon->add_option("--pool", bon_pool)->required();
  bon->add_option("--out", bon_out)->required();
  bon->add_option("--media", media);
  bon->callback([&] { result = cmd_bon(bon_cfg, bon_verifier, bon_dir, bon_n, bon_pool, bon_out, media); });

  auto* ev = app.add_subcommand("eval", "evaluation metrics");
  ev->require_subcommand(1);
  std::string pw_pred, pw_ref;
  auto* pw = ev->add_subcommand("pairwise", "pairwise accuracy of predicted vs reference scores");
  pw->add_option("--pred", pw_pred)->required();
  pw->add_option("--ref", pw_ref)->required();
  pw->callback([&] { result = cmd_eval_pairwise(pw_pred, pw_ref); });

  ConfigArgs ag_cfg;
  std::string ag_verifier, ag_dir = "i2t", ag_pairs;
  auto* ag = ev->add_subcommand("agreement", "agreement with labeled binary preferences");
  add_config_args(ag, ag_cfg);
  ag->add_option("--verifier", ag_verifier)->required();
  ag->add_option("--direction", ag_dir)->check(CLI::IsMember({"i2t", "t2i"}));
  ag->add_option("--pairs", ag_pairs)->required();
  ag->add_option("--media", media);
  ag->callback([&] { result = cmd_eval_agreement(ag_cfg, ag_verifier, ag_dir, ag_pairs, media); });

  ConfigArgs tdc;
  std::string td_factor, td_in, td_verifier, td_dir = "i2t";
  auto* td = ev->add_subcommand("trend", "score-versus-factor correlation");
  add_config_args(td, tdc);
  td->add_option("--factor", td_factor)->required()->check(CLI::IsMember({"caption_length", "hallucination_rate", "resolution"}));
  td->add_option("--in", td_in)->required();
  td->add_option("--verifier", td_verifier, "checkpoint directory or 'raw' (else rows carry a score)");
  td->add_option("--direction", td_dir)->check(CLI::IsMember({"i2t", "t2i"}));
  td->add_option("--media", media);
  td->callback([&] { result = cmd_eval_trend(tdc, td_factor, td_in, td_verifier, td_dir, media); });

  ConfigArgs run_cfg;
  std::string run_out;
  bool run_dump = false;
  auto* run = app.add_subcommand("run", "run the full pipeline");
  add_config_args(run, run_cfg);
  run->add_option("--out", run_out, "output root (overrides the config)");
  run->add_flag("--dump-config", run_dump, "print the resolved config and exit");
  run->callback([&] { result = cmd_run(run_cfg, run_out, run_dump); });

  std::string ss_host = "127.0.0.1";
  int ss_port = 8088, ss_bits = 16;
  auto* ss = app.add_subcommand("stub-server", "serve the toy world over the adapter protocol");
  ss->add_option("--host", ss_host);
  ss->add_option("--port", ss_port);
  ss->add_option("--bits", ss_bits);
  ss->callback([&] { result = cmd_stub_server(ss_host, ss_port, ss_bits); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return result;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const TransportError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return kExitBackend;
  } catch (const GenerationError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ScoringError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return kExitBackend;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
