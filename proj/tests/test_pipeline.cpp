#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/pipeline/pipeline.hpp"

using namespace cyclepref;
using namespace cyclepref::pipeline;
namespace fs = std::filesystem;

namespace {

bool has_violation(const PipelineConfig& cfg, const std::string& needle) {
  for (const auto& v : validate_config(cfg))
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

// Toy preset shrunk to run in a few seconds.
PipelineConfig tiny(const fs::path& root) {
  auto cfg = preset("toy");
  cfg.output_root = root;
  cfg.i2t.conditions.count = 30;
  cfg.t2i.conditions.count = 30;
  cfg.train.epochs = 2;
  cfg.eval.conditions = 10;
  cfg.eval.bon_trials = 5;
  cfg.eval.bon_pool = 6;
  return cfg;
}

bool contains(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("presets validate") {
    for (const auto& name : preset_names()) {
      CAPTURE(name);
      CHECK(validate_config(preset(name)).empty());
    }
    CHECK_THROWS_AS(preset("nope"), InvalidInput);
  }

  TEST_CASE("cross-field violations are reported") {
    auto cfg = preset("toy");
    cfg.i2t.filter.tau_sim = -0.1;
    CHECK(has_violation(cfg, "tau_sim"));

    cfg = preset("toy");
    cfg.t2i.enabled = false;
    CHECK(has_violation(cfg, "joint"));

    cfg = preset("toy");
    cfg.i2t.scorer.metric_id = similarity::kBitgridJaccard;
    CHECK(!validate_config(cfg).empty());

    cfg = preset("toy");
    cfg.splits = {0.5, 0.2, 0.2};
    CHECK(!validate_config(cfg).empty());
  }

  TEST_CASE("full-scale constants are the defaults") {
    CHECK(reward::TrainConfig{}.lambda == 1.0);
    CHECK(mappings::kDefaultMaxTokens == 77);
    CHECK(mappings::Decoding{}.max_tokens == 77);
    CHECK(reward::ModelConfig{}.head_layers() == 5);
    CHECK(reward::ModelConfig{}.freeze_fraction == 0.7);
    auto i2t = preset("paper-scale-i2t");
    CHECK(i2t.train.batch_size == 2048);
    CHECK(i2t.train.epochs == 2);
    CHECK(i2t.train.learning_rate == 2e-5);
    CHECK(i2t.train.lambda == 1.0);
    CHECK(i2t.i2t.filter.tau_sim == 0.005);
    CHECK(i2t.i2t.filter.tau_neg == 0.7);
    CHECK(i2t.i2t.forward.size() == 11);
    auto t2i = preset("paper-scale-t2i");
    CHECK(t2i.train.batch_size == 2048);
    CHECK(t2i.train.epochs == 2);
    CHECK(t2i.train.learning_rate == 3e-5);
    CHECK(t2i.train.weight_decay == 1e-4);
    CHECK(t2i.t2i.filter.tau_neg == 0.4);
    CHECK(t2i.t2i.forward.size() * static_cast<std::size_t>(t2i.t2i.seeds_per_spec) == 12);
  }

  TEST_CASE("config json round trip and hash identity") {
    auto cfg = preset("toy");
    auto back = PipelineConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    auto moved = cfg;
    moved.output_root = "/elsewhere";
    moved.parallelism = 4;
    CHECK(moved.hash() == cfg.hash());
    moved.global_seed += 1;
    CHECK(moved.hash() != cfg.hash());

    auto dir = fs::temp_directory_path() / "cyclepref_test_cfg";
    fs::create_directories(dir);
    save_config(dir / "toy.json", cfg);
    CHECK(load_config(dir / "toy.json").hash() == cfg.hash());
    {
      std::ofstream f(dir / "patched.json");
      f << R"({"preset": "toy", "global_seed": 99, "train": {"epochs": 3}})";
    }
    auto patched = load_config(dir / "patched.json");
    CHECK(patched.global_seed == 99);
    CHECK(patched.train.epochs == 3);
    CHECK(patched.bits == cfg.bits);
    fs::remove_all(dir);
  }

  TEST_CASE("ablation grid expands to six distinct runs") {
    auto grid = ablation_grid(preset("ablation-grid"));
    REQUIRE(grid.size() == 6);
    std::set<std::string> hashes, roots;
    for (const auto& g : grid) {
      CHECK(validate_config(g).empty());
      hashes.insert(g.hash());
      roots.insert(g.output_root.string());
    }
    CHECK(hashes.size() == 6);
    CHECK(roots.size() == 6);
  }

  TEST_CASE("runs resume stage by stage") {
    auto root = fs::temp_directory_path() / "cyclepref_test_run";
    fs::remove_all(root);
    auto cfg = tiny(root);

    auto first = run_pipeline(cfg);
    CHECK(first.executed == std::vector<std::string>{"conditions", "pools", "scores", "prefs", "train", "eval"});
    CHECK(first.manifest.at("status") == "complete");
    CHECK(first.manifest.at("config_hash") == cfg.hash());
    CHECK(fs::exists(root / "eval_report.json"));
    CHECK(fs::exists(root / "prefs_i2t" / "pairs.jsonl"));
    CHECK(!fs::exists(root / ".lock"));

    auto again = run_pipeline(cfg);
    CHECK(again.executed.empty());
    CHECK(again.skipped.size() == 6);

    fs::remove(root / "eval_report.json");
    auto eval_only = run_pipeline(cfg);
    CHECK(eval_only.executed == std::vector<std::string>{"eval"});

    auto retrain = cfg;
    retrain.train.epochs = 3;
    auto tail = run_pipeline(retrain);
    CHECK(tail.executed == std::vector<std::string>{"train", "eval"});
    CHECK(contains(tail.skipped, "prefs"));

    { std::ofstream(root / ".lock") << ""; }
    CHECK_THROWS_AS(run_pipeline(cfg), InvalidInput);
    fs::remove(root / ".lock");

    auto bad = cfg;
    bad.i2t.filter.tau_sim = -1;
    CHECK_THROWS_AS(run_pipeline(bad), InvalidInput);
    fs::remove_all(root);
  }
}
