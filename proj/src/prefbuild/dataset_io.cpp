#include "cyclepref/core/errors.hpp"
#include "cyclepref/prefbuild/prefbuild.hpp"

namespace cyclepref::prefbuild {

namespace fs = std::filesystem;
using core::Json;

DatasetFiles write_dataset(const fs::path& dir, const AssemblyResult& result, const AssembleOptions& opts,
                           const Json& extra_manifest) {
  fs::create_directories(dir);
  const auto& ds = result.dataset;
  DatasetFiles files{dir / "pairs.jsonl", dir / "manifest.json"};

  std::vector<Json> rows;
  rows.reserve(ds.pairs.size());
  for (const auto& p : ds.pairs) rows.push_back(core::pair_to_json(p));
  core::write_jsonl(files.pairs, rows);

  Json skipped = Json::array();
  for (const auto& s : result.skipped) skipped.push_back({{"condition_hash", s.condition_hash}, {"reason", s.reason}});
  Json failures = Json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"condition_hash", f.condition_hash},
                        {"candidate_hash", f.candidate_hash},
                        {"failed_seeds", f.failed_seeds},
                        {"message", f.message}});
  }
  std::size_t per_split[3] = {0, 0, 0};
  for (const auto& p : ds.pairs) ++per_split[static_cast<int>(p.split)];

  Json manifest = {
      {"schema_version", core::kSchemaVersion},
      {"direction", core::to_string(ds.direction)},
      {"filter_config", ds.filter_config ? core::filter_to_json(*ds.filter_config) : Json(nullptr)},
      {"stats", core::stats_to_json(ds.stats)},
      {"split_ratios", opts.splits.as_array()},
      {"split_seed", opts.split_seed},
      {"split_counts", {{"train", per_split[0]}, {"val", per_split[1]}, {"test", per_split[2]}}},
      {"max_pairs_per_condition", opts.max_pairs_per_condition},
      {"num_conditions", result.num_conditions},
      {"skipped", skipped},
      {"failures", failures},
      {"pairs_file", "pairs.jsonl"},
      {"pairs_sha256", core::file_sha256(files.pairs)},
  };
  for (const auto& [k, v] : extra_manifest.items()) manifest[k] = v;
  core::write_json(files.manifest, manifest);
  return files;
}

Json read_manifest(const fs::path& dir) { return core::read_json(dir / "manifest.json"); }

PreferenceDataset read_dataset(const fs::path& dir, const core::MediaStore& media) {
  auto manifest = read_manifest(dir);
  if (manifest.value("schema_version", 0) != core::kSchemaVersion) {
    throw InvalidInput("unsupported preference dataset schema in '" + dir.string() + "'");
  }
  PreferenceDataset ds;
  ds.direction = core::parse_direction(manifest.at("direction").get<std::string>());
  if (!manifest.at("filter_config").is_null()) ds.filter_config = core::filter_from_json(manifest.at("filter_config"));
  ds.stats = core::stats_from_json(manifest.at("stats"));
  auto pairs_path = dir / manifest.value("pairs_file", std::string("pairs.jsonl"));
  for (const auto& row : core::read_jsonl(pairs_path)) {
    auto p = core::pair_from_json(row, media);
    if (p.direction != ds.direction) throw InvalidInput("pair direction differs from manifest direction");
    ds.pairs.push_back(std::move(p));
  }
  if (ds.pairs.size() != ds.stats.kept) throw InvalidInput("manifest kept count does not match pairs file");
  return ds;
}

}  // namespace cyclepref::prefbuild
