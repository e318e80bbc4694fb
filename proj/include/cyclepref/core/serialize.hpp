#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclepref/core/media.hpp"
#include "cyclepref/core/records.hpp"

namespace cyclepref::core {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Text samples serialize as a JSON string, images as {"hash": hex, "uri": str}.
Json sample_to_json(const Sample& s);
Sample sample_from_json(const Json& j, Modality expected, const MediaStore& media);

Json record_to_json(const CycleScoreRecord& r);
CycleScoreRecord record_from_json(const Json& j, const MediaStore& media);

Json pair_to_json(const ComparisonPair& p);
ComparisonPair pair_from_json(const Json& j, const MediaStore& media);

Json filter_to_json(const FilterConfig& f);
FilterConfig filter_from_json(const Json& j);
Json stats_to_json(const DatasetStats& s);
DatasetStats stats_from_json(const Json& j);

// JSON Lines helpers. Output uses "\n" line endings and no trailing spaces so
// files are byte-stable.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

// SHA-256 of a file's bytes, hex-encoded.
std::string file_sha256(const std::filesystem::path& path);

}  // namespace cyclepref::core
