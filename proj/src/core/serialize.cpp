#include "cyclepref/core/serialize.hpp"

#include <fstream>
#include <sstream>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::core {

namespace fs = std::filesystem;

namespace {

const Json& field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(std::string("missing field '") + key + "'");
  return *it;
}

Json provenance_to_json(const PairProvenance& p) {
  return Json{{"forward_model_id", p.forward_model_id},
              {"rejected_forward_model_id", p.rejected_forward_model_id},
              {"backward_model_id", p.backward_model_id},
              {"similarity_metric_id", p.similarity_metric_id},
              {"reconstruction_seed_list", p.reconstruction_seed_list},
              {"num_reconstructions", p.num_reconstructions}};
}

PairProvenance provenance_from_json(const Json& j) {
  PairProvenance p;
  p.forward_model_id = field(j, "forward_model_id").get<std::string>();
  p.rejected_forward_model_id = j.value("rejected_forward_model_id", std::string());
  p.backward_model_id = field(j, "backward_model_id").get<std::string>();
  p.similarity_metric_id = field(j, "similarity_metric_id").get<std::string>();
  p.reconstruction_seed_list = field(j, "reconstruction_seed_list").get<std::vector<std::int64_t>>();
  p.num_reconstructions = field(j, "num_reconstructions").get<int>();
  return p;
}

}  // namespace

Json sample_to_json(const Sample& s) {
  if (s.is_text()) return s.text_value();
  return Json{{"hash", s.content_hash().hex()}, {"uri", s.uri()}};
}

Sample sample_from_json(const Json& j, Modality expected, const MediaStore& media) {
  if (expected == Modality::text) {
    if (!j.is_string()) throw InvalidInput("expected inline text payload");
    return Sample::text(j.get<std::string>());
  }
  if (!j.is_object()) throw InvalidInput("expected image reference {hash, uri}");
  return media.load_image(field(j, "uri").get<std::string>(), Digest::from_hex(field(j, "hash").get<std::string>()));
}

Json record_to_json(const CycleScoreRecord& r) {
  return Json{{"condition", sample_to_json(r.condition)},
              {"candidate", sample_to_json(r.candidate)},
              {"direction", to_string(r.direction)},
              {"score", r.score},
              {"forward_model_id", r.forward_model_id},
              {"backward_model_id", r.backward_model_id},
              {"similarity_metric_id", r.similarity_metric_id},
              {"reconstruction_seed_list", r.reconstruction_seed_list},
              {"num_reconstructions", r.num_reconstructions}};
}

CycleScoreRecord record_from_json(const Json& j, const MediaStore& media) {
  auto direction = parse_direction(field(j, "direction").get<std::string>());
  CycleScoreRecord r{
      .condition = sample_from_json(field(j, "condition"), condition_modality(direction), media),
      .candidate = sample_from_json(field(j, "candidate"), candidate_modality(direction), media),
      .direction = direction,
      .score = field(j, "score").get<double>(),
      .forward_model_id = j.value("forward_model_id", std::string()),
      .backward_model_id = field(j, "backward_model_id").get<std::string>(),
      .similarity_metric_id = field(j, "similarity_metric_id").get<std::string>(),
      .reconstruction_seed_list = field(j, "reconstruction_seed_list").get<std::vector<std::int64_t>>(),
      .num_reconstructions = field(j, "num_reconstructions").get<int>(),
  };
  if (r.num_reconstructions < 1 || static_cast<std::size_t>(r.num_reconstructions) != r.reconstruction_seed_list.size()) {
    throw InvalidInput("num_reconstructions must equal the seed list length and be >= 1");
  }
  return r;
}

Json pair_to_json(const ComparisonPair& p) {
  return Json{{"condition", sample_to_json(p.condition)},
              {"preferred", sample_to_json(p.preferred)},
              {"rejected", sample_to_json(p.rejected)},
              {"direction", to_string(p.direction)},
              {"score_preferred", p.score_preferred},
              {"score_rejected", p.score_rejected},
              {"margin", p.margin},
              {"provenance", provenance_to_json(p.provenance)},
              {"split", to_string(p.split)}};
}

ComparisonPair pair_from_json(const Json& j, const MediaStore& media) {
  auto direction = parse_direction(field(j, "direction").get<std::string>());
  auto cand = candidate_modality(direction);
  return ComparisonPair{
      .condition = sample_from_json(field(j, "condition"), condition_modality(direction), media),
      .preferred = sample_from_json(field(j, "preferred"), cand, media),
      .rejected = sample_from_json(field(j, "rejected"), cand, media),
      .direction = direction,
      .score_preferred = field(j, "score_preferred").get<double>(),
      .score_rejected = field(j, "score_rejected").get<double>(),
      .margin = field(j, "margin").get<double>(),
      .provenance = provenance_from_json(field(j, "provenance")),
      .split = parse_split(j.value("split", std::string("train"))),
  };
}

Json filter_to_json(const FilterConfig& f) {
  return Json{{"tau_sim", f.tau_sim}, {"tau_neg", f.tau_neg}, {"dedup", f.dedup}};
}

FilterConfig filter_from_json(const Json& j) {
  return FilterConfig{.tau_sim = field(j, "tau_sim").get<double>(),
                      .tau_neg = field(j, "tau_neg").get<double>(),
                      .dedup = field(j, "dedup").get<bool>()};
}

Json stats_to_json(const DatasetStats& s) {
  return Json{{"raw_pairs", s.raw_pairs},
              {"deduped", s.deduped},
              {"dropped_low_margin", s.dropped_low_margin},
              {"dropped_low_positive", s.dropped_low_positive},
              {"kept", s.kept}};
}

DatasetStats stats_from_json(const Json& j) {
  return DatasetStats{.raw_pairs = field(j, "raw_pairs").get<std::size_t>(),
                      .deduped = field(j, "deduped").get<std::size_t>(),
                      .dropped_low_margin = field(j, "dropped_low_margin").get<std::size_t>(),
                      .dropped_low_positive = field(j, "dropped_low_positive").get<std::size_t>(),
                      .kept = field(j, "kept").get<std::size_t>()};
}

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) throw Error("failed while writing '" + path.string() + "'");
}

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  Hasher h;
  std::string buf(1 << 16, '\0');
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.finish().hex();
}

}  // namespace cyclepref::core
