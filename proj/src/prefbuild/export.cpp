#include "cyclepref/core/errors.hpp"
#include "cyclepref/prefbuild/prefbuild.hpp"

namespace cyclepref::prefbuild {

using core::Json;

std::string_view to_string(DpoFlavor f) { return f == DpoFlavor::vl_instruct ? "vl_instruct" : "t2i_pairs"; }

DpoFlavor parse_dpo_flavor(std::string_view s) {
  if (s == "vl_instruct") return DpoFlavor::vl_instruct;
  if (s == "t2i_pairs") return DpoFlavor::t2i_pairs;
  throw InvalidInput("unknown DPO flavor '" + std::string(s) + "'");
}

std::vector<Json> export_dpo(const PreferenceDataset& dataset, DpoFlavor flavor, const std::string& instruction) {
  const auto wanted = flavor == DpoFlavor::vl_instruct ? Direction::i2t : Direction::t2i;
  if (dataset.direction != wanted) {
    throw InvalidInput(std::string(to_string(flavor)) + " export needs a " + std::string(core::to_string(wanted)) +
                       " dataset, got " + std::string(core::to_string(dataset.direction)));
  }
  std::vector<Json> rows;
  rows.reserve(dataset.pairs.size());
  for (const auto& p : dataset.pairs) {
    if (flavor == DpoFlavor::vl_instruct) {
      rows.push_back({{"image", core::sample_to_json(p.condition)},
                      {"instruction", instruction},
                      {"chosen", p.preferred.text_value()},
                      {"rejected", p.rejected.text_value()}});
    } else {
      rows.push_back({{"caption", p.condition.text_value()},
                      {"preferred", core::sample_to_json(p.preferred)},
                      {"rejected", core::sample_to_json(p.rejected)}});
    }
  }
  return rows;
}

std::vector<HashTriple> import_dpo(const std::vector<Json>& rows, DpoFlavor flavor, const core::MediaStore& media) {
  std::vector<HashTriple> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (flavor == DpoFlavor::vl_instruct) {
      out.push_back({core::sample_from_json(r.at("image"), core::Modality::image, media).content_hash(),
                     Sample::text(r.at("chosen").get<std::string>()).content_hash(),
                     Sample::text(r.at("rejected").get<std::string>()).content_hash()});
    } else {
      out.push_back({Sample::text(r.at("caption").get<std::string>()).content_hash(),
                     core::sample_from_json(r.at("preferred"), core::Modality::image, media).content_hash(),
                     core::sample_from_json(r.at("rejected"), core::Modality::image, media).content_hash()});
    }
  }
  return out;
}

}  // namespace cyclepref::prefbuild
