#include "cyclepref/core/records.hpp"

#include <cmath>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::core {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvalidInput("unknown split '" + std::string(s) + "'");
}

FilterConfig FilterConfig::defaults_for(Direction d) {
  FilterConfig f;
  f.tau_neg = d == Direction::i2t ? 0.7 : 0.4;
  return f;
}

std::vector<std::string> validate_pair(const ComparisonPair& p) {
  std::vector<std::string> violations;
  if (!std::isfinite(p.score_preferred) || !std::isfinite(p.score_rejected)) {
    violations.emplace_back("scores must be finite");
  } else if (!(p.score_preferred > p.score_rejected)) {
    violations.emplace_back("strict preference required");
  }
  if (!(p.margin >= 0.0)) violations.emplace_back("margin must be non-negative");
  if (std::abs(p.margin - (p.score_preferred - p.score_rejected)) > kMarginTolerance) {
    violations.emplace_back("margin mismatch");
  }
  if (p.preferred.content_hash() == p.rejected.content_hash()) {
    violations.emplace_back("preferred and rejected are the same content");
  }
  auto cond = condition_modality(p.direction);
  auto cand = candidate_modality(p.direction);
  if (p.condition.modality() != cond) violations.emplace_back("condition modality inconsistent with direction");
  if (p.preferred.modality() != cand || p.rejected.modality() != cand) {
    violations.emplace_back("candidate modality inconsistent with direction");
  }
  if (p.provenance.num_reconstructions < 1 ||
      static_cast<std::size_t>(p.provenance.num_reconstructions) != p.provenance.reconstruction_seed_list.size()) {
    violations.emplace_back("reconstruction seed list does not match num_reconstructions");
  }
  return violations;
}

}  // namespace cyclepref::core
