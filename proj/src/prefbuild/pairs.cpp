#include <algorithm>
#include <set>
#include <tuple>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/prefbuild/prefbuild.hpp"

namespace cyclepref::prefbuild {

std::vector<ComparisonPair> build_pairs(const Sample& condition, const std::vector<CycleScoreRecord>& scored,
                                        std::size_t max_pairs) {
  if (scored.size() < 2) return {};
  const auto direction = scored.front().direction;
  for (const auto& r : scored) {
    if (r.condition.content_hash() != condition.content_hash()) throw InvalidInput("records mix different conditions");
    if (r.direction != direction) throw InvalidInput("records mix directions");
  }

  std::vector<ComparisonPair> pairs;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    for (std::size_t j = i + 1; j < scored.size(); ++j) {
      const auto* hi = &scored[i];
      const auto* lo = &scored[j];
      if (hi->score == lo->score) continue;
      if (hi->score < lo->score) std::swap(hi, lo);
      if (hi->candidate.content_hash() == lo->candidate.content_hash()) continue;
      pairs.push_back(ComparisonPair{
          .condition = condition,
          .preferred = hi->candidate,
          .rejected = lo->candidate,
          .direction = direction,
          .score_preferred = hi->score,
          .score_rejected = lo->score,
          .margin = hi->score - lo->score,
          .provenance =
              core::PairProvenance{
                  .forward_model_id = hi->forward_model_id,
                  .rejected_forward_model_id = lo->forward_model_id,
                  .backward_model_id = hi->backward_model_id,
                  .similarity_metric_id = hi->similarity_metric_id,
                  .reconstruction_seed_list = hi->reconstruction_seed_list,
                  .num_reconstructions = hi->num_reconstructions,
              },
      });
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const ComparisonPair& a, const ComparisonPair& b) {
    return std::make_tuple(-a.score_preferred, a.preferred.content_hash(), -a.score_rejected, a.rejected.content_hash()) <
           std::make_tuple(-b.score_preferred, b.preferred.content_hash(), -b.score_rejected, b.rejected.content_hash());
  });
  if (max_pairs > 0 && pairs.size() > max_pairs) pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(max_pairs), pairs.end());
  return pairs;
}

PreferenceDataset filter_pairs(const std::vector<ComparisonPair>& pairs, const FilterConfig& cfg, Direction direction) {
  PreferenceDataset out;
  out.direction = direction;
  out.filter_config = cfg;
  out.stats.raw_pairs = pairs.size();
  std::set<std::tuple<core::Digest, core::Digest, core::Digest>> seen;
  for (const auto& p : pairs) {
    if (p.direction != direction) throw InvalidInput("pair direction differs from the dataset direction");
    if (cfg.dedup && !seen.emplace(p.condition.content_hash(), p.preferred.content_hash(), p.rejected.content_hash()).second) {
      ++out.stats.deduped;
    } else if (p.margin < cfg.tau_sim) {
      ++out.stats.dropped_low_margin;
    } else if (p.score_preferred < cfg.tau_neg) {
      ++out.stats.dropped_low_positive;
    } else {
      out.pairs.push_back(p);
    }
  }
  out.stats.kept = out.pairs.size();
  return out;
}

}  // namespace cyclepref::prefbuild
