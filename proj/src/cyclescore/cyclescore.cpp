#include "cyclepref/cyclescore/cyclescore.hpp"

#include <optional>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::cyclescore {

std::vector<std::int64_t> ScorerConfig::reconstruction_seeds() const {
  std::vector<std::int64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(std::max(num_reconstructions, 0)));
  for (int n = 0; n < num_reconstructions; ++n) seeds.push_back(seed_base + n);
  return seeds;
}

void ScorerConfig::validate(const similarity::MetricRegistry& metrics) const {
  if (num_reconstructions < 1) throw InvalidInput("num_reconstructions must be >= 1");
  if (backward.direction == direction) {
    throw InvalidInput("backward mapping must run opposite to the scored direction (" +
                       std::string(core::to_string(direction)) + " scoring needs a " +
                       std::string(core::to_string(core::opposite(direction))) + " backward mapping)");
  }
  const auto& info = metrics.info(metric_id);
  if (info.modality != core::condition_modality(direction)) {
    throw InvalidInput("metric '" + metric_id + "' compares " + std::string(core::to_string(info.modality)) +
                       " samples but " + std::string(core::to_string(direction)) + " scoring compares " +
                       std::string(core::to_string(core::condition_modality(direction))) + " samples");
  }
}

CycleScoreRecord cycle_score(const ScoringContext& ctx, const ScorerConfig& cfg, const Sample& condition, const Sample& candidate,
                             const std::string& forward_model_id) {
  cfg.validate(ctx.metrics);
  if (condition.modality() != core::condition_modality(cfg.direction) ||
      candidate.modality() != core::candidate_modality(cfg.direction)) {
    throw InvalidInput("condition/candidate modalities do not match " + std::string(core::to_string(cfg.direction)));
  }

  auto seeds = cfg.reconstruction_seeds();
  std::vector<std::optional<double>> sims(seeds.size());
  std::vector<std::string> errors(seeds.size());
  mappings::parallel_for(seeds.size(), ctx.parallelism, [&](std::size_t n) {
    auto spec = cfg.backward;
    spec.decoding.seed = seeds[n];
    try {
      auto recon = mappings::apply_mapping(ctx.backend, spec, candidate);
      sims[n] = ctx.metrics.sim(cfg.metric_id, condition, recon);
    } catch (const Error& e) {
      errors[n] = e.what();
    }
  });

  std::vector<std::int64_t> failed;
  std::string first_error;
  double total = 0.0;
  for (std::size_t n = 0; n < seeds.size(); ++n) {
    if (!sims[n]) {
      failed.push_back(seeds[n]);
      if (first_error.empty()) first_error = errors[n];
      continue;
    }
    total += *sims[n];
  }
  if (!failed.empty()) {
    throw ScoringError("backward reconstruction failed for " + std::to_string(failed.size()) + " of " +
                           std::to_string(seeds.size()) + " seed(s): " + first_error,
                       failed);
  }

  return CycleScoreRecord{
      .condition = condition,
      .candidate = candidate,
      .direction = cfg.direction,
      .score = total / static_cast<double>(seeds.size()),
      .forward_model_id = forward_model_id,
      .backward_model_id = cfg.backward.model_id,
      .similarity_metric_id = cfg.metric_id,
      .reconstruction_seed_list = seeds,
      .num_reconstructions = cfg.num_reconstructions,
  };
}

CycleScoreRecord mean_cycle_score(const ScoringContext& ctx, const ScorerConfig& cfg, const Sample& condition,
                                  const Sample& candidate, const std::string& forward_model_id) {
  return cycle_score(ctx, cfg, condition, candidate, forward_model_id);
}

CycleScoreRecord rescore(const ScoringContext& ctx, const CycleScoreRecord& record, const mappings::Decoding& decoding) {
  const auto& seeds = record.reconstruction_seed_list;
  if (seeds.empty()) throw InvalidInput("record has no reconstruction seeds");
  for (std::size_t i = 1; i < seeds.size(); ++i) {
    if (seeds[i] != seeds[0] + static_cast<std::int64_t>(i)) throw InvalidInput("record seeds are not consecutive");
  }
  ScorerConfig cfg;
  cfg.direction = record.direction;
  cfg.backward.model_id = record.backward_model_id;
  cfg.backward.direction = core::opposite(record.direction);
  cfg.backward.decoding = decoding;
  cfg.metric_id = record.similarity_metric_id;
  cfg.num_reconstructions = record.num_reconstructions;
  cfg.seed_base = seeds[0];
  return cycle_score(ctx, cfg, record.condition, record.candidate, record.forward_model_id);
}

}  // namespace cyclepref::cyclescore
