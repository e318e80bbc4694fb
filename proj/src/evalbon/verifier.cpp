#include <algorithm>
#include <numeric>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/evalbon/evalbon.hpp"

namespace cyclepref::evalbon {

Verifier Verifier::reward_model(std::shared_ptr<const reward::RewardModel> model, Direction direction) {
  if (!model) throw InvalidInput("reward-model verifier needs a model");
  return Verifier(Kind::reward_model, direction, [model, direction](const Sample& cond, const Sample& cand) {
    return direction == Direction::i2t ? model->reward(cond, cand) : model->reward(cand, cond);
  });
}

Verifier Verifier::raw_cycle(cyclescore::ScorerConfig cfg, const mappings::MappingBackend& backend,
                             const similarity::MetricRegistry& metrics) {
  cfg.validate(metrics);
  const Direction d = cfg.direction;
  return Verifier(Kind::raw_cycle, d, [cfg = std::move(cfg), &backend, &metrics](const Sample& cond, const Sample& cand) {
    cyclescore::ScoringContext ctx{backend, metrics, 1};
    return cyclescore::cycle_score(ctx, cfg, cond, cand).score;
  });
}

Verifier Verifier::function(ScoreFn fn, Direction direction) {
  if (!fn) throw InvalidInput("function verifier needs a callable");
  return Verifier(Kind::function, direction, std::move(fn));
}

double Verifier::score(const Sample& condition, const Sample& candidate) const {
  if (condition.modality() != core::condition_modality(direction_) ||
      candidate.modality() != core::candidate_modality(direction_)) {
    throw InvalidInput("sample modalities do not match verifier direction " + std::string(core::to_string(direction_)));
  }
  return fn_(condition, candidate);
}

std::vector<double> Verifier::score_pool(const Sample& condition, const std::vector<Sample>& pool,
                                         std::size_t parallelism) const {
  std::vector<double> scores(pool.size());
  mappings::parallel_for(pool.size(), parallelism, [&](std::size_t i) { scores[i] = score(condition, pool[i]); });
  return scores;
}

std::vector<std::size_t> rank_by_score(const std::vector<Sample>& pool, const std::vector<double>& scores) {
  if (pool.size() != scores.size()) throw InvalidInput("pool and score table differ in size");
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pool[a].content_hash() < pool[b].content_hash();
  });
  return order;
}

BestOfN best_of_n_from_scores(const std::vector<Sample>& pool, const std::vector<double>& scores) {
  if (pool.empty()) throw InvalidInput("best-of-n needs a non-empty pool");
  const auto modality = pool.front().modality();
  for (const auto& s : pool) {
    if (s.modality() != modality) throw InvalidInput("pool mixes modalities");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ScoringError("verifier returned NaN", {});
  }
  auto ranking = rank_by_score(pool, scores);
  return BestOfN{ranking.front(), pool[ranking.front()], scores, std::move(ranking)};
}

BestOfN best_of_n(const Verifier& v, const Sample& condition, const std::vector<Sample>& pool, std::size_t parallelism) {
  if (pool.empty()) throw InvalidInput("best-of-n needs a non-empty pool");
  return best_of_n_from_scores(pool, v.score_pool(condition, pool, parallelism));
}

}  // namespace cyclepref::evalbon
