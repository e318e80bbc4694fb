#include <cmath>
#include <map>
#include <mutex>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/prefbuild/prefbuild.hpp"

namespace cyclepref::prefbuild {

void SplitRatios::validate() const {
  for (double r : as_array()) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("split ratios must each lie in [0, 1]");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) throw InvalidInput("split ratios must sum to 1");
}

Split assign_split(const core::Digest& condition_hash, std::uint64_t split_seed, const SplitRatios& ratios) {
  core::Hasher h;
  h.update(condition_hash).update_u64(split_seed);
  const double u = static_cast<double>(h.finish().prefix64() >> 11) * 0x1.0p-53;
  if (u < ratios.train) return Split::train;
  if (u < ratios.train + ratios.val) return Split::val;
  return Split::test;
}

namespace {

AssemblyResult pairs_from_groups(std::map<core::Digest, std::vector<CycleScoreRecord>> groups, Direction direction,
                                 const AssembleOptions& opts) {
  opts.splits.validate();
  std::vector<ComparisonPair> raw;
  for (const auto& [hash, records] : groups) {
    if (records.empty()) continue;
    const auto split = assign_split(hash, opts.split_seed, opts.splits);
    for (auto& p : build_pairs(records.front().condition, records, opts.max_pairs_per_condition)) {
      p.split = split;
      raw.push_back(std::move(p));
    }
  }
  AssemblyResult result;
  result.num_conditions = groups.size();
  if (opts.apply_filter) {
    result.dataset = filter_pairs(raw, opts.filter, direction);
  } else {
    result.dataset.direction = direction;
    result.dataset.stats.raw_pairs = raw.size();
    result.dataset.stats.kept = raw.size();
    result.dataset.pairs = std::move(raw);
  }
  return result;
}

}  // namespace

AssemblyResult assemble_from_scores(const std::vector<CycleScoreRecord>& records, Direction direction,
                                    const AssembleOptions& opts) {
  std::map<core::Digest, std::vector<CycleScoreRecord>> groups;
  for (const auto& r : records) {
    if (r.direction != direction) throw InvalidInput("score record direction differs from the requested direction");
    groups[r.condition.content_hash()].push_back(r);
  }
  return pairs_from_groups(std::move(groups), direction, opts);
}

AssemblyResult assemble_dataset(const cyclescore::ScoringContext& ctx, const std::vector<ConditionPool>& pools,
                                const cyclescore::ScorerConfig& scorer, const AssembleOptions& opts) {
  opts.splits.validate();
  scorer.validate(ctx.metrics);

  struct PoolOutcome {
    std::vector<CycleScoreRecord> records;
    std::vector<CandidateFailure> failures;
  };
  std::vector<PoolOutcome> outcomes(pools.size());
  // Pools run concurrently; reconstructions within a pool stay sequential.
  cyclescore::ScoringContext inner{ctx.backend, ctx.metrics, 1};
  mappings::parallel_for(pools.size(), ctx.parallelism, [&](std::size_t i) {
    const auto& pool = pools[i];
    auto& out = outcomes[i];
    for (const auto& cand : pool.candidates) {
      try {
        out.records.push_back(cyclescore::cycle_score(inner, scorer, pool.condition, cand.sample, cand.model_id));
      } catch (const ScoringError& e) {
        out.failures.push_back({pool.condition.content_hash().hex(), cand.sample.content_hash().hex(), e.failed_seeds(), e.what()});
      }
    }
  });

  std::map<core::Digest, std::vector<CycleScoreRecord>> groups;
  std::vector<SkippedCondition> skipped;
  std::vector<CandidateFailure> failures;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    auto& out = outcomes[i];
    const auto& hash = pools[i].condition.content_hash();
    failures.insert(failures.end(), out.failures.begin(), out.failures.end());
    if (out.records.empty()) {
      skipped.push_back({hash.hex(), pools[i].candidates.empty() ? "empty candidate pool" : "all candidates failed scoring"});
      continue;
    }
    auto& group = groups[hash];
    group.insert(group.end(), out.records.begin(), out.records.end());
  }

  auto result = pairs_from_groups(std::move(groups), scorer.direction, opts);
  result.num_conditions = pools.size();
  result.skipped = std::move(skipped);
  result.failures = std::move(failures);
  return result;
}

std::vector<ComparisonPair> pairs_in_split(const PreferenceDataset& d, Split s) {
  std::vector<ComparisonPair> out;
  for (const auto& p : d.pairs) {
    if (p.split == s) out.push_back(p);
  }
  return out;
}

}  // namespace cyclepref::prefbuild
