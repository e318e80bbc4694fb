#include "cyclepref/mappings/mapping.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <optional>
#include <thread>
#include <tuple>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::mappings {

Sample apply_mapping(const MappingBackend& backend, const MappingSpec& spec, const Sample& input) {
  if (input.modality() != core::condition_modality(spec.direction)) {
    throw InvalidInput("mapping '" + spec.model_id + "' (" + std::string(core::to_string(spec.direction)) + ") cannot take a " +
                       std::string(core::to_string(input.modality())) + " input");
  }
  const auto& d = spec.decoding;
  if (d.max_tokens < 1) throw InvalidInput("max_tokens must be positive");
  if (d.max_tokens > backend.prompt_token_limit()) {
    throw InvalidInput("max_tokens " + std::to_string(d.max_tokens) + " exceeds backend limit " +
                       std::to_string(backend.prompt_token_limit()));
  }
  if (!(d.temperature >= 0.0)) throw InvalidInput("temperature must be >= 0");
  if (!(d.top_p > 0.0 && d.top_p <= 1.0)) throw InvalidInput("top_p must lie in (0, 1]");
  auto out = backend.generate(spec, input);
  if (out.modality() != core::candidate_modality(spec.direction)) {
    throw GenerationError("backend returned the wrong modality", "");
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  if (parallelism <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> threads;
  for (std::size_t t = 0; t < std::min(parallelism, n); ++t) threads.emplace_back(worker);
  threads.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

PoolResult generate_candidate_pool(const MappingBackend& backend, const Sample& input, const std::vector<MappingSpec>& specs,
                                   int seeds_per_spec, std::size_t parallelism) {
  if (seeds_per_spec < 1) throw InvalidInput("seeds_per_spec must be positive");
  if (!specs.empty()) {
    auto dir = specs.front().direction;
    for (const auto& s : specs) {
      if (s.direction != dir) throw InvalidInput("all specs in a pool must share one direction");
    }
    if (input.modality() != core::condition_modality(dir)) throw InvalidInput("pool input modality does not match spec direction");
  }

  struct Job {
    const MappingSpec* spec;
    std::int64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& s : specs) {
    for (int k = 0; k < seeds_per_spec; ++k) jobs.push_back({&s, s.decoding.seed + k});
  }

  std::vector<std::optional<Sample>> outputs(jobs.size());
  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    auto spec = *jobs[i].spec;
    spec.decoding.seed = jobs[i].seed;
    try {
      outputs[i] = apply_mapping(backend, spec, input);
    } catch (const Error& e) {
      failures[i] = e.what();
      if (failures[i].empty()) failures[i] = "generation failed";
    }
  });

  PoolResult result;
  std::map<core::Digest, std::size_t> position;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& model = jobs[i].spec->model_id;
    if (!outputs[i]) {
      result.errors.push_back({model, jobs[i].seed, failures[i]});
      continue;
    }
    auto [it, inserted] = position.emplace(outputs[i]->content_hash(), result.candidates.size());
    if (inserted) {
      result.candidates.push_back({*outputs[i], model, jobs[i].seed});
      continue;
    }
    auto& kept = result.candidates[it->second];
    if (std::tie(model, jobs[i].seed) < std::tie(kept.model_id, kept.seed)) {
      kept.model_id = model;
      kept.seed = jobs[i].seed;
    }
  }
  return result;
}

}  // namespace cyclepref::mappings
