#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cyclepref/core/sample.hpp"

namespace cyclepref::mappings {

using core::Direction;
using core::Sample;

// Default instructions for image-to-text models.
inline constexpr const char* kPromptBlip2 = "this is a picture of";
inline constexpr const char* kPromptLlava = "Write a detailed description of the given image.";
inline constexpr const char* kPromptInternVl2 = "Please describe the image in detail.";

// Maximum prompt length accepted by the text-to-image models in the loop.
inline constexpr int kDefaultMaxTokens = 77;

// Documented default backward mappings for real backends.
inline constexpr const char* kDefaultImageToTextBackward = "llava-1.5-13b";
inline constexpr const char* kDefaultTextToImageBackward = "stable-diffusion-3";

struct Decoding {
  std::int64_t seed = 0;
  int max_tokens = kDefaultMaxTokens;
  double temperature = 0.0;  // 0 = greedy
  double top_p = 1.0;

  // Settings used for best-of-N caption pools.
  static Decoding best_of_n_sampling(std::int64_t seed) { return Decoding{seed, kDefaultMaxTokens, 1.0, 0.7}; }

  friend bool operator==(const Decoding&, const Decoding&) = default;
};

struct MappingSpec {
  std::string model_id;
  Direction direction = Direction::i2t;
  Decoding decoding;
  std::string prompt_template = kPromptLlava;

  friend bool operator==(const MappingSpec&, const MappingSpec&) = default;
};

// Something that can run a directed generative mapping.
class MappingBackend {
 public:
  virtual ~MappingBackend() = default;

  virtual Sample generate(const MappingSpec& spec, const Sample& input) const = 0;

  // Largest max_tokens the backend accepts.
  virtual int prompt_token_limit() const { return kDefaultMaxTokens; }
};

// Checks the spec against the input and the backend, then generates.
// Throws InvalidInput on a modality or decoding violation; backend errors
// (TransportError, GenerationError) pass through.
Sample apply_mapping(const MappingBackend& backend, const MappingSpec& spec, const Sample& input);

struct Candidate {
  Sample sample;
  std::string model_id;
  std::int64_t seed = 0;
};

struct SpecFailure {
  std::string model_id;
  std::int64_t seed = 0;
  std::string message;
};

struct PoolResult {
  std::vector<Candidate> candidates;
  std::vector<SpecFailure> errors;

  bool complete() const { return errors.empty(); }
};

// Runs every spec with seeds spec.seed, spec.seed+1, ..., spec.seed+seeds_per_spec-1.
// Candidates are ordered by spec then seed and deduplicated by content hash,
// keeping the first position. When duplicates collide the surviving entry is
// attributed to the lexicographically smallest (model_id, seed).
PoolResult generate_candidate_pool(const MappingBackend& backend, const Sample& input, const std::vector<MappingSpec>& specs,
                                   int seeds_per_spec, std::size_t parallelism = 1);

// Runs fn(i) for i in [0, n) on up to `parallelism` threads. Results land in
// index order regardless of completion order.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace cyclepref::mappings
