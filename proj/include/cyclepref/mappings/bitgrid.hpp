#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cyclepref/mappings/mapping.hpp"

namespace cyclepref::mappings {

// Synthetic enumerable modality pair. An image is a K-bit vector; a text is a
// set of assertions "(index, bit)" written canonically as "{0:1,3:0}".
//
// Forward (image -> text): each bit is asserted with probability `coverage`;
// an asserted bit is reported wrong with probability `flip_rate`.
// Backward (text -> image): each assertion is realized with probability
// `coverage` (value flipped with probability `flip_rate`); every bit left
// unrealized is filled by `fill`.
enum class FillRule { zeros, seeded_uniform };

std::string_view to_string(FillRule f);
FillRule parse_fill_rule(std::string_view s);

inline constexpr int kMaxEnumerableBits = 12;

struct BitGridWorld {
  int bits = 16;
  double coverage = 1.0;
  double flip_rate = 0.0;
  FillRule fill = FillRule::zeros;

  // "bitgrid:k=8,rho=0.5,eps=0,fill=zeros"; doubles printed round-trip exact.
  std::string model_id() const;
  static BitGridWorld from_model_id(std::string_view id);
  static bool is_bitgrid_id(std::string_view id) { return id.starts_with("bitgrid:"); }

  void validate() const;

  friend bool operator==(const BitGridWorld&, const BitGridWorld&) = default;
};

using Bits = std::vector<std::uint8_t>;

struct Assertion {
  int index = 0;
  std::uint8_t bit = 0;
  friend bool operator==(const Assertion&, const Assertion&) = default;
};

using Assertions = std::vector<Assertion>;

std::string bits_to_string(const Bits& b);
Bits parse_bits(std::string_view s);
std::string assertions_to_string(const Assertions& a);
// Strict parse of the canonical form; indices must be increasing and < bits.
Assertions parse_assertions(std::string_view s, int bits);

Sample make_image(const Bits& b);
Sample make_text(const Assertions& a);
Bits image_bits(const Sample& s);
Assertions text_assertions(const Sample& s, int bits);

// Ground-truth alignment: correct assertions minus wrong assertions.
int true_alignment(const Bits& image, const Assertions& text);

// Backend serving bitgrid:* model ids. Temperature and top_p are ignored:
// every draw is a pure function of (input hash, seed).
class BitGridBackend final : public MappingBackend {
 public:
  Sample generate(const MappingSpec& spec, const Sample& input) const override;
  int prompt_token_limit() const override { return 4096; }

  static Assertions caption(const BitGridWorld& world, const Bits& image, std::int64_t seed, const core::Digest& salt,
                            int max_tokens);
  static Bits render(const BitGridWorld& world, const Assertions& text, std::int64_t seed, const core::Digest& salt);
};

struct Outcome {
  std::string payload;  // canonical text or bit string
  double probability = 0.0;
};

// Exact conditional distribution over the opposite modality. Entries with zero
// probability are omitted. Throws CapacityError when bits > 12.
struct ProbabilityTable {
  core::Modality outcome_modality = core::Modality::text;
  std::vector<Outcome> entries;

  double total() const;
  // 0 when absent.
  double probability_of(std::string_view payload) const;
};

ProbabilityTable enumerate_conditional(const BitGridWorld& world, const Sample& given);

// Closed-form p_F(text | image) and p_G(image | text).
double forward_probability(const BitGridWorld& world, const Bits& image, const Assertions& text);
double backward_probability(const BitGridWorld& world, const Assertions& text, const Bits& image);

}  // namespace cyclepref::mappings
