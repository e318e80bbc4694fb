#include "cyclepref/mappings/bitgrid.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/rng.hpp"

namespace cyclepref::mappings {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidInput("bad value for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidInput("bad value for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

double fill_probability(FillRule fill, std::uint8_t v) {
  if (fill == FillRule::zeros) return v == 0 ? 1.0 : 0.0;
  return 0.5;
}

// p_G(x_i = v) for one bit, given the assertion on that index (if any).
double backward_bit_probability(const BitGridWorld& w, const Assertion* a, std::uint8_t v) {
  double fill = fill_probability(w.fill, v);
  if (a == nullptr) return fill;
  double realized = a->bit == v ? 1.0 - w.flip_rate : w.flip_rate;
  return w.coverage * realized + (1.0 - w.coverage) * fill;
}

// p_F of the caption's state at one index: unasserted, or asserting `bit`.
double forward_bit_probability(const BitGridWorld& w, std::uint8_t image_bit, const Assertion* a) {
  if (a == nullptr) return 1.0 - w.coverage;
  return w.coverage * (a->bit == image_bit ? 1.0 - w.flip_rate : w.flip_rate);
}

std::vector<const Assertion*> by_index(const Assertions& text, int bits) {
  std::vector<const Assertion*> slot(static_cast<std::size_t>(bits), nullptr);
  for (const auto& a : text) slot[static_cast<std::size_t>(a.index)] = &a;
  return slot;
}

}  // namespace

std::string_view to_string(FillRule f) { return f == FillRule::zeros ? "zeros" : "seeded_uniform"; }

FillRule parse_fill_rule(std::string_view s) {
  if (s == "zeros") return FillRule::zeros;
  if (s == "seeded_uniform") return FillRule::seeded_uniform;
  throw InvalidInput("unknown fill rule '" + std::string(s) + "'");
}

std::string BitGridWorld::model_id() const {
  return "bitgrid:k=" + std::to_string(bits) + ",rho=" + format_double(coverage) + ",eps=" + format_double(flip_rate) +
         ",fill=" + std::string(to_string(fill));
}

BitGridWorld BitGridWorld::from_model_id(std::string_view id) {
  if (!is_bitgrid_id(id)) throw InvalidInput("not a bitgrid model id: '" + std::string(id) + "'");
  BitGridWorld w;
  auto rest = id.substr(8);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view() : rest.substr(comma + 1);
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InvalidInput("bad bitgrid parameter '" + std::string(item) + "'");
    auto key = item.substr(0, eq);
    auto value = item.substr(eq + 1);
    if (key == "k") {
      w.bits = parse_int(value, key);
    } else if (key == "rho") {
      w.coverage = parse_double(value, key);
    } else if (key == "eps") {
      w.flip_rate = parse_double(value, key);
    } else if (key == "fill") {
      w.fill = parse_fill_rule(value);
    } else {
      throw InvalidInput("unknown bitgrid parameter '" + std::string(key) + "'");
    }
  }
  w.validate();
  return w;
}

void BitGridWorld::validate() const {
  if (bits < 1 || bits > 4096) throw InvalidInput("bitgrid bits must be in [1, 4096]");
  if (!(coverage >= 0.0 && coverage <= 1.0)) throw InvalidInput("coverage must lie in [0, 1]");
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) throw InvalidInput("flip_rate must lie in [0, 1]");
}

std::string bits_to_string(const Bits& b) {
  std::string s;
  s.reserve(b.size());
  for (auto v : b) s.push_back(v ? '1' : '0');
  return s;
}

Bits parse_bits(std::string_view s) {
  if (s.empty()) throw InvalidInput("empty bit string");
  Bits b;
  b.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw InvalidInput("bit string may only contain 0 and 1");
    b.push_back(c == '1');
  }
  return b;
}

std::string assertions_to_string(const Assertions& a) {
  std::string s = "{";
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s.push_back(',');
    s += std::to_string(a[i].index);
    s.push_back(':');
    s.push_back(a[i].bit ? '1' : '0');
  }
  s.push_back('}');
  return s;
}

Assertions parse_assertions(std::string_view s, int bits) {
  if (s.size() < 2 || s.front() != '{' || s.back() != '}') throw InvalidInput("bitgrid text must be wrapped in braces");
  Assertions out;
  auto body = s.substr(1, s.size() - 2);
  while (!body.empty()) {
    auto comma = body.find(',');
    auto item = body.substr(0, comma);
    body = comma == std::string_view::npos ? std::string_view() : body.substr(comma + 1);
    if (comma != std::string_view::npos && body.empty()) throw InvalidInput("trailing comma in bitgrid text");
    auto colon = item.find(':');
    if (colon == std::string_view::npos || colon + 2 != item.size()) throw InvalidInput("bad assertion '" + std::string(item) + "'");
    int index = parse_int(item.substr(0, colon), "assertion index");
    char bit = item[colon + 1];
    if (bit != '0' && bit != '1') throw InvalidInput("assertion bit must be 0 or 1");
    if (index < 0 || index >= bits) throw InvalidInput("assertion index " + std::to_string(index) + " outside [0, " + std::to_string(bits) + ")");
    if (!out.empty() && out.back().index >= index) throw InvalidInput("assertions must be sorted by strictly increasing index");
    out.push_back({index, static_cast<std::uint8_t>(bit == '1')});
  }
  return out;
}

Sample make_image(const Bits& b) {
  auto s = bits_to_string(b);
  return Sample::image(s, "bitgrid:" + s);
}

Sample make_text(const Assertions& a) { return Sample::text(assertions_to_string(a)); }

Bits image_bits(const Sample& s) {
  if (!s.is_image()) throw InvalidInput("expected a bitgrid image");
  return parse_bits(s.payload());
}

Assertions text_assertions(const Sample& s, int bits) { return parse_assertions(s.text_value(), bits); }

int true_alignment(const Bits& image, const Assertions& text) {
  int score = 0;
  for (const auto& a : text) {
    if (static_cast<std::size_t>(a.index) >= image.size()) throw InvalidInput("assertion index outside the image");
    score += image[static_cast<std::size_t>(a.index)] == a.bit ? 1 : -1;
  }
  return score;
}

Assertions BitGridBackend::caption(const BitGridWorld& world, const Bits& image, std::int64_t seed, const core::Digest& salt,
                                   int max_tokens) {
  core::Rng rng(static_cast<std::uint64_t>(seed), salt);
  Assertions out;
  for (std::size_t i = 0; i < image.size(); ++i) {
    // Both draws are always taken so the stream position never depends on outcomes.
    double u_cover = rng.uniform();
    double u_flip = rng.uniform();
    if (u_cover < world.coverage) {
      std::uint8_t bit = image[i] ^ static_cast<std::uint8_t>(u_flip < world.flip_rate);
      out.push_back({static_cast<int>(i), bit});
    }
  }
  if (out.size() > static_cast<std::size_t>(max_tokens)) out.resize(static_cast<std::size_t>(max_tokens));
  return out;
}

Bits BitGridBackend::render(const BitGridWorld& world, const Assertions& text, std::int64_t seed, const core::Digest& salt) {
  core::Rng rng(static_cast<std::uint64_t>(seed), salt);
  auto slot = by_index(text, world.bits);
  Bits out(static_cast<std::size_t>(world.bits), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double u_real = rng.uniform();
    double u_flip = rng.uniform();
    double u_fill = rng.uniform();
    if (slot[i] != nullptr && u_real < world.coverage) {
      out[i] = slot[i]->bit ^ static_cast<std::uint8_t>(u_flip < world.flip_rate);
    } else {
      out[i] = world.fill == FillRule::zeros ? 0 : static_cast<std::uint8_t>(u_fill < 0.5);
    }
  }
  return out;
}

Sample BitGridBackend::generate(const MappingSpec& spec, const Sample& input) const {
  auto world = BitGridWorld::from_model_id(spec.model_id);
  // Each model draws its own stream for a given (input, seed).
  const auto salt = core::Hasher().update(input.content_hash()).update(world.model_id()).finish();
  if (spec.direction == Direction::i2t) {
    auto bits = image_bits(input);
    if (static_cast<int>(bits.size()) != world.bits) {
      throw GenerationError("image has " + std::to_string(bits.size()) + " bits, world expects " + std::to_string(world.bits),
                            "bit count mismatch");
    }
    return make_text(caption(world, bits, spec.decoding.seed, salt, spec.decoding.max_tokens));
  }
  Assertions text;
  try {
    text = text_assertions(input, world.bits);
  } catch (const InvalidInput& e) {
    throw GenerationError(std::string("backend refused text: ") + e.what(), e.what());
  }
  return make_image(render(world, text, spec.decoding.seed, salt));
}

double ProbabilityTable::total() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.probability;
  return s;
}

double ProbabilityTable::probability_of(std::string_view payload) const {
  for (const auto& e : entries) {
    if (e.payload == payload) return e.probability;
  }
  return 0.0;
}

ProbabilityTable enumerate_conditional(const BitGridWorld& world, const Sample& given) {
  world.validate();
  if (world.bits > kMaxEnumerableBits) {
    throw CapacityError("bitgrid world with " + std::to_string(world.bits) + " bits is too large to enumerate (max " +
                        std::to_string(kMaxEnumerableBits) + ")");
  }
  const auto k = static_cast<std::size_t>(world.bits);
  ProbabilityTable table;

  if (given.is_image()) {
    auto image = image_bits(given);
    if (image.size() != k) throw InvalidInput("image bit count does not match the world");
    table.outcome_modality = core::Modality::text;
    // Per index: unasserted, asserted correctly, asserted wrongly.
    Assertions current;
    std::function<void(std::size_t, double)> walk = [&](std::size_t i, double p) {
      if (p == 0.0) return;
      if (i == k) {
        table.entries.push_back({assertions_to_string(current), p});
        return;
      }
      walk(i + 1, p * (1.0 - world.coverage));
      current.push_back({static_cast<int>(i), image[i]});
      walk(i + 1, p * world.coverage * (1.0 - world.flip_rate));
      current.back().bit = image[i] ^ 1;
      walk(i + 1, p * world.coverage * world.flip_rate);
      current.pop_back();
    };
    walk(0, 1.0);
    return table;
  }

  auto text = text_assertions(given, world.bits);
  auto slot = by_index(text, world.bits);
  table.outcome_modality = core::Modality::image;
  Bits current(k, 0);
  std::function<void(std::size_t, double)> walk = [&](std::size_t i, double p) {
    if (p == 0.0) return;
    if (i == k) {
      table.entries.push_back({bits_to_string(current), p});
      return;
    }
    for (std::uint8_t v : {0, 1}) {
      current[i] = v;
      walk(i + 1, p * backward_bit_probability(world, slot[i], v));
    }
  };
  walk(0, 1.0);
  return table;
}

double forward_probability(const BitGridWorld& world, const Bits& image, const Assertions& text) {
  if (static_cast<int>(image.size()) != world.bits) throw InvalidInput("image bit count does not match the world");
  auto slot = by_index(text, world.bits);
  double p = 1.0;
  for (std::size_t i = 0; i < image.size(); ++i) p *= forward_bit_probability(world, image[i], slot[i]);
  return p;
}

double backward_probability(const BitGridWorld& world, const Assertions& text, const Bits& image) {
  if (static_cast<int>(image.size()) != world.bits) throw InvalidInput("image bit count does not match the world");
  auto slot = by_index(text, world.bits);
  double p = 1.0;
  for (std::size_t i = 0; i < image.size(); ++i) p *= backward_bit_probability(world, slot[i], image[i]);
  return p;
}

}  // namespace cyclepref::mappings
