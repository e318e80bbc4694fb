#include <cmath>
#include <limits>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/cyclescore/cyclescore.hpp"

namespace cyclepref::cyclescore {

namespace {

using mappings::Bits;

std::size_t image_index(const Bits& b) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < b.size(); ++i) idx |= static_cast<std::size_t>(b[i]) << i;
  return idx;
}

Bits image_from_index(std::size_t idx, int bits) {
  Bits b(static_cast<std::size_t>(bits));
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>((idx >> i) & 1U);
  return b;
}

double checked_log(double p, const char* factor) {
  if (!(p > 0.0)) throw UndefinedLog(std::string("log of zero probability: ") + factor + " = 0", factor);
  return std::log(p);
}

}  // namespace

JointScore joint_distributional_score(const mappings::BitGridWorld& world, const Sample& image, const Sample& text,
                                      const std::vector<double>& prior) {
  world.validate();
  if (world.bits > mappings::kMaxEnumerableBits) {
    throw CapacityError("joint distributional score needs an enumerable world (bits <= " +
                        std::to_string(mappings::kMaxEnumerableBits) + ")");
  }
  const std::size_t space = std::size_t{1} << world.bits;
  if (!prior.empty() && prior.size() != space) throw InvalidInput("prior must have 2^K entries");
  auto prior_of = [&](std::size_t idx) { return prior.empty() ? 1.0 / static_cast<double>(space) : prior[idx]; };

  auto x = mappings::image_bits(image);
  if (static_cast<int>(x.size()) != world.bits) throw InvalidInput("image bit count does not match the world");
  auto y = mappings::text_assertions(text, world.bits);

  const double p_x = prior_of(image_index(x));
  const double p_y_given_x = mappings::forward_probability(world, x, y);
  const double p_xy = p_x * p_y_given_x;

  // Marginal p(y) and posterior p(x | y) by enumerating every image.
  double p_y = 0.0;
  for (std::size_t idx = 0; idx < space; ++idx) {
    double w = prior_of(idx);
    if (w == 0.0) continue;
    p_y += w * mappings::forward_probability(world, image_from_index(idx, world.bits), y);
  }

  JointScore s;
  s.log_p_x = checked_log(p_x, "p(x)");
  s.log_p_y_given_x = checked_log(p_y_given_x, "p(y|x)");
  s.log_p_y = checked_log(p_y, "p(y)");
  s.log_p_xy = checked_log(p_xy, "p(x,y)");
  s.log_p_x_given_y = checked_log(p_xy / p_y, "p(x|y)");
  s.pmi = s.log_p_xy - s.log_p_x - s.log_p_y;
  s.joint_score = s.log_p_x_given_y + s.log_p_y_given_x;
  return s;
}

}  // namespace cyclepref::cyclescore
