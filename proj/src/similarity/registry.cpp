#include "cyclepref/similarity/registry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/mappings/bitgrid.hpp"

namespace cyclepref::similarity {

namespace {

using mappings::Bits;

std::pair<Bits, Bits> paired_bits(const Sample& a, const Sample& b) {
  auto x = mappings::image_bits(a);
  auto y = mappings::image_bits(b);
  if (x.size() != y.size()) throw InvalidInput("bitgrid images differ in size");
  return {std::move(x), std::move(y)};
}

std::set<std::pair<int, int>> assertion_set(const Sample& s) {
  // Index bound is checked by the strict parser; any width works for comparison.
  std::set<std::pair<int, int>> out;
  for (const auto& a : mappings::parse_assertions(s.text_value(), 1 << 20)) out.emplace(a.index, a.bit);
  return out;
}

}  // namespace

SimilarityFn distance_to_similarity(std::function<double(const Sample&, const Sample&)> distance, double max_distance) {
  if (!(max_distance > 0.0) || !std::isfinite(max_distance)) throw InvalidInput("max_distance must be positive and finite");
  return [distance = std::move(distance), max_distance](const Sample& a, const Sample& b) {
    double d = std::clamp(distance(a, b) / max_distance, 0.0, 1.0);
    return 1.0 - d;
  };
}

double bitgrid_hamming_similarity(const Sample& a, const Sample& b) {
  auto [x, y] = paired_bits(a, b);
  std::size_t same = 0;
  for (std::size_t i = 0; i < x.size(); ++i) same += x[i] == y[i];
  return static_cast<double>(same) / static_cast<double>(x.size());
}

double bitgrid_text_jaccard(const Sample& a, const Sample& b) {
  auto sa = assertion_set(a);
  auto sb = assertion_set(b);
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& e : sa) inter += sb.count(e);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

MetricRegistry MetricRegistry::with_builtins() {
  MetricRegistry r;
  r.register_metric({kBitgridHammingSim, Modality::image, 0.0, 1.0}, bitgrid_hamming_similarity);
  r.register_metric({kBitgridL2Sim, Modality::image, 0.0, 1.0}, distance_to_similarity(
                                                                   [](const Sample& a, const Sample& b) {
                                                                     auto [x, y] = paired_bits(a, b);
                                                                     double sq = 0.0;
                                                                     for (std::size_t i = 0; i < x.size(); ++i) sq += x[i] != y[i];
                                                                     return std::sqrt(sq / static_cast<double>(x.size()));
                                                                   },
                                                                   1.0));
  r.register_metric({kBitgridOnesJaccard, Modality::image, 0.0, 1.0}, [](const Sample& a, const Sample& b) {
    auto [x, y] = paired_bits(a, b);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      inter += x[i] && y[i];
      uni += x[i] || y[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  });
  r.register_metric({kBitgridJaccard, Modality::text, 0.0, 1.0}, bitgrid_text_jaccard);
  return r;
}

const std::string& MetricRegistry::register_metric(MetricInfo info, SimilarityFn fn) {
  if (info.metric_id.empty()) throw RegistrationError("metric id must be non-empty");
  if (!std::isfinite(info.lo) || !std::isfinite(info.hi) || !(info.lo < info.hi)) {
    throw RegistrationError("metric '" + info.metric_id + "' needs a finite range with lo < hi");
  }
  if (!fn) throw RegistrationError("metric '" + info.metric_id + "' has no implementation");
  auto id = info.metric_id;
  auto [it, inserted] = metrics_.emplace(id, Entry{std::move(info), std::move(fn)});
  if (!inserted) throw RegistrationError("metric '" + id + "' is already registered");
  return it->first;
}

const MetricInfo& MetricRegistry::info(const std::string& metric_id) const {
  auto it = metrics_.find(metric_id);
  if (it == metrics_.end()) throw InvalidInput("unknown similarity metric '" + metric_id + "'");
  return it->second.info;
}

std::vector<std::string> MetricRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : metrics_) out.push_back(id);
  return out;
}

double MetricRegistry::sim(const std::string& metric_id, const Sample& a, const Sample& b) const {
  auto it = metrics_.find(metric_id);
  if (it == metrics_.end()) throw InvalidInput("unknown similarity metric '" + metric_id + "'");
  const auto& [info, fn] = it->second;
  if (a.modality() != info.modality || b.modality() != info.modality) {
    throw InvalidInput("metric '" + metric_id + "' compares " + std::string(core::to_string(info.modality)) + " samples");
  }
  double v = fn(a, b);
  if (!std::isfinite(v)) throw InvalidInput("metric '" + metric_id + "' produced a non-finite value");
  // Rounding can push exact endpoints a hair outside; nothing else is adjusted.
  return std::clamp(v, info.lo, info.hi);
}

}  // namespace cyclepref::similarity
