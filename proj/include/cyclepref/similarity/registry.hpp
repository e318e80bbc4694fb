#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cyclepref/core/sample.hpp"

namespace cyclepref::similarity {

using core::Modality;
using core::Sample;

// Similarity metrics are always oriented higher-is-more-similar.
struct MetricInfo {
  std::string metric_id;
  Modality modality = Modality::image;
  double lo = 0.0;
  double hi = 1.0;
};

using SimilarityFn = std::function<double(const Sample&, const Sample&)>;

// Distance in [0, max_distance] mapped to similarity 1 - d / max_distance.
SimilarityFn distance_to_similarity(std::function<double(const Sample&, const Sample&)> distance, double max_distance = 1.0);

// Built-in exact metrics over the bit-grid world.
inline constexpr const char* kBitgridHammingSim = "bitgrid-hamming-sim";    // image: fraction of equal bits
inline constexpr const char* kBitgridL2Sim = "bitgrid-l2-sim";              // image: 1 - ||a-b||_2 / sqrt(K)
inline constexpr const char* kBitgridOnesJaccard = "bitgrid-ones-jaccard";  // image: Jaccard over set bits
inline constexpr const char* kBitgridJaccard = "bitgrid-jaccard";           // text: Jaccard over assertion sets

double bitgrid_hamming_similarity(const Sample& a, const Sample& b);
double bitgrid_text_jaccard(const Sample& a, const Sample& b);

// Write-once registry: populate at startup, then share read-only.
class MetricRegistry {
 public:
  // Registry preloaded with the bit-grid metrics.
  static MetricRegistry with_builtins();

  // Throws RegistrationError on a duplicate id or a non-finite / empty range.
  const std::string& register_metric(MetricInfo info, SimilarityFn fn);

  bool contains(const std::string& metric_id) const { return metrics_.count(metric_id) != 0; }
  const MetricInfo& info(const std::string& metric_id) const;
  std::vector<std::string> ids() const;

  // Throws InvalidInput on a modality mismatch or unknown metric.
  double sim(const std::string& metric_id, const Sample& a, const Sample& b) const;

 private:
  struct Entry {
    MetricInfo info;
    SimilarityFn fn;
  };
  std::map<std::string, Entry> metrics_;
};

}  // namespace cyclepref::similarity
