#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cyclepref/mappings/http_adapter.hpp"
#include "cyclepref/similarity/registry.hpp"

namespace cyclepref::similarity {

// Source of embedding vectors for a metric.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<std::vector<double>> embed(const std::string& metric_id, Modality modality,
                                                 const std::vector<Sample>& inputs) const = 0;
};

// Client for POST /v1/embed.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(mappings::Endpoint endpoint, mappings::RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)), retry_(retry) {}

  std::vector<std::vector<double>> embed(const std::string& metric_id, Modality modality,
                                         const std::vector<Sample>& inputs) const override;

 private:
  mappings::Endpoint endpoint_;
  mappings::RetryPolicy retry_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

// Registers a cosine-over-embeddings metric with range [-1, 1]. Embeddings are
// memoized per content hash.
const std::string& register_embedding_cosine(MetricRegistry& registry, const std::string& metric_id, Modality modality,
                                             std::shared_ptr<const EmbeddingBackend> backend);

}  // namespace cyclepref::similarity
