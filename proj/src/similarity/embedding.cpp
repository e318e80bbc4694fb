#include "cyclepref/similarity/embedding.hpp"

#include <cmath>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/serialize.hpp"

namespace cyclepref::similarity {

std::vector<std::vector<double>> HttpEmbeddingBackend::embed(const std::string& metric_id, Modality modality,
                                                             const std::vector<Sample>& inputs) const {
  nlohmann::json payload = nlohmann::json::array();
  for (const auto& s : inputs) payload.push_back(core::sample_to_json(s));
  auto reply = mappings::post_json(
      endpoint_, "/v1/embed", {{"metric_id", metric_id}, {"modality", core::to_string(modality)}, {"inputs", payload}}, retry_);
  auto vectors = reply.at("vectors").get<std::vector<std::vector<double>>>();
  if (vectors.size() != inputs.size()) throw GenerationError("embedding backend returned the wrong number of vectors", reply.dump());
  auto dim = reply.value("dim", vectors.empty() ? std::size_t{0} : vectors.front().size());
  for (const auto& v : vectors) {
    if (v.size() != dim) throw GenerationError("embedding dimension mismatch", reply.dump());
  }
  return vectors;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw InvalidInput("cosine needs equal-length non-empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw InvalidInput("cosine of a zero vector is undefined");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

class CachedEmbedder {
 public:
  CachedEmbedder(std::string metric_id, Modality modality, std::shared_ptr<const EmbeddingBackend> backend)
      : metric_id_(std::move(metric_id)), modality_(modality), backend_(std::move(backend)) {}

  std::vector<double> get(const Sample& s) {
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(s.content_hash());
      if (it != cache_.end()) return it->second;
    }
    auto v = backend_->embed(metric_id_, modality_, {s}).at(0);
    std::lock_guard lock(mu_);
    cache_.emplace(s.content_hash(), v);
    return v;
  }

 private:
  std::string metric_id_;
  Modality modality_;
  std::shared_ptr<const EmbeddingBackend> backend_;
  std::mutex mu_;
  std::map<core::Digest, std::vector<double>> cache_;
};

}  // namespace

const std::string& register_embedding_cosine(MetricRegistry& registry, const std::string& metric_id, Modality modality,
                                             std::shared_ptr<const EmbeddingBackend> backend) {
  auto embedder = std::make_shared<CachedEmbedder>(metric_id, modality, std::move(backend));
  return registry.register_metric({metric_id, modality, -1.0, 1.0}, [embedder](const Sample& a, const Sample& b) {
    if (a.content_hash() == b.content_hash()) return 1.0;
    return cosine(embedder->get(a), embedder->get(b));
  });
}

}  // namespace cyclepref::similarity
