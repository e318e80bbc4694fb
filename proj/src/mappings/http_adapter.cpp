#include "cyclepref/mappings/http_adapter.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>

#include "cyclepref/core/errors.hpp"

namespace cyclepref::mappings {

using nlohmann::json;

Endpoint Endpoint::parse(std::string_view url) {
  if (url.starts_with("http://")) url.remove_prefix(7);
  while (url.ends_with('/')) url.remove_suffix(1);
  auto colon = url.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw InvalidInput("endpoint must look like host:port, got '" + std::string(url) + "'");
  Endpoint ep;
  ep.host = std::string(url.substr(0, colon));
  auto port = url.substr(colon + 1);
  auto res = std::from_chars(port.data(), port.data() + port.size(), ep.port);
  if (res.ec != std::errc() || res.ptr != port.data() + port.size() || ep.port <= 0 || ep.port > 65535) {
    throw InvalidInput("bad port in endpoint '" + std::string(url) + "'");
  }
  return ep;
}

json post_json(const Endpoint& ep, const std::string& path, const json& body, const RetryPolicy& retry,
               std::chrono::seconds timeout) {
  httplib::Client client(ep.host, ep.port);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto payload = body.dump();
  std::string last_error;
  int attempts = 0;
  for (int attempt = 1; attempt <= std::max(1, retry.max_attempts); ++attempt) {
    attempts = attempt;
    if (attempt > 1) std::this_thread::sleep_for(retry.backoff * (1 << (attempt - 2)));
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error&) {
      throw GenerationError("backend at " + ep.host + ":" + std::to_string(ep.port) + path + " returned non-JSON (status " +
                                std::to_string(res->status) + ")",
                            res->body);
    }
    if (res->status == 200) return reply;
    std::string message = reply.is_object() ? reply.value("error", std::string("unspecified error")) : res->body;
    if (res->status >= 500 && res->status != 501) {
      last_error = "status " + std::to_string(res->status) + ": " + message;
      continue;
    }
    throw GenerationError("backend refused request (status " + std::to_string(res->status) + "): " + message, message);
  }
  throw TransportError("backend " + ep.host + ":" + std::to_string(ep.port) + path + " unreachable after " +
                           std::to_string(attempts) + " attempt(s): " + last_error,
                       attempts, true);
}

json HttpMappingBackend::request_body(const MappingSpec& spec, const Sample& input) {
  json in = input.is_text() ? json{{"text", input.text_value()}} : json{{"image_uri", input.uri()}};
  return json{{"direction", core::to_string(spec.direction)},
              {"model_id", spec.model_id},
              {"input", in},
              {"seed", spec.decoding.seed},
              {"max_tokens", spec.decoding.max_tokens},
              {"temperature", spec.decoding.temperature},
              {"top_p", spec.decoding.top_p},
              {"prompt_template", spec.prompt_template}};
}

Sample HttpMappingBackend::generate(const MappingSpec& spec, const Sample& input) const {
  auto reply = post_json(endpoint_, "/v1/generate", request_body(spec, input), retry_);
  if (!reply.contains("output") || !reply["output"].is_object()) throw GenerationError("reply lacks an output object", reply.dump());
  const auto& out = reply["output"];
  try {
    if (out.contains("text")) return Sample::text(out["text"].get<std::string>());
    if (out.contains("image_uri")) {
      std::optional<core::Digest> expected;
      if (out.contains("hash")) expected = core::Digest::from_hex(out["hash"].get<std::string>());
      return media_.load_image(out["image_uri"].get<std::string>(), expected);
    }
  } catch (const InvalidInput& e) {
    throw GenerationError(std::string("malformed backend output: ") + e.what(), reply.dump());
  }
  throw GenerationError("reply output has neither text nor image_uri", reply.dump());
}

}  // namespace cyclepref::mappings
