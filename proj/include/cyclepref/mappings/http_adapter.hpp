#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

#include "cyclepref/core/media.hpp"
#include "cyclepref/mappings/mapping.hpp"

namespace cyclepref::mappings {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};
};

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 8088;

  // Accepts "http://host:port" or "host:port".
  static Endpoint parse(std::string_view url);
};

// POST `body` to `path`; retries connection failures and 5xx replies per
// `retry`. Returns the parsed 200 body. Throws TransportError when the server
// stays unreachable and GenerationError on a 4xx/5xx {"error": ...} reply.
nlohmann::json post_json(const Endpoint& ep, const std::string& path, const nlohmann::json& body, const RetryPolicy& retry,
                         std::chrono::seconds timeout = std::chrono::seconds(120));

// Client side of the generation wire protocol (POST /v1/generate).
class HttpMappingBackend final : public MappingBackend {
 public:
  HttpMappingBackend(Endpoint endpoint, core::MediaStore media, RetryPolicy retry = {}, int token_limit = kDefaultMaxTokens)
      : endpoint_(std::move(endpoint)), media_(std::move(media)), retry_(retry), token_limit_(token_limit) {}

  Sample generate(const MappingSpec& spec, const Sample& input) const override;
  int prompt_token_limit() const override { return token_limit_; }

  static nlohmann::json request_body(const MappingSpec& spec, const Sample& input);

 private:
  Endpoint endpoint_;
  core::MediaStore media_;
  RetryPolicy retry_;
  int token_limit_;
};

}  // namespace cyclepref::mappings
