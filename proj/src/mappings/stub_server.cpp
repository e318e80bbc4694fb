#include "cyclepref/mappings/stub_server.hpp"

#include <httplib.h>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/core/media.hpp"
#include "cyclepref/mappings/bitgrid.hpp"

namespace cyclepref::mappings {

using nlohmann::json;

struct StubServer::Impl {
  httplib::Server server;
};

namespace {

json error_body(const std::string& msg) { return json{{"error", msg}}; }

}  // namespace

StubServer::StubServer(int bits) : impl_(std::make_unique<Impl>()), bits_(bits) {
  auto& srv = impl_->server;
  srv.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    if (fail_next_.load() > 0) {
      --fail_next_;
      res.status = 503;
      res.set_content(error_body("temporarily unavailable").dump(), "application/json");
      return;
    }
    try {
      res.set_content(handle_generate(json::parse(req.body)).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  });
  srv.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    try {
      res.set_content(handle_embed(json::parse(req.body)).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()).dump(), "application/json");
    }
  });
}

StubServer::~StubServer() { stop(); }

int StubServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw TransportError("stub server could not bind " + host + ":" + std::to_string(port), 1, false);
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void StubServer::listen_blocking(const std::string& host, int port) {
  port_ = port;
  if (!impl_->server.listen(host, port)) throw TransportError("stub server could not listen on " + host + ":" + std::to_string(port), 1, false);
}

void StubServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

json StubServer::handle_generate(const json& req) {
  MappingSpec spec;
  spec.model_id = req.at("model_id").get<std::string>();
  spec.direction = core::parse_direction(req.at("direction").get<std::string>());
  spec.decoding.seed = req.value("seed", std::int64_t{0});
  spec.decoding.max_tokens = req.value("max_tokens", kDefaultMaxTokens);
  spec.decoding.temperature = req.value("temperature", 0.0);
  spec.decoding.top_p = req.value("top_p", 1.0);
  spec.prompt_template = req.value("prompt_template", std::string());
  if (!BitGridWorld::is_bitgrid_id(spec.model_id)) throw InvalidInput("stub only serves bitgrid:* models");

  const auto& in = req.at("input");
  core::MediaStore media;
  Sample input = in.contains("text") ? Sample::text(in.at("text").get<std::string>())
                                     : media.load_image(in.at("image_uri").get<std::string>());
  BitGridBackend backend;
  auto out = apply_mapping(backend, spec, input);
  json output = out.is_text() ? json{{"text", out.text_value()}}
                              : json{{"image_uri", out.uri()}, {"hash", out.content_hash().hex()}};
  return json{{"output", output}, {"model_id", spec.model_id}};
}

json StubServer::handle_embed(const json& req) const {
  auto modality = core::parse_modality(req.at("modality").get<std::string>());
  json vectors = json::array();
  for (const auto& item : req.at("inputs")) {
    std::vector<double> v;
    if (modality == core::Modality::image) {
      std::string bits = item.is_string() ? item.get<std::string>() : item.at("uri").get<std::string>();
      if (bits.starts_with("bitgrid:")) bits = bits.substr(8);
      for (auto b : parse_bits(bits)) v.push_back(b ? 1.0 : -1.0);
    } else {
      v.assign(static_cast<std::size_t>(bits_), 0.0);
      for (const auto& a : parse_assertions(item.get<std::string>(), bits_)) {
        v[static_cast<std::size_t>(a.index)] = a.bit ? 1.0 : -1.0;
      }
    }
    v.push_back(1.0);
    vectors.push_back(v);
  }
  auto dim = vectors.empty() ? 0 : vectors.front().size();
  return json{{"vectors", vectors}, {"dim", dim}};
}

}  // namespace cyclepref::mappings
