#include <doctest.h>

#include "cyclepref/core/errors.hpp"
#include "cyclepref/mappings/bitgrid.hpp"
#include "cyclepref/mappings/http_adapter.hpp"
#include "cyclepref/mappings/stub_server.hpp"
#include "cyclepref/similarity/embedding.hpp"

using namespace cyclepref;
using namespace cyclepref::mappings;
using core::Direction;
using core::Sample;

namespace {

MappingSpec spec(const BitGridWorld& w, Direction d, std::int64_t seed = 0) {
  MappingSpec s;
  s.model_id = w.model_id();
  s.direction = d;
  s.decoding.seed = seed;
  return s;
}

RetryPolicy fast_retry(int attempts) { return RetryPolicy{attempts, std::chrono::milliseconds(1)}; }

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("request body follows the wire protocol") {
    auto s = spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t, 3);
    auto body = HttpMappingBackend::request_body(s, make_image(parse_bits("1010")));
    CHECK(body.at("direction") == "i2t");
    CHECK(body.at("model_id") == s.model_id);
    CHECK(body.at("input").at("image_uri") == "bitgrid:1010");
    CHECK(body.at("seed") == 3);
    CHECK(body.at("max_tokens") == 77);
    CHECK(body.at("temperature") == 0.0);
    CHECK(body.at("top_p") == 1.0);
    CHECK(body.at("prompt_template") == kPromptLlava);
    auto t = HttpMappingBackend::request_body(spec({4, 1.0, 0.0, FillRule::zeros}, Direction::t2i), Sample::text("{0:1}"));
    CHECK(t.at("input").at("text") == "{0:1}");
  }

  TEST_CASE("endpoint parsing") {
    auto e = Endpoint::parse("http://localhost:9000");
    CHECK(e.host == "localhost");
    CHECK(e.port == 9000);
    CHECK(Endpoint::parse("10.0.0.1:81").port == 81);
    CHECK_THROWS_AS(Endpoint::parse("http://nohost"), InvalidInput);
  }

  TEST_CASE("remote mapping equals the in-process world") {
    StubServer server(8);
    const int port = server.start();
    HttpMappingBackend remote(Endpoint{"127.0.0.1", port}, core::MediaStore(), fast_retry(2));
    BitGridBackend local;
    auto x = make_image(parse_bits("10110010"));
    for (std::int64_t seed = 0; seed < 5; ++seed) {
      auto f = spec({8, 0.6, 0.1, FillRule::seeded_uniform}, Direction::i2t, seed);
      auto y = apply_mapping(remote, f, x);
      CHECK(y == apply_mapping(local, f, x));
      auto g = spec({8, 0.6, 0.1, FillRule::seeded_uniform}, Direction::t2i, seed);
      CHECK(apply_mapping(remote, g, y) == apply_mapping(local, g, y));
    }
    server.stop();
  }

  TEST_CASE("transient 5xx replies are retried") {
    StubServer server(4);
    const int port = server.start();
    server.fail_next(2);
    HttpMappingBackend remote(Endpoint{"127.0.0.1", port}, core::MediaStore(), fast_retry(3));
    auto y = apply_mapping(remote, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t), make_image(parse_bits("1010")));
    CHECK(y.text_value() == "{0:1,1:0,2:1,3:0}");
    CHECK(server.request_count() == 3);
    server.stop();
  }

  TEST_CASE("persistent 5xx replies surface as a backend error") {
    StubServer server(4);
    const int port = server.start();
    server.fail_next(10);
    HttpMappingBackend remote(Endpoint{"127.0.0.1", port}, core::MediaStore(), fast_retry(2));
    CHECK_THROWS(apply_mapping(remote, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t), make_image(parse_bits("1010"))));
    CHECK(server.request_count() == 2);
    server.stop();
  }

  TEST_CASE("refused input carries the backend message") {
    StubServer server(4);
    const int port = server.start();
    HttpMappingBackend remote(Endpoint{"127.0.0.1", port}, core::MediaStore(), fast_retry(3));
    auto s = spec({4, 1.0, 0.0, FillRule::zeros}, Direction::t2i);
    s.model_id = "stable-diffusion-3";
    try {
      apply_mapping(remote, s, Sample::text("a cat"));
      FAIL("expected a generation error");
    } catch (const GenerationError& e) {
      CHECK(e.backend_message().find("bitgrid") != std::string::npos);
    }
    CHECK(server.request_count() == 1);
    server.stop();
  }

  TEST_CASE("unreachable backend raises a transport error with attempt count") {
    StubServer probe(4);
    const int port = probe.start();
    probe.stop();
    HttpMappingBackend remote(Endpoint{"127.0.0.1", port}, core::MediaStore(), fast_retry(2));
    try {
      apply_mapping(remote, spec({4, 1.0, 0.0, FillRule::zeros}, Direction::i2t), make_image(parse_bits("1010")));
      FAIL("expected a transport error");
    } catch (const TransportError& e) {
      CHECK(e.attempts() == 2);
      CHECK(e.retryable());
    }
  }

  TEST_CASE("embedding protocol and cosine metric over the stub") {
    StubServer server(4);
    const int port = server.start();
    auto backend = std::make_shared<similarity::HttpEmbeddingBackend>(Endpoint{"127.0.0.1", port}, fast_retry(2));
    auto vecs = backend->embed("toy", core::Modality::image, {make_image(parse_bits("0110"))});
    REQUIRE(vecs.size() == 1);
    CHECK(vecs[0] == std::vector<double>{-1, 1, 1, -1, 1});
    similarity::MetricRegistry r;
    similarity::register_embedding_cosine(r, "toy-text-cos", core::Modality::text, backend);
    CHECK(r.sim("toy-text-cos", Sample::text("{0:1}"), Sample::text("{0:1}")) == 1.0);
    CHECK(r.sim("toy-text-cos", Sample::text("{0:1}"), Sample::text("{0:0}")) == doctest::Approx(0.0));
    server.stop();
  }
}
