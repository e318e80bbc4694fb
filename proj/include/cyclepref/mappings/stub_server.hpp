#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

namespace cyclepref::mappings {

// HTTP server speaking the generation and embedding wire protocols over the
// bit-grid world, for desk tests of the adapters.
//
//   POST /v1/generate  model_id must be a bitgrid:* id
//   POST /v1/embed     image "0110" -> [-1,1,1,-1,1]; text -> per-index
//                      +1/-1/0 for asserted 1/asserted 0/unasserted, plus a
//                      trailing constant 1 so no vector is zero
class StubServer {
 public:
  explicit StubServer(int bits = 16);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop().
  void listen_blocking(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::size_t request_count() const { return requests_.load(); }

  // Makes the next `n` generate calls answer 503 (for retry tests).
  void fail_next(int n) { fail_next_ = n; }

  // Protocol handlers, callable without a socket.
  static nlohmann::json handle_generate(const nlohmann::json& req);
  nlohmann::json handle_embed(const nlohmann::json& req) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int bits_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<int> fail_next_{0};
};

}  // namespace cyclepref::mappings
