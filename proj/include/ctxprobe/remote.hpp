#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include "ctxprobe/scorer.hpp"

namespace ctxprobe {

inline constexpr const char* kEndpointEnv = "CTXPROBE_ENDPOINT";

struct RemoteOptions {
  // "http://host:port". Empty falls back to $CTXPROBE_ENDPOINT.
  std::string endpoint;
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{250};
  std::size_t max_in_flight = 8;
  std::chrono::seconds timeout{60};
};

// Scorer that forwards requests to a /v1/score service. Transport failures
// and 503 are retried with exponential backoff; protocol violations and 4xx
// are not. score() is thread-safe; at most max_in_flight calls are on the
// wire at once.
class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(RemoteOptions options);
  ~RemoteScorer() override;

  Prediction score(const ScoreRequest& request) const override;
  std::string name() const override { return "remote:" + endpoint_; }
  // GET /v1/health body.
  std::string health() const;
  const std::string& endpoint() const noexcept { return endpoint_; }

 private:
  RemoteOptions options_;
  std::string endpoint_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// Serves a scorer behind the wire protocol. Binds on construction; use
// port 0 to pick a free port.
class MockServer {
 public:
  MockServer(std::shared_ptr<const Scorer> scorer, std::string host = "127.0.0.1", int port = 0);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const noexcept { return port_; }
  std::string endpoint() const { return "http://" + host_ + ":" + std::to_string(port_); }

  // Blocks until stop() is called from another thread.
  void serve();
  void start_background();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace ctxprobe
