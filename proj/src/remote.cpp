#include "ctxprobe/remote.hpp"

#include <cstdlib>

#include "ctxprobe/error.hpp"
#include "ctxprobe/wire.hpp"
#include "httplib.h"

namespace ctxprobe {

using nlohmann::json;

namespace {

httplib::Client make_client(const std::string& endpoint, std::chrono::seconds timeout) {
  httplib::Client cli(endpoint);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

}  // namespace

RemoteScorer::RemoteScorer(RemoteOptions options) : options_(std::move(options)) {
  endpoint_ = options_.endpoint;
  if (endpoint_.empty()) {
    if (const char* env = std::getenv(kEndpointEnv)) endpoint_ = env;
  }
  if (endpoint_.empty()) throw InvalidArgument("no scorer endpoint configured (set CTXPROBE_ENDPOINT)");
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  if (options_.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
  auto bound = static_cast<std::ptrdiff_t>(std::max<std::size_t>(options_.max_in_flight, 1));
  in_flight_ = std::make_unique<std::counting_semaphore<>>(bound);
}

RemoteScorer::~RemoteScorer() = default;

Prediction RemoteScorer::score(const ScoreRequest& request) const {
  if (!request.candidates || request.candidates->empty()) throw InvalidArgument("candidate vocabulary is empty");
  const auto body = wire::encode_request(request).dump();

  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{*in_flight_};

  std::string last_error;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
    auto cli = make_client(endpoint_, options_.timeout);
    auto res = cli.Post("/v1/score", body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 503) {
      last_error = "service unavailable (503)";
      continue;
    }
    if (res->status != 200) {
      throw ProtocolError("HTTP " + std::to_string(res->status) + " from " + endpoint_ + ": " +
                          wire::excerpt(res->body));
    }
    return wire::decode_response(res->body, request);
  }
  throw TransportError("scoring request " + request.id + " failed after " + std::to_string(options_.max_attempts) +
                       " attempts: " + last_error);
}

std::string RemoteScorer::health() const {
  auto cli = make_client(endpoint_, options_.timeout);
  auto res = cli.Get("/v1/health");
  if (!res) throw TransportError("health check failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProtocolError("health check returned HTTP " + std::to_string(res->status));
  return res->body;
}

struct MockServer::Impl {
  httplib::Server server;
  std::shared_ptr<const Scorer> scorer;
};

MockServer::MockServer(std::shared_ptr<const Scorer> scorer, std::string host, int port)
    : impl_(std::make_unique<Impl>()), host_(std::move(host)) {
  impl_->scorer = std::move(scorer);
  auto* impl = impl_.get();

  impl->server.Get("/v1/health", [impl](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"model", impl->scorer->name()}}.dump(), "application/json");
  });

  impl->server.Post("/v1/score", [impl](const httplib::Request& req, httplib::Response& res) {
    auto bad = [&](const std::string& msg) {
      res.status = 400;
      res.set_content(json{{"error", msg}}.dump(), "application/json");
    };
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return bad("request body is not valid JSON");
    try {
      auto request = wire::decode_request(body);
      auto prediction = impl->scorer->score(request);
      res.set_content(wire::encode_response(prediction).dump(), "application/json");
    } catch (const InvalidArgument& e) {
      bad(e.what());
    } catch (const QueryTooLong& e) {
      bad(e.what());
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  if (port == 0) {
    port_ = impl->server.bind_to_any_port(host_);
  } else {
    port_ = impl->server.bind_to_port(host_, port) ? port : -1;
  }
  if (port_ <= 0) throw Error("cannot bind mock server on " + host_ + ":" + std::to_string(port));
}

MockServer::~MockServer() { stop(); }

void MockServer::serve() { impl_->server.listen_after_bind(); }

void MockServer::start_background() {
  thread_ = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void MockServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ctxprobe
