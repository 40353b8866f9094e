#include "ctxprobe/wire.hpp"

#include <cmath>

#include "ctxprobe/error.hpp"

namespace ctxprobe::wire {

using nlohmann::json;

nlohmann::json encode_request(const ScoreRequest& request) {
  json j;
  j["id"] = request.id;
  j["query"] = request.query;
  j["context"] = request.has_context() ? json(*request.context) : json(nullptr);
  j["mode"] = to_string(request.mode);
  j["candidates"] = request.candidates ? request.candidates->tokens() : std::vector<std::string>{};
  j["top_k"] = request.top_k;
  return j;
}

ScoreRequest decode_request(const nlohmann::json& body) {
  if (!body.is_object()) throw InvalidArgument("request body must be a JSON object");
  auto need_string = [&](const char* key) -> std::string {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string()) throw InvalidArgument(std::string("'") + key + "' must be a string");
    return it->get<std::string>();
  };
  ScoreRequest r;
  r.id = need_string("id");
  r.query = need_string("query");
  if (auto it = body.find("context"); it != body.end() && !it->is_null()) {
    if (!it->is_string()) throw InvalidArgument("'context' must be a string or null");
    r.context = it->get<std::string>();
  }
  r.mode = parse_segment_mode(need_string("mode"));
  auto cand = body.find("candidates");
  if (cand == body.end() || !cand->is_array() || cand->empty()) {
    throw InvalidArgument("'candidates' must be a non-empty array");
  }
  std::vector<std::string> tokens;
  tokens.reserve(cand->size());
  for (const auto& t : *cand) {
    if (!t.is_string()) throw InvalidArgument("candidates must be strings");
    tokens.push_back(t.get<std::string>());
  }
  r.candidates = std::make_shared<const Vocabulary>(std::move(tokens));
  auto k = body.find("top_k");
  if (k == body.end() || !k->is_number_integer() || k->get<long long>() < 1) {
    throw InvalidArgument("'top_k' must be a positive integer");
  }
  r.top_k = k->get<std::size_t>();
  return r;
}

nlohmann::json encode_response(const Prediction& prediction) {
  json top = json::array();
  for (const auto& t : prediction.top_k) top.push_back({{"token", t.token}, {"logprob", t.logprob}});
  return {{"id", prediction.fact_uuid},
          {"candidate_logprobs", prediction.candidate_logprobs},
          {"top_k", std::move(top)},
          {"nsp_prob", prediction.nsp_prob ? json(*prediction.nsp_prob) : json(nullptr)}};
}

std::string excerpt(std::string_view payload, std::size_t max_len) {
  if (payload.size() <= max_len) return std::string(payload);
  return std::string(payload.substr(0, max_len)) + "...";
}

Prediction decode_response(std::string_view payload, const ScoreRequest& request) {
  auto fail = [&](const std::string& why) -> ProtocolError {
    return ProtocolError("protocol violation (" + why + "): " + excerpt(payload));
  };
  auto j = json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw fail("not a JSON object");
  try {
    Prediction p;
    p.fact_uuid = j.at("id").get<std::string>();
    if (p.fact_uuid != request.id) throw fail("response id does not match request id");
    p.candidate_logprobs = j.at("candidate_logprobs").get<std::vector<double>>();
    const auto& vocab = *request.candidates;
    if (p.candidate_logprobs.size() != vocab.size()) throw fail("candidate_logprobs length mismatch");
    double mass = 0.0;
    for (double lp : p.candidate_logprobs) {
      if (!(lp <= 0.0) || std::isnan(lp)) throw fail("log-probability out of range");
      mass += std::exp(lp);
    }
    if (std::abs(mass - 1.0) > 1e-6) throw fail("candidate distribution does not sum to 1");
    for (const auto& t : j.at("top_k")) {
      p.top_k.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
    }
    if (p.top_k.empty()) throw fail("empty top_k");
    for (const auto& t : p.top_k) {
      if (!vocab.contains(t.token)) throw fail("top_k token '" + t.token + "' is not a candidate");
    }
    const auto& nsp = j.at("nsp_prob");
    if (!nsp.is_null()) {
      double v = nsp.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw fail("nsp_prob outside [0, 1]");
      p.nsp_prob = v;
    }
    p.argmax_token = rank_candidates(vocab, p.candidate_logprobs, 1).front().token;
    return p;
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
}

}  // namespace ctxprobe::wire
