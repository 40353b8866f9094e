#pragma once

#include <string>
#include <string_view>

#include "ctxprobe/scorer.hpp"
#include "json.hpp"

// JSON encoding of the /v1/score protocol:
//   request  {"id", "query", "context": str|null, "mode", "candidates": [str], "top_k"}
//   response {"id", "candidate_logprobs": [float], "top_k": [{"token","logprob"}], "nsp_prob": float|null}
namespace ctxprobe::wire {

nlohmann::json encode_request(const ScoreRequest& request);
// Throws InvalidArgument with a client-facing message.
ScoreRequest decode_request(const nlohmann::json& body);

nlohmann::json encode_response(const Prediction& prediction);
// Validates the response against the request it answers. Throws
// ProtocolError carrying an excerpt of the payload.
Prediction decode_response(std::string_view payload, const ScoreRequest& request);

std::string excerpt(std::string_view payload, std::size_t max_len = 200);

}  // namespace ctxprobe::wire
