#include "ctxprobe/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ctxprobe/error.hpp"

namespace ctxprobe {

namespace {

std::set<std::string> content_words(std::span<const std::string> tokens, const StopwordSet& stopwords) {
  std::set<std::string> words;
  for (const auto& t : tokens) {
    if (t == kMaskToken) continue;
    auto key = match_key(t);
    if (key.empty() || stopwords.contains(key)) continue;
    words.insert(std::move(key));
  }
  return words;
}

std::optional<double> request_nsp(const ScoreRequest& request, const FeaturizedInput& fi) {
  if (!request.has_context()) return std::nullopt;
  return mock_nsp(fi.query_tokens(), fi.context_tokens());
}

}  // namespace

std::vector<TokenScore> rank_candidates(const Vocabulary& vocab, std::span<const double> logprobs, std::size_t k) {
  std::vector<std::size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (logprobs[a] != logprobs[b]) return logprobs[a] > logprobs[b];
                      return a < b;
                    });
  std::vector<TokenScore> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({vocab[order[i]], logprobs[order[i]]});
  return out;
}

Prediction make_prediction(std::string id, const Vocabulary& vocab, std::span<const double> probs, std::size_t top_k,
                           std::optional<double> nsp_prob) {
  if (probs.size() != vocab.size()) throw InvalidArgument("probability vector does not match candidates");
  double total = 0.0;
  for (double p : probs) total += p;
  if (!(total > 0.0) || !std::isfinite(total)) throw InvalidArgument("candidate probabilities do not normalize");

  Prediction pred;
  pred.fact_uuid = std::move(id);
  pred.candidate_logprobs.reserve(probs.size());
  for (double p : probs) pred.candidate_logprobs.push_back(std::log(p / total));
  pred.top_k = rank_candidates(vocab, pred.candidate_logprobs, std::max<std::size_t>(top_k, 1));
  pred.argmax_token = pred.top_k.front().token;
  pred.nsp_prob = nsp_prob;
  return pred;
}

FeaturizedInput validate_request(const ScoreRequest& request) {
  if (request.top_k < 1) throw InvalidArgument("top_k must be >= 1");
  if (!request.candidates || request.candidates->empty()) throw InvalidArgument("candidate vocabulary is empty");
  auto q = tokenize(request.query);
  std::vector<std::string> c;
  if (request.has_context()) c = tokenize(*request.context);
  return assemble(q, c, request.mode, {request.id, Strategy::None});
}

double mock_nsp(std::span<const std::string> query_tokens, std::span<const std::string> context_tokens,
                const StopwordSet& stopwords) {
  auto q = content_words(query_tokens, stopwords);
  auto c = content_words(context_tokens, stopwords);
  std::size_t inter = 0;
  for (const auto& w : q) inter += c.count(w);
  std::size_t uni = q.size() + c.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mock_nsp(std::string_view query_text, std::string_view context_text, const StopwordSet& stopwords) {
  return mock_nsp(tokenize(query_text), tokenize(context_text), stopwords);
}

bool nsp_classify(const Prediction& prediction) {
  if (!prediction.nsp_prob) throw InvalidArgument("prediction " + prediction.fact_uuid + " has no NSP probability");
  return *prediction.nsp_prob > kNspThreshold;
}

CandidatePrior::CandidatePrior(std::map<std::string, double, std::less<>> frequencies) : freq_(std::move(frequencies)) {
  for (const auto& [tok, f] : freq_) {
    if (!std::isfinite(f) || f < 0.0) throw InvalidArgument("prior frequency for '" + tok + "' is invalid");
  }
}

CandidatePrior CandidatePrior::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prior file " + path.string());
  std::map<std::string, double, std::less<>> freq;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    double f = 0.0;
    if (!(ss >> tok >> f)) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'token count'");
    freq[tok] += f;
  }
  return CandidatePrior(std::move(freq));
}

std::vector<double> CandidatePrior::over(const Vocabulary& vocab) const {
  std::vector<double> p(vocab.size(), 1.0 / static_cast<double>(vocab.size()));
  if (freq_.empty()) return p;
  double total = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = freq_.find(vocab[i]);
    if (it == freq_.end() || !(it->second > 0.0)) {
      throw InvalidArgument("prior has no positive frequency for candidate '" + vocab[i] + "'");
    }
    p[i] = it->second;
    total += it->second;
  }
  for (auto& v : p) v /= total;
  return p;
}

Prediction UniformScorer::score(const ScoreRequest& request) const {
  auto fi = validate_request(request);
  std::vector<double> p(request.candidates->size(), 1.0 / static_cast<double>(request.candidates->size()));
  return make_prediction(request.id, *request.candidates, p, request.top_k, request_nsp(request, fi));
}

Prediction PriorScorer::score(const ScoreRequest& request) const {
  auto fi = validate_request(request);
  return make_prediction(request.id, *request.candidates, prior_.over(*request.candidates), request.top_k,
                         request_nsp(request, fi));
}

CopyScorer::CopyScorer(CopyParams params) : params_(std::move(params)) {
  if (!(params_.lambda >= 0.0 && params_.lambda < 1.0)) throw InvalidArgument("copy lambda must be in [0, 1)");
  if (!(params_.gate_threshold >= 0.0 && params_.gate_threshold <= 1.0)) {
    throw InvalidArgument("gate threshold must be in [0, 1]");
  }
}

Prediction CopyScorer::score(const ScoreRequest& request) const {
  auto fi = validate_request(request);
  const auto& vocab = *request.candidates;
  auto nsp = request_nsp(request, fi);
  auto probs = params_.prior.over(vocab);

  bool gate_open = nsp.has_value() && (request.mode == SegmentMode::OneSegment || *nsp > params_.gate_threshold);
  if (gate_open) {
    std::unordered_map<std::string, std::size_t> occurrences;
    for (const auto& tok : fi.context_tokens()) ++occurrences[match_key(tok)];
    std::vector<double> counts(vocab.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      auto key = match_key(vocab[i]);
      if (key.empty()) continue;
      if (auto it = occurrences.find(key); it != occurrences.end()) {
        counts[i] = static_cast<double>(it->second);
        total += counts[i];
      }
    }
    if (total > 0.0) {
      for (std::size_t i = 0; i < vocab.size(); ++i) {
        probs[i] = params_.lambda * counts[i] / total + (1.0 - params_.lambda) * probs[i];
      }
    }
  }
  return make_prediction(request.id, vocab, probs, request.top_k, nsp);
}

std::unique_ptr<Scorer> make_mock_scorer(const MockSpec& spec) {
  if (spec.kind == "uniform") return std::make_unique<UniformScorer>();
  if (spec.kind == "prior") {
    if (spec.prior_path.empty()) throw InvalidArgument("prior scorer needs a prior file");
    return std::make_unique<PriorScorer>(CandidatePrior::load(spec.prior_path));
  }
  if (spec.kind == "copy") {
    CopyParams p{spec.lambda, spec.gate, {}};
    if (!spec.prior_path.empty()) p.prior = CandidatePrior::load(spec.prior_path);
    return std::make_unique<CopyScorer>(std::move(p));
  }
  throw InvalidArgument("unknown mock scorer '" + spec.kind + "'");
}

}  // namespace ctxprobe
