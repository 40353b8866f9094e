#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxprobe/featurizer.hpp"
#include "ctxprobe/text.hpp"
#include "ctxprobe/vocabulary.hpp"

namespace ctxprobe {

struct ScoreRequest {
  std::string id;
  std::string query;
  // Absent (or empty) means no context.
  std::optional<std::string> context;
  SegmentMode mode = SegmentMode::TwoSegment;
  std::shared_ptr<const Vocabulary> candidates;
  std::size_t top_k = 10;

  bool has_context() const { return context && !context->empty(); }
};

struct TokenScore {
  std::string token;
  double logprob = 0.0;

  friend bool operator==(const TokenScore&, const TokenScore&) = default;
};

struct Prediction {
  std::string fact_uuid;
  // Natural-log probabilities in candidate order, normalized over candidates.
  std::vector<double> candidate_logprobs;
  std::vector<TokenScore> top_k;
  std::optional<double> nsp_prob;
  std::string argmax_token;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Ranks candidates by log-probability, ties in vocabulary order.
std::vector<TokenScore> rank_candidates(const Vocabulary& vocab, std::span<const double> logprobs, std::size_t k);

// Normalizes `probs` over the candidates and fills logprobs, top-k and argmax.
Prediction make_prediction(std::string id, const Vocabulary& vocab, std::span<const double> probs,
                           std::size_t top_k, std::optional<double> nsp_prob);

class Scorer {
 public:
  virtual ~Scorer() = default;
  // Throws InvalidArgument for requests that break the request contract.
  virtual Prediction score(const ScoreRequest& request) const = 0;
  virtual std::string name() const = 0;
};

// Checks top_k, candidates and the featurizer contract; returns the layout
// the scorer sees.
FeaturizedInput validate_request(const ScoreRequest& request);

// Jaccard overlap of lowercased content-word sets (punctuation-only tokens,
// stopwords and the mask dropped). Empty union gives 0.
double mock_nsp(std::span<const std::string> query_tokens, std::span<const std::string> context_tokens,
                const StopwordSet& stopwords = *default_stopwords());
double mock_nsp(std::string_view query_text, std::string_view context_text,
                const StopwordSet& stopwords = *default_stopwords());

// nsp_prob > 0.5. Throws InvalidArgument when the prediction has no NSP value.
bool nsp_classify(const Prediction& prediction);

inline constexpr double kNspThreshold = 0.5;

// Unigram prior over candidates. Empty frequency table means uniform.
class CandidatePrior {
 public:
  CandidatePrior() = default;
  explicit CandidatePrior(std::map<std::string, double, std::less<>> frequencies);
  // TSV or whitespace-separated "token count" lines.
  static CandidatePrior load(const std::filesystem::path& path);

  bool uniform() const noexcept { return freq_.empty(); }
  // Normalized prior over `vocab`. Throws InvalidArgument if a candidate has
  // no positive frequency.
  std::vector<double> over(const Vocabulary& vocab) const;

 private:
  std::map<std::string, double, std::less<>> freq_;
};

class UniformScorer final : public Scorer {
 public:
  Prediction score(const ScoreRequest& request) const override;
  std::string name() const override { return "uniform"; }
};

class PriorScorer final : public Scorer {
 public:
  explicit PriorScorer(CandidatePrior prior) : prior_(std::move(prior)) {}
  Prediction score(const ScoreRequest& request) const override;
  std::string name() const override { return "prior"; }

 private:
  CandidatePrior prior_;
};

struct CopyParams {
  double lambda = 0.9;
  double gate_threshold = kNspThreshold;
  CandidatePrior prior;
};

// Mixes a copy distribution over candidate occurrences in the context with
// the prior:  P(t) = lambda * count(t) / total + (1 - lambda) * prior(t).
// In two_segment and separator_only modes the context is used only when
// mock_nsp exceeds the gate threshold; one_segment always uses it. With the
// gate closed or no candidate occurring, P(t) = prior(t).
class CopyScorer final : public Scorer {
 public:
  explicit CopyScorer(CopyParams params = {});
  Prediction score(const ScoreRequest& request) const override;
  std::string name() const override { return "copy"; }
  const CopyParams& params() const noexcept { return params_; }

 private:
  CopyParams params_;
};

struct MockSpec {
  std::string kind = "copy";  // copy | uniform | prior
  double lambda = 0.9;
  double gate = kNspThreshold;
  std::string prior_path;  // optional for copy, required for prior
};

std::unique_ptr<Scorer> make_mock_scorer(const MockSpec& spec);

}  // namespace ctxprobe
