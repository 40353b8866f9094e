#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxprobe/corpus_index.hpp"
#include "ctxprobe/probe_data.hpp"

namespace ctxprobe {

enum class Strategy { None, Oracle, Retrieved, Adversarial, Generated };

std::string_view to_string(Strategy s) noexcept;
// "none", "oracle", "retrieved", "adversarial", "generated". Throws
// InvalidArgument otherwise.
Strategy parse_strategy(std::string_view name);

struct Context {
  std::string fact_uuid;
  Strategy strategy = Strategy::None;
  std::string text;
  // para_id, donor uuid, or generated-file tag.
  std::string source_id;
  bool answer_present = false;
  // Retrieval produced nothing usable; text is empty.
  bool miss = false;
};

inline constexpr std::size_t kDefaultMaxSentences = 5;

// Token-level, case-insensitive membership after stripping leading/trailing
// punctuation on both sides. No substring matching.
bool answer_in_context(std::string_view context_text, std::string_view answer);

Context no_context(const Fact& fact);

// First max_sentences sentences of the fact's evidence, joined by single
// spaces. Throws MissingEvidence.
Context oracle_context(const Fact& fact, std::size_t max_sentences = kDefaultMaxSentences);

enum class QueryMode { Question, Cloze };
std::string_view to_string(QueryMode m) noexcept;
QueryMode parse_query_mode(std::string_view name);

// Text sent to the retriever: the natural question, or the cloze statement
// with the mask placeholder removed.
std::string retrieval_query(const Fact& fact, QueryMode mode);

// Top-1 paragraph for the fact's retrieval query. Empty results and
// zero-score hits come back as a flagged miss with empty text.
Context retrieved_context(const Fact& fact, const TfidfIndex& index, const ParagraphStore& store,
                          QueryMode mode = QueryMode::Question);

// Draws adversarial donors: same relation, different answer, different uuid,
// non-empty evidence. Each fact gets its own RNG stream seeded with
// seed ^ fnv1a64(uuid), so results do not depend on evaluation order.
class AdversarialSampler {
 public:
  AdversarialSampler(const FactSet& facts, std::uint64_t seed);

  // Throws NoDonor when no eligible donor exists.
  const Fact& donor_for(const Fact& fact) const;
  Context sample(const Fact& fact, std::size_t max_sentences = kDefaultMaxSentences) const;

 private:
  const FactSet& facts_;
  std::uint64_t seed_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_relation_;
};

Context adversarial_context(const Fact& fact, const FactSet& facts, std::uint64_t seed,
                            std::size_t max_sentences = kDefaultMaxSentences);

// Uniform integer in [0, bound) from a 64-bit stream, by rejection. Portable
// across standard libraries, unlike std::uniform_int_distribution.
std::size_t uniform_index(std::uint64_t& state, std::size_t bound);

struct GeneratedImport {
  std::map<std::string, Context> contexts;
  // Facts with no generated entry, in fact order.
  std::vector<std::string> missing;
  std::vector<RecordIssue> issues;
};

// Generated-contexts JSONL: {"uuid", "text"}.
GeneratedImport import_generated(const std::filesystem::path& path, const FactSet& facts);

struct ContextSources {
  const TfidfIndex* index = nullptr;
  const ParagraphStore* store = nullptr;
  const GeneratedImport* generated = nullptr;
  QueryMode query_mode = QueryMode::Question;
  std::uint64_t seed = 0;
  std::size_t max_sentences = kDefaultMaxSentences;
};

struct ContextSkip {
  std::string uuid;
  std::string reason;
};

struct ContextBatch {
  // Aligned with FactSet::facts; empty where the fact was skipped.
  std::vector<std::optional<Context>> contexts;
  std::vector<ContextSkip> skipped;
};

// One context per fact for `strategy`. Per-fact failures (missing evidence,
// no donor, no generated entry, missing question template) become skips.
// Throws InvalidArgument when the strategy's source is not supplied.
ContextBatch build_contexts(Strategy strategy, const FactSet& facts, const ContextSources& sources,
                            std::size_t threads = 1);

// Contexts file: JSONL {"uuid","strategy","text","source_id","answer_present"}.
void write_contexts(const std::filesystem::path& path, const std::vector<Context>& contexts);
std::vector<Context> read_contexts(const std::filesystem::path& path);

}  // namespace ctxprobe
