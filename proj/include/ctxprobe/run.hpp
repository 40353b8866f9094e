#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxprobe/context_builder.hpp"
#include "ctxprobe/featurizer.hpp"
#include "json.hpp"

namespace ctxprobe {

inline constexpr const char* kSeedEnv = "CTXPROBE_SEED";

struct ScorerConfig {
  std::string type = "copy";  // copy | uniform | prior | remote
  double lambda = 0.9;
  double gate = 0.5;
  std::filesystem::path prior;
  std::string endpoint;  // remote; empty uses $CTXPROBE_ENDPOINT
};

// Everything a run needs. Paths in a config file are relative to the file.
struct RunConfig {
  std::filesystem::path facts;
  std::filesystem::path relations;
  std::filesystem::path vocab;
  std::string corpus_tag = "Other";
  std::filesystem::path corpus;     // paragraphs JSONL
  std::filesystem::path index;      // prebuilt index; built from corpus when empty
  std::filesystem::path generated;  // generated contexts JSONL
  std::vector<Strategy> strategies{Strategy::None};
  SegmentMode mode = SegmentMode::TwoSegment;
  QueryMode query_mode = QueryMode::Question;
  ScorerConfig scorer;
  std::uint64_t seed = 0;
  std::size_t concurrency = 1;
  std::filesystem::path out;
  std::size_t top_k = 10;
  std::size_t max_sentences = kDefaultMaxSentences;
  std::size_t recall_k_max = 10;  // 0 disables the recall curve
  std::uint32_t hash_bits = 24;
  std::uint32_t ngrams = 2;

  // Missing "seed" falls back to $CTXPROBE_SEED, then 0. Throws
  // ValidationError on unknown enum values or wrong types.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
  nlohmann::json to_json() const;

  // Throws ValidationError naming the first problem; touches no outputs.
  void validate() const;
  // FNV-1a 64 of the canonical config with concurrency and out removed, hex.
  std::string hash() const;
};

// Applies "a.b=value" to a JSON object. The value is parsed as JSON when
// possible, else kept as a string; comma lists become arrays for
// "strategies".
void apply_override(nlohmann::json& j, std::string_view assignment);

struct RunHooks {
  // Stop after this many newly scored records, leaving a resumable partial run.
  std::optional<std::size_t> stop_after;
  std::function<void(std::string_view)> log;
};

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 global failure or interrupted, 2 validation
  bool interrupted = false;
  std::filesystem::path manifest;
  std::vector<std::string> messages;
};

RunOutcome run(const RunConfig& config, const RunHooks& hooks = {});

std::filesystem::path predictions_path(const std::filesystem::path& out, Strategy s);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace ctxprobe
