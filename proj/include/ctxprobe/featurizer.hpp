#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxprobe/context_builder.hpp"

namespace ctxprobe {

inline constexpr std::size_t kMaxSequenceLength = 512;
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

// How query and context share the input:
//   two_segment    [CLS] q [SEP] c [SEP], segment 0 through the first SEP, 1 after
//   one_segment    [CLS] q c [SEP], all segment 0
//   separator_only [CLS] q [SEP] c [SEP], all segment 0 (eos-separated models)
enum class SegmentMode { TwoSegment, OneSegment, SeparatorOnly };

std::string_view to_string(SegmentMode m) noexcept;
SegmentMode parse_segment_mode(std::string_view name);

struct FeaturizedInput {
  std::vector<std::string> tokens;
  std::vector<std::uint8_t> segment_ids;
  std::size_t mask_index = 0;
  SegmentMode mode = SegmentMode::TwoSegment;
  std::string fact_uuid;
  Strategy strategy = Strategy::None;
  // Half-open spans of the query and (possibly truncated) context tokens.
  std::size_t query_begin = 0, query_end = 0;
  std::size_t context_begin = 0, context_end = 0;

  std::span<const std::string> query_tokens() const {
    return std::span(tokens).subspan(query_begin, query_end - query_begin);
  }
  std::span<const std::string> context_tokens() const {
    return std::span(tokens).subspan(context_begin, context_end - context_begin);
  }
};

// Reference tokenizer: whitespace split, leading and trailing ASCII
// punctuation peeled off one character per token, "[MASK]" kept whole.
std::vector<std::string> tokenize(std::string_view text);

struct Provenance {
  std::string fact_uuid;
  Strategy strategy = Strategy::None;
};

// Lays out query and context per `mode`. The query is never truncated; the
// context loses tokens from its tail until the sequence fits max_length. A
// context truncated to nothing produces the no-context layout [CLS] q [SEP].
// Throws InvalidArgument unless the query holds exactly one mask and the
// context none; QueryTooLong if [CLS] q [SEP] alone exceeds max_length.
FeaturizedInput assemble(std::span<const std::string> query_tokens, std::span<const std::string> context_tokens,
                         SegmentMode mode, const Provenance& provenance = {},
                         std::size_t max_length = kMaxSequenceLength);

}  // namespace ctxprobe
