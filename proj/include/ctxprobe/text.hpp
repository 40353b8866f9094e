#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace ctxprobe {

inline constexpr std::string_view kMaskToken = "[MASK]";

using StopwordSet = std::unordered_set<std::string>;

// English stopword list compiled into the library. Identical to
// data/stopwords.txt.
const std::shared_ptr<const StopwordSet>& default_stopwords();

// One lowercase word per line; blank lines and lines starting with '#' are
// skipped.
std::shared_ptr<const StopwordSet> load_stopwords(const std::filesystem::path& path);

// 32-bit FNV-1a over the raw bytes.
constexpr std::uint32_t fnv1a32(std::string_view bytes) noexcept {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool is_ascii_punct(char c) noexcept;
std::string ascii_lower(std::string_view s);
std::string_view trim(std::string_view s) noexcept;

// Split on runs of ASCII whitespace.
std::vector<std::string_view> split_whitespace(std::string_view text);

// Lowercase and strip leading/trailing ASCII punctuation. This is the
// matching key used for answer membership and copy counts.
std::string match_key(std::string_view token);

// True iff some whitespace-separated token of `text` has the same match_key
// as `token`. Empty keys never match.
bool contains_token(std::string_view text, std::string_view token);

// Sentence boundaries: '.', '!' or '?' followed by whitespace and then an
// uppercase ASCII letter, or by end of text. Sentences are trimmed; empty ones
// are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// Replace every occurrence of `from` in `text`.
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);
std::size_t count_occurrences(std::string_view text, std::string_view needle);

}  // namespace ctxprobe
