#include "ctxprobe/text.hpp"

#include <fstream>

#include "ctxprobe/error.hpp"

namespace ctxprobe {
namespace {

// NLTK English list.
constexpr std::string_view kStopwords[] = {
    "i",          "me",       "my",      "myself",  "we",         "our",      "ours",
    "ourselves",  "you",      "you're",  "you've",  "you'll",     "you'd",    "your",
    "yours",      "yourself", "yourselves", "he",   "him",        "his",      "himself",
    "she",        "she's",    "her",     "hers",    "herself",    "it",       "it's",
    "its",        "itself",   "they",    "them",    "their",      "theirs",   "themselves",
    "what",       "which",    "who",     "whom",    "this",       "that",     "that'll",
    "these",      "those",    "am",      "is",      "are",        "was",      "were",
    "be",         "been",     "being",   "have",    "has",        "had",      "having",
    "do",         "does",     "did",     "doing",   "a",          "an",       "the",
    "and",        "but",      "if",      "or",      "because",    "as",       "until",
    "while",      "of",       "at",      "by",      "for",        "with",     "about",
    "against",    "between",  "into",    "through", "during",     "before",   "after",
    "above",      "below",    "to",      "from",    "up",         "down",     "in",
    "out",        "on",       "off",     "over",    "under",      "again",    "further",
    "then",       "once",     "here",    "there",   "when",       "where",    "why",
    "how",        "all",      "any",     "both",    "each",       "few",      "more",
    "most",       "other",    "some",    "such",    "no",         "nor",      "not",
    "only",       "own",      "same",    "so",      "than",       "too",      "very",
    "s",          "t",        "can",     "will",    "just",       "don",      "don't",
    "should",     "should've", "now",    "d",       "ll",         "m",        "o",
    "re",         "ve",       "y",       "ain",     "aren",       "aren't",   "couldn",
    "couldn't",   "didn",     "didn't",  "doesn",   "doesn't",    "hadn",     "hadn't",
    "hasn",       "hasn't",   "haven",   "haven't", "isn",        "isn't",    "ma",
    "mightn",     "mightn't", "mustn",   "mustn't", "needn",      "needn't",  "shan",
    "shan't",     "shouldn",  "shouldn't", "wasn",  "wasn't",     "weren",    "weren't",
    "won",        "won't",    "wouldn",  "wouldn't",
};

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

const std::shared_ptr<const StopwordSet>& default_stopwords() {
  static const auto set = [] {
    auto s = std::make_shared<StopwordSet>();
    for (auto w : kStopwords) s->emplace(w);
    return std::shared_ptr<const StopwordSet>(std::move(s));
  }();
  return set;
}

std::shared_ptr<const StopwordSet> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stopword file " + path.string());
  auto set = std::make_shared<StopwordSet>();
  std::string line;
  while (std::getline(in, line)) {
    auto w = trim(line);
    if (w.empty() || w.front() == '#') continue;
    set->emplace(ascii_lower(w));
  }
  return set;
}

bool is_ascii_punct(char c) noexcept {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::string match_key(std::string_view token) {
  while (!token.empty() && is_ascii_punct(token.front())) token.remove_prefix(1);
  while (!token.empty() && is_ascii_punct(token.back())) token.remove_suffix(1);
  return ascii_lower(token);
}

bool contains_token(std::string_view text, std::string_view token) {
  auto key = match_key(token);
  if (key.empty()) return false;
  for (auto t : split_whitespace(text)) {
    if (match_key(t) == key) return true;
  }
  return false;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto emit = [&](std::string_view s) {
    s = trim(s);
    if (!s.empty()) out.emplace_back(s);
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j < text.size() && !is_space(text[j])) continue;
    while (j < text.size() && is_space(text[j])) ++j;
    bool boundary = j == text.size() || (text[j] >= 'A' && text[j] <= 'Z');
    if (!boundary) continue;
    emit(text.substr(start, i + 1 - start));
    start = i + 1;
  }
  if (start < text.size()) emit(text.substr(start));
  return out;
}

std::string replace_all(std::string_view text, std::string_view from, std::string_view to) {
  std::string out;
  if (from.empty()) return std::string(text);
  std::size_t pos = 0;
  while (true) {
    auto hit = text.find(from, pos);
    if (hit == std::string_view::npos) break;
    out.append(text.substr(pos, hit - pos));
    out.append(to);
    pos = hit + from.size();
  }
  out.append(text.substr(pos));
  return out;
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace ctxprobe
