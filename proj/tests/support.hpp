#pragma once
// Independent oracles and fixture helpers shared by the unit and acceptance
// tests. Nothing here calls into the code under test except the stopword
// list and the FNV hash, which have their own tests.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctxprobe/corpus_index.hpp"
#include "ctxprobe/text.hpp"

namespace ctxprobe::fixtures {

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ctxprobe-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Retrieval features written out from the definition: lowercase, drop every
// ASCII punctuation character, split on whitespace, n-grams of order
// 1..order joined by one space, skip n-grams whose words are all stopwords.
inline std::vector<std::string> oracle_features(const std::string& text, unsigned order, const StopwordSet& stop) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      flush();
    } else if (std::ispunct(c)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  std::vector<std::string> out;
  for (unsigned n = 1; n <= order; ++n) {
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
      bool all_stop = true;
      std::string g;
      for (std::size_t j = i; j < i + n; ++j) {
        all_stop = all_stop && stop.contains(words[j]);
        if (j > i) g += ' ';
        g += words[j];
      }
      if (!all_stop) out.push_back(g);
    }
  }
  return out;
}

inline std::uint32_t oracle_bin(const std::string& feature, unsigned hash_bits) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : feature) {
    h ^= c;
    h *= 16777619u;
  }
  return hash_bits >= 32 ? h : (h & ((1u << hash_bits) - 1u));
}

// Answer membership written independently of the library: whitespace
// tokens compared after lowercasing and trimming edge punctuation.
inline bool brute_force_contains(const std::string& text, const std::string& answer) {
  auto key = [](std::string t) {
    auto p = [](unsigned char c) { return std::ispunct(c) != 0; };
    while (!t.empty() && p(t.front())) t.erase(t.begin());
    while (!t.empty() && p(t.back())) t.pop_back();
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return t;
  };
  auto want = key(answer);
  if (want.empty()) return false;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    if (key(tok) == want) return true;
  }
  return false;
}

// Dense TF-IDF cosine over the full bin space that occurs anywhere in the
// corpus or the query. Bins are visited in ascending order so the floating
// point sums follow one documented order.
class DenseTfidfOracle {
 public:
  DenseTfidfOracle(const std::vector<Paragraph>& paragraphs, unsigned hash_bits = 24, unsigned order = 2,
                   const StopwordSet& stop = *default_stopwords())
      : bits_(hash_bits), order_(order), stop_(stop) {
    for (const auto& p : paragraphs) {
      bool blank = std::all_of(p.text.begin(), p.text.end(), [](unsigned char c) { return std::isspace(c); });
      if (blank) continue;
      ids_.push_back(p.para_id);
      tf_.push_back(counts(p.text));
    }
    for (const auto& tf : tf_) {
      for (const auto& [bin, _] : tf) ++df_[bin];
    }
    for (const auto& tf : tf_) {
      double sq = 0.0;
      std::map<std::uint32_t, double> vec;
      for (const auto& [bin, c] : tf) {
        double w = std::log(1.0 + c) * idf(bin);
        vec[bin] = w;
        sq += w * w;
      }
      vecs_.push_back(std::move(vec));
      norms_.push_back(std::sqrt(sq));
    }
  }

  double idf(std::uint32_t bin) const {
    double n = static_cast<double>(ids_.size());
    auto it = df_.find(bin);
    double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    double v = std::log((n - df + 0.5) / (df + 0.5));
    return v < 0.0 ? 0.0 : v;
  }

  std::vector<ScoredParagraph> query(const std::string& text, std::size_t k) const {
    std::map<std::uint32_t, double> q;
    double sq = 0.0;
    for (const auto& [bin, c] : counts(text)) {
      double w = std::log(1.0 + c) * idf(bin);
      q[bin] = w;
      sq += w * w;
    }
    double qn = std::sqrt(sq);
    if (qn == 0.0) return {};
    std::vector<ScoredParagraph> all;
    for (std::size_t d = 0; d < ids_.size(); ++d) {
      double dot = 0.0;
      for (const auto& [bin, w] : q) {
        auto it = vecs_[d].find(bin);
        if (it != vecs_[d].end() && w != 0.0 && it->second != 0.0) dot += w * it->second;
      }
      double s = 0.0;
      if (norms_[d] > 0.0) s = std::min(1.0, std::max(0.0, dot / (qn * norms_[d])));
      all.push_back({ids_[d], s});
    }
    std::sort(all.begin(), all.end(), [](const ScoredParagraph& a, const ScoredParagraph& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.para_id < b.para_id;
    });
    if (all.size() > k) all.resize(k);
    return all;
  }

 private:
  std::map<std::uint32_t, double> counts(const std::string& text) const {
    std::map<std::uint32_t, double> out;
    for (const auto& f : oracle_features(text, order_, stop_)) out[oracle_bin(f, bits_)] += 1.0;
    return out;
  }

  unsigned bits_, order_;
  const StopwordSet& stop_;
  std::vector<std::string> ids_;
  std::vector<std::map<std::uint32_t, double>> tf_;
  std::map<std::uint32_t, std::uint64_t> df_;
  std::vector<std::map<std::uint32_t, double>> vecs_;
  std::vector<double> norms_;
};

// Short paragraphs over a small lexicon (with stopwords, capitals and
// punctuation) so that terms repeat across paragraphs and ties happen.
inline std::vector<Paragraph> random_corpus(std::mt19937_64& rng, std::size_t max_paragraphs = 200) {
  static const std::vector<std::string> lexicon{
      "the",    "of",     "and",   "in",     "a",      "is",     "was",    "to",     "river",  "Paris",
      "Rome",   "London", "city",  "born",   "music",  "painter", "poet",  "field",  "physics", "stone",
      "bridge", "valley", "north", "king",   "queen",  "war",    "peace",  "bread",  "garden", "tower",
      "lake",   "forest", "road",  "market", "harbour", "storm", "winter", "summer", "school", "church"};
  static const std::vector<std::string> punct{"", "", "", ",", ".", "!", "?", ";"};
  std::uniform_int_distribution<std::size_t> n_par(1, max_paragraphs);
  std::uniform_int_distribution<std::size_t> n_words(1, 14);
  std::uniform_int_distribution<std::size_t> pick(0, lexicon.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_p(0, punct.size() - 1);
  std::vector<Paragraph> out;
  auto n = n_par(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    auto w = n_words(rng);
    for (std::size_t j = 0; j < w; ++j) {
      if (j) text += ' ';
      text += lexicon[pick(rng)] + punct[pick_p(rng)];
    }
    char id[32];
    std::snprintf(id, sizeof(id), "p%04zu", i);
    out.push_back({id, "doc" + std::to_string(i / 5), text});
  }
  return out;
}

inline std::string random_query(std::mt19937_64& rng, const std::vector<Paragraph>& corpus) {
  // Half the time a slice of a paragraph, otherwise a fresh word salad.
  std::uniform_int_distribution<int> coin(0, 1);
  if (coin(rng) && !corpus.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
    return corpus[pick(rng)].text;
  }
  auto salad = random_corpus(rng, 1);
  return salad.front().text;
}

// P(X <= m), X ~ Binomial(n, 1/2), by enumerating all 2^n sign patterns.
inline std::vector<double> enumerate_binomial_cdf(unsigned n) {
  std::vector<std::uint64_t> count(n + 1, 0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) ++count[std::popcount(mask)];
  std::vector<double> cdf(n + 1);
  std::uint64_t acc = 0;
  for (unsigned m = 0; m <= n; ++m) {
    acc += count[m];
    cdf[m] = static_cast<double>(acc) / static_cast<double>(std::uint64_t{1} << n);
  }
  return cdf;
}

}  // namespace ctxprobe::fixtures
