#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctxprobe/probe_data.hpp"
#include "ctxprobe/text.hpp"

namespace ctxprobe {

struct Paragraph {
  std::string para_id;
  std::string doc_id;
  std::string text;
};

// Paragraph texts by id. The binary index stores only weights, so retrieval
// consumers that need the text (contexts, recall) pair an index with a store.
class ParagraphStore {
 public:
  ParagraphStore() = default;
  explicit ParagraphStore(std::vector<Paragraph> paragraphs);

  // Corpus JSONL: {"para_id", "doc_id", "text"}. Malformed lines and
  // duplicate ids throw FormatError with the line number.
  static ParagraphStore load(const std::filesystem::path& path);

  const std::vector<Paragraph>& paragraphs() const noexcept { return paragraphs_; }
  std::size_t size() const noexcept { return paragraphs_.size(); }
  const Paragraph* find(std::string_view para_id) const;

 private:
  std::vector<Paragraph> paragraphs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct IndexConfig {
  std::uint32_t hash_bits = 24;
  std::uint32_t ngram_order = 2;
  std::shared_ptr<const StopwordSet> stopwords = default_stopwords();
};

// Retrieval features of a text: lowercase tokens with all ASCII punctuation
// removed, n-grams of order 1..ngram_order joined by a single space, minus
// n-grams made only of stopwords. Returned in text order, with repeats.
std::vector<std::string> index_features(std::string_view text, std::uint32_t ngram_order,
                                        const StopwordSet& stopwords);

// FNV-1a 32 of the feature string modulo 2^hash_bits.
std::uint32_t feature_bin(std::string_view feature, std::uint32_t hash_bits) noexcept;

// Okapi-smoothed idf clamped at zero.
double idf_weight(std::uint64_t num_docs, std::uint64_t doc_freq) noexcept;

struct ScoredParagraph {
  std::string para_id;
  double score = 0.0;

  friend bool operator==(const ScoredParagraph&, const ScoredParagraph&) = default;
};

// Hashed n-gram TF-IDF index with cosine scoring. Immutable once built;
// concurrent queries are safe.
class TfidfIndex {
 public:
  static TfidfIndex build(std::span<const Paragraph> paragraphs, const IndexConfig& config = {});

  // Top-k by cosine, ties by para_id ascending. Paragraphs sharing no feature
  // with the query fill the tail with score 0. A query whose weight vector is
  // zero returns nothing.
  std::vector<ScoredParagraph> query(std::string_view text, std::size_t k) const;

  void save(const std::filesystem::path& path) const;
  // The stopword list is not part of the file; pass the one used at build.
  static TfidfIndex load(const std::filesystem::path& path,
                         std::shared_ptr<const StopwordSet> stopwords = default_stopwords());

  std::uint64_t num_paragraphs() const noexcept { return para_ids_.size(); }
  std::uint32_t hash_bits() const noexcept { return hash_bits_; }
  std::uint32_t ngram_order() const noexcept { return ngram_order_; }
  const std::vector<std::string>& para_ids() const noexcept { return para_ids_; }
  double doc_norm(std::size_t row) const { return doc_norms_.at(row); }
  // idf of a bin; bins unseen in the corpus get idf(N, 0).
  double idf(std::uint32_t bin) const;
  double idf_of(std::string_view feature) const { return idf(feature_bin(feature, hash_bits_)); }
  // (bin, weight) pairs of one paragraph, ascending by bin.
  std::vector<std::pair<std::uint32_t, double>> row(std::size_t row) const;

 private:
  TfidfIndex() = default;
  void build_postings();

  std::uint32_t hash_bits_ = 24;
  std::uint32_t ngram_order_ = 2;
  std::shared_ptr<const StopwordSet> stopwords_;
  std::vector<std::string> para_ids_;
  // CSR, rows sorted by bin.
  std::vector<std::uint64_t> row_offsets_;
  std::vector<std::uint32_t> col_bins_;
  std::vector<double> weights_;
  std::vector<double> doc_norms_;
  // Sorted by bin; only bins with df > 0.
  std::vector<std::pair<std::uint32_t, double>> idf_;
  // Transposed postings for term-at-a-time scoring.
  std::unordered_map<std::uint32_t, std::vector<std::pair<std::uint32_t, double>>> postings_;
};

struct RecallPoint {
  std::size_t k = 0;
  double recall = 0.0;  // percentage
};

struct RecallCurve {
  std::vector<RecallPoint> points;
};

// For k = 1..k_max: percentage of facts whose answer token occurs (same
// matching rule as answer_in_context) in one of the top-k paragraphs.
RecallCurve recall_at_k(const TfidfIndex& index, const ParagraphStore& store, const FactSet& facts,
                        const std::function<std::string(const Fact&)>& query_fn, std::size_t k_max,
                        std::size_t threads = 1);

}  // namespace ctxprobe
