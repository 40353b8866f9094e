#include "ctxprobe/corpus_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "ctxprobe/error.hpp"
#include "ctxprobe/parallel.hpp"
#include "json.hpp"

namespace ctxprobe {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'I', 'D', 'X', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "index I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <class T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <class T>
  void put_array(const std::vector<T>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void put_bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& buf) : buf_(buf) {}
  template <class T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  template <class T>
  std::vector<T> get_array(std::uint64_t n) {
    if (n > (buf_.size() - pos_) / sizeof(T)) throw FormatError("index file truncated");
    std::vector<T> v(static_cast<std::size_t>(n));
    std::memcpy(v.data(), buf_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("index file truncated");
  }
  const std::vector<char>& buf_;
  std::size_t pos_ = 0;
};

std::string strip_punct_lower(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    if (is_ascii_punct(c)) continue;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

}  // namespace

ParagraphStore::ParagraphStore(std::vector<Paragraph> paragraphs) : paragraphs_(std::move(paragraphs)) {
  by_id_.reserve(paragraphs_.size());
  for (std::size_t i = 0; i < paragraphs_.size(); ++i) {
    if (!by_id_.emplace(paragraphs_[i].para_id, i).second) {
      throw FormatError("duplicate para_id '" + paragraphs_[i].para_id + "'");
    }
  }
}

ParagraphStore ParagraphStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  std::vector<Paragraph> paragraphs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto rec = nlohmann::json::parse(line, nullptr, false);
    auto where = path.string() + ":" + std::to_string(line_no);
    if (rec.is_discarded() || !rec.is_object()) throw FormatError(where + ": malformed JSON");
    auto id = rec.find("para_id");
    auto text = rec.find("text");
    if (id == rec.end() || !id->is_string() || text == rec.end() || !text->is_string()) {
      throw FormatError(where + ": para_id and text are required strings");
    }
    Paragraph p;
    p.para_id = id->get<std::string>();
    p.doc_id = rec.value("doc_id", std::string());
    p.text = text->get<std::string>();
    paragraphs.push_back(std::move(p));
  }
  return ParagraphStore(std::move(paragraphs));
}

const Paragraph* ParagraphStore::find(std::string_view para_id) const {
  auto it = by_id_.find(std::string(para_id));
  return it == by_id_.end() ? nullptr : &paragraphs_[it->second];
}

std::vector<std::string> index_features(std::string_view text, std::uint32_t ngram_order,
                                        const StopwordSet& stopwords) {
  std::vector<std::string> tokens;
  for (auto raw : split_whitespace(text)) {
    auto t = strip_punct_lower(raw);
    if (!t.empty()) tokens.push_back(std::move(t));
  }
  std::vector<std::string> features;
  for (std::uint32_t n = 1; n <= ngram_order; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      bool all_stop = true;
      for (std::size_t j = i; j < i + n && all_stop; ++j) all_stop = stopwords.contains(tokens[j]);
      if (all_stop) continue;
      std::string gram = tokens[i];
      for (std::size_t j = i + 1; j < i + n; ++j) {
        gram.push_back(' ');
        gram += tokens[j];
      }
      features.push_back(std::move(gram));
    }
  }
  return features;
}

std::uint32_t feature_bin(std::string_view feature, std::uint32_t hash_bits) noexcept {
  auto h = fnv1a32(feature);
  if (hash_bits >= 32) return h;
  return h & ((std::uint32_t{1} << hash_bits) - 1u);
}

double idf_weight(std::uint64_t num_docs, std::uint64_t doc_freq) noexcept {
  double n = static_cast<double>(num_docs);
  double df = static_cast<double>(doc_freq);
  return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
}

TfidfIndex TfidfIndex::build(std::span<const Paragraph> paragraphs, const IndexConfig& config) {
  if (config.hash_bits < 1 || config.hash_bits > 32) throw BuildError("hash_bits must be in [1, 32]");
  if (config.ngram_order < 1) throw BuildError("ngram_order must be >= 1");
  const auto& stop = config.stopwords ? *config.stopwords : *default_stopwords();

  TfidfIndex index;
  index.hash_bits_ = config.hash_bits;
  index.ngram_order_ = config.ngram_order;
  index.stopwords_ = config.stopwords ? config.stopwords : default_stopwords();

  std::unordered_map<std::string_view, bool> seen_ids;
  std::vector<std::map<std::uint32_t, std::uint32_t>> term_freqs;
  std::unordered_map<std::uint32_t, std::uint64_t> doc_freq;
  for (const auto& p : paragraphs) {
    if (!seen_ids.emplace(p.para_id, true).second) throw BuildError("duplicate para_id '" + p.para_id + "'");
    if (trim(p.text).empty()) continue;
    std::map<std::uint32_t, std::uint32_t> tf;
    for (const auto& f : index_features(p.text, config.ngram_order, stop)) ++tf[feature_bin(f, config.hash_bits)];
    for (const auto& [bin, _] : tf) ++doc_freq[bin];
    index.para_ids_.push_back(p.para_id);
    term_freqs.push_back(std::move(tf));
  }
  if (index.para_ids_.empty()) throw BuildError("no usable paragraphs");

  const auto n_docs = static_cast<std::uint64_t>(index.para_ids_.size());
  index.idf_.reserve(doc_freq.size());
  for (const auto& [bin, df] : doc_freq) index.idf_.emplace_back(bin, idf_weight(n_docs, df));
  std::sort(index.idf_.begin(), index.idf_.end());

  index.row_offsets_.reserve(term_freqs.size() + 1);
  index.row_offsets_.push_back(0);
  for (const auto& tf : term_freqs) {
    double sq = 0.0;
    for (const auto& [bin, count] : tf) {
      double w = std::log(1.0 + static_cast<double>(count)) * index.idf(bin);
      if (w == 0.0) continue;
      index.col_bins_.push_back(bin);
      index.weights_.push_back(w);
      sq += w * w;
    }
    index.doc_norms_.push_back(std::sqrt(sq));
    index.row_offsets_.push_back(index.col_bins_.size());
  }
  index.build_postings();
  return index;
}

double TfidfIndex::idf(std::uint32_t bin) const {
  auto it = std::lower_bound(idf_.begin(), idf_.end(), bin,
                             [](const std::pair<std::uint32_t, double>& e, std::uint32_t b) { return e.first < b; });
  if (it != idf_.end() && it->first == bin) return it->second;
  return idf_weight(num_paragraphs(), 0);
}

std::vector<std::pair<std::uint32_t, double>> TfidfIndex::row(std::size_t r) const {
  std::vector<std::pair<std::uint32_t, double>> out;
  for (auto i = row_offsets_.at(r); i < row_offsets_.at(r + 1); ++i) out.emplace_back(col_bins_[i], weights_[i]);
  return out;
}

void TfidfIndex::build_postings() {
  postings_.clear();
  for (std::size_t r = 0; r + 1 < row_offsets_.size(); ++r) {
    for (auto i = row_offsets_[r]; i < row_offsets_[r + 1]; ++i) {
      postings_[col_bins_[i]].emplace_back(static_cast<std::uint32_t>(r), weights_[i]);
    }
  }
}

std::vector<ScoredParagraph> TfidfIndex::query(std::string_view text, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  std::map<std::uint32_t, std::uint32_t> tf;
  for (const auto& f : index_features(text, ngram_order_, *stopwords_)) ++tf[feature_bin(f, hash_bits_)];

  std::vector<std::pair<std::uint32_t, double>> q;
  double sq = 0.0;
  for (const auto& [bin, count] : tf) {
    double w = std::log(1.0 + static_cast<double>(count)) * idf(bin);
    sq += w * w;
    if (w != 0.0) q.emplace_back(bin, w);
  }
  double qnorm = std::sqrt(sq);
  if (qnorm == 0.0) return {};

  const std::size_t n = para_ids_.size();
  std::vector<double> dot(n, 0.0);
  for (const auto& [bin, w] : q) {
    auto it = postings_.find(bin);
    if (it == postings_.end()) continue;
    for (const auto& [row, dw] : it->second) dot[row] += w * dw;
  }
  std::vector<double> score(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (doc_norms_[r] > 0.0) score[r] = std::clamp(dot[r] / (qnorm * doc_norms_[r]), 0.0, 1.0);
  }

  std::vector<std::uint32_t> order(n);
  for (std::size_t r = 0; r < n; ++r) order[r] = static_cast<std::uint32_t>(r);
  auto take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (score[a] != score[b]) return score[a] > score[b];
                      return para_ids_[a] < para_ids_[b];
                    });
  std::vector<ScoredParagraph> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({para_ids_[order[i]], score[order[i]]});
  return out;
}

void TfidfIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write index file " + path.string());
  Writer w(out);
  w.put_bytes(std::string_view(kMagic, sizeof(kMagic)));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(hash_bits_);
  w.put<std::uint32_t>(ngram_order_);
  w.put<std::uint64_t>(para_ids_.size());
  for (const auto& id : para_ids_) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    w.put_bytes(id);
  }
  w.put_array(row_offsets_);
  w.put_array(col_bins_);
  w.put_array(weights_);
  w.put_array(doc_norms_);
  w.put<std::uint64_t>(idf_.size());
  for (const auto& [bin, value] : idf_) {
    w.put<std::uint32_t>(bin);
    w.put<double>(value);
  }
  if (!out) throw Error("failed writing index file " + path.string());
}

TfidfIndex TfidfIndex::load(const std::filesystem::path& path, std::shared_ptr<const StopwordSet> stopwords) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index file " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf);

  if (r.get_bytes(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) throw FormatError("bad index magic");
  auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported index version " + std::to_string(version));

  TfidfIndex index;
  index.stopwords_ = stopwords ? std::move(stopwords) : default_stopwords();
  index.hash_bits_ = r.get<std::uint32_t>();
  index.ngram_order_ = r.get<std::uint32_t>();
  if (index.hash_bits_ < 1 || index.hash_bits_ > 32 || index.ngram_order_ < 1) throw FormatError("bad index header");
  auto n = r.get<std::uint64_t>();
  if (n == 0 || n > buf.size()) throw FormatError("bad paragraph count");
  index.para_ids_.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    auto len = r.get<std::uint32_t>();
    index.para_ids_.push_back(r.get_bytes(len));
  }
  index.row_offsets_ = r.get_array<std::uint64_t>(n + 1);
  if (index.row_offsets_.front() != 0 || !std::is_sorted(index.row_offsets_.begin(), index.row_offsets_.end())) {
    throw FormatError("corrupt row offsets");
  }
  auto nnz = index.row_offsets_.back();
  index.col_bins_ = r.get_array<std::uint32_t>(nnz);
  index.weights_ = r.get_array<double>(nnz);
  index.doc_norms_ = r.get_array<double>(n);
  auto n_idf = r.get<std::uint64_t>();
  if (n_idf > buf.size()) throw FormatError("bad idf count");
  index.idf_.reserve(static_cast<std::size_t>(n_idf));
  for (std::uint64_t i = 0; i < n_idf; ++i) {
    auto bin = r.get<std::uint32_t>();
    auto value = r.get<double>();
    index.idf_.emplace_back(bin, value);
  }
  if (!r.at_end()) throw FormatError("trailing bytes after idf table");

  const std::uint64_t limit = index.hash_bits_ >= 32 ? (std::uint64_t{1} << 32) : (std::uint64_t{1} << index.hash_bits_);
  for (auto b : index.col_bins_) {
    if (b >= limit) throw FormatError("feature bin out of range");
  }
  for (auto w : index.weights_) {
    if (!std::isfinite(w) || w < 0.0) throw FormatError("invalid weight");
  }
  if (!std::is_sorted(index.idf_.begin(), index.idf_.end())) throw FormatError("idf table not sorted");
  index.build_postings();
  return index;
}

RecallCurve recall_at_k(const TfidfIndex& index, const ParagraphStore& store, const FactSet& facts,
                        const std::function<std::string(const Fact&)>& query_fn, std::size_t k_max,
                        std::size_t threads) {
  if (facts.empty()) throw InvalidArgument("recall_at_k needs at least one fact");
  if (k_max == 0) throw InvalidArgument("k_max must be >= 1");

  // first_hit[i] = 1-based rank of the first answer-bearing paragraph, 0 if none.
  std::vector<std::size_t> first_hit(facts.size(), 0);
  parallel_for(facts.size(), threads, [&](std::size_t i) {
    const auto& fact = facts.facts[i];
    auto hits = index.query(query_fn(fact), k_max);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      const auto* p = store.find(hits[r].para_id);
      if (p && contains_token(p->text, fact.answer)) {
        first_hit[i] = r + 1;
        break;
      }
    }
  });

  std::vector<std::size_t> hits_at(k_max + 1, 0);
  for (auto h : first_hit) {
    if (h > 0) ++hits_at[h];
  }
  RecallCurve curve;
  std::size_t cumulative = 0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    cumulative += hits_at[k];
    curve.points.push_back({k, 100.0 * static_cast<double>(cumulative) / static_cast<double>(facts.size())});
  }
  return curve;
}

}  // namespace ctxprobe
