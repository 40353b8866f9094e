#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxprobe/vocabulary.hpp"

namespace ctxprobe {

// Which probe subset a fact comes from. Unknown names are kept verbatim as
// Other so custom probes round-trip.
class CorpusTag {
 public:
  enum class Kind { GoogleRE, TREx, SQuAD, Other };

  CorpusTag() : CorpusTag(Kind::Other, "Other") {}
  static CorpusTag google_re() { return {Kind::GoogleRE, "GoogleRE"}; }
  static CorpusTag trex() { return {Kind::TREx, "TREx"}; }
  static CorpusTag squad() { return {Kind::SQuAD, "SQuAD"}; }
  static CorpusTag other(std::string name) { return {Kind::Other, std::move(name)}; }
  // Accepts the usual spellings ("Google-RE", "google_re", "T-REx", "trex", ...).
  static CorpusTag parse(std::string_view name);

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }

  friend bool operator==(const CorpusTag& a, const CorpusTag& b) {
    return a.kind_ == b.kind_ && a.name_ == b.name_;
  }

 private:
  CorpusTag(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}
  Kind kind_;
  std::string name_;
};

inline constexpr std::string_view kSquadRelation = "squad";

struct Fact {
  std::string uuid;
  CorpusTag corpus;
  std::string relation;
  std::string subject;
  std::string answer;
  std::string cloze_template;
  std::optional<std::string> question_template;
  std::optional<std::string> evidence;
};

struct RelationTemplates {
  std::string cloze;
  std::optional<std::string> question;
};

using RelationTable = std::map<std::string, RelationTemplates, std::less<>>;

struct FactSet {
  std::vector<Fact> facts;
  RelationTable relations;

  std::size_t size() const noexcept { return facts.size(); }
  bool empty() const noexcept { return facts.empty(); }
  const Fact* find(std::string_view uuid) const;
};

// A problem with one input record. Warnings do not drop the record's
// predecessor; errors drop the record itself.
struct RecordIssue {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::size_t line = 0;  // 1-based, 0 when not line-bound
  std::string uuid;
  std::string message;
};

struct LoadResult {
  FactSet facts;
  std::vector<RecordIssue> issues;

  std::size_t error_count() const;
};

struct ClozeQuery {
  std::string fact_uuid;
  std::string text;
  std::string answer;
};

struct LoadOptions {
  // When false, facts whose relation has no template are kept with an empty
  // cloze template (useful for report-only consumers).
  bool require_templates = true;
};

// Relations file: JSONL {"relation", "template", "question"?}.
RelationTable load_relations(const std::filesystem::path& path);

// Facts file: LAMA-style JSONL. Per-record problems land in LoadResult::issues.
LoadResult load_facts(const std::filesystem::path& path, const CorpusTag& corpus,
                      const RelationTable& relations, const LoadOptions& options = {});

// Validates that a cloze template has exactly one [X] and one [Y].
void check_cloze_template(std::string_view tmpl);

ClozeQuery instantiate_cloze(const Fact& fact);
std::string to_natural_question(const Fact& fact);

struct FilterResult {
  FactSet facts;
  double removed_fraction = 0.0;
};

FilterResult filter_by_vocab(const FactSet& facts, const Vocabulary& vocab);

struct CorpusStats {
  std::size_t facts = 0;
  std::size_t relations = 0;
};

struct DatasetStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> per_relation;
  std::map<std::string, CorpusStats> per_corpus;
};

DatasetStats dataset_stats(const FactSet& facts);

}  // namespace ctxprobe
