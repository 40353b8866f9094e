#include "ctxprobe/probe_data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include "ctxprobe/error.hpp"
#include "ctxprobe/text.hpp"
#include "json.hpp"

namespace ctxprobe {

using nlohmann::json;

namespace {

std::string normalized_corpus_name(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(c);
  }
  return ascii_lower(key);
}

std::optional<std::string> string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

// LAMA T-REx evidences carry a masked sentence plus the object surface form;
// Google-RE and our own format carry plain text.
std::optional<std::string> evidence_text(const json& record) {
  auto it = record.find("evidences");
  if (it == record.end() || !it->is_array()) return std::nullopt;
  std::string joined;
  for (const auto& ev : *it) {
    if (!ev.is_object()) continue;
    std::string text;
    if (auto t = string_field(ev, "text")) {
      text = *t;
    } else if (auto m = string_field(ev, "masked_sentence")) {
      auto surface = string_field(ev, "obj_surface").value_or(string_field(record, "obj_label").value_or(""));
      text = replace_all(*m, kMaskToken, surface);
    }
    auto t = trim(text);
    if (t.empty()) continue;
    if (!joined.empty()) joined.push_back(' ');
    joined.append(t);
  }
  if (joined.empty()) return std::nullopt;
  return joined;
}

// SQuAD-style records ship a masked sentence instead of a relation template.
std::optional<std::string> template_from_masked_sentence(const json& record, std::string_view subject) {
  auto it = record.find("masked_sentences");
  if (it == record.end() || !it->is_array() || it->empty() || !(*it)[0].is_string()) return std::nullopt;
  std::string sentence = (*it)[0].get<std::string>();
  if (count_occurrences(sentence, kMaskToken) != 1) return std::nullopt;
  auto pos = subject.empty() ? std::string::npos : sentence.find(subject);
  if (pos == std::string::npos) return std::nullopt;
  sentence.replace(pos, subject.size(), "[X]");
  return replace_all(sentence, kMaskToken, "[Y]");
}

}  // namespace

CorpusTag CorpusTag::parse(std::string_view name) {
  auto key = normalized_corpus_name(name);
  if (key == "googlere") return google_re();
  if (key == "trex") return trex();
  if (key == "squad") return squad();
  return other(std::string(name));
}

const Fact* FactSet::find(std::string_view uuid) const {
  for (const auto& f : facts) {
    if (f.uuid == uuid) return &f;
  }
  return nullptr;
}

std::size_t LoadResult::error_count() const {
  return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const RecordIssue& i) {
    return i.severity == RecordIssue::Severity::Error;
  }));
}

RelationTable load_relations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open relations file " + path.string());
  RelationTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    auto where = path.string() + ":" + std::to_string(line_no);
    if (rec.is_discarded() || !rec.is_object()) throw FormatError(where + ": malformed JSON");
    auto relation = string_field(rec, "relation");
    auto tmpl = string_field(rec, "template");
    if (!relation || !tmpl) throw FormatError(where + ": missing relation or template");
    check_cloze_template(*tmpl);
    RelationTemplates entry{*tmpl, string_field(rec, "question")};
    if (entry.question && entry.question->empty()) entry.question.reset();
    table.insert_or_assign(*relation, std::move(entry));
  }
  return table;
}

LoadResult load_facts(const std::filesystem::path& path, const CorpusTag& corpus, const RelationTable& relations,
                      const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open facts file " + path.string());

  LoadResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto issue = [&](RecordIssue::Severity sev, std::string uuid, std::string msg) {
    result.issues.push_back({sev, line_no, std::move(uuid), std::move(msg)});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      issue(RecordIssue::Severity::Error, "", "malformed JSON");
      continue;
    }

    Fact fact;
    fact.uuid = string_field(rec, "uuid").value_or(string_field(rec, "id").value_or(""));
    if (fact.uuid.empty()) {
      issue(RecordIssue::Severity::Error, "", "missing uuid");
      continue;
    }
    fact.corpus = corpus;
    if (auto c = string_field(rec, "corpus")) fact.corpus = CorpusTag::parse(*c);
    fact.subject = string_field(rec, "sub_label").value_or("");
    fact.answer = string_field(rec, "obj_label").value_or("");
    fact.evidence = evidence_text(rec);

    auto relation = string_field(rec, "relation");
    auto own_template = string_field(rec, "template");
    if (!own_template) own_template = template_from_masked_sentence(rec, fact.subject);
    if (!relation) {
      if (!own_template) {
        issue(RecordIssue::Severity::Error, fact.uuid, "missing relation");
        continue;
      }
      relation = std::string(kSquadRelation);
    }
    fact.relation = *relation;

    if (fact.answer.empty() || split_whitespace(fact.answer).size() != 1 ||
        fact.answer.size() != trim(fact.answer).size()) {
      issue(RecordIssue::Severity::Error, fact.uuid, "answer must be a single non-empty token");
      continue;
    }

    auto rel_it = relations.find(fact.relation);
    if (own_template) {
      fact.cloze_template = *own_template;
      fact.question_template = string_field(rec, "question");
      if (!fact.question_template && rel_it != relations.end()) fact.question_template = rel_it->second.question;
    } else if (rel_it != relations.end()) {
      fact.cloze_template = rel_it->second.cloze;
      fact.question_template = rel_it->second.question;
    } else if (options.require_templates) {
      issue(RecordIssue::Severity::Error, fact.uuid, "no template for relation '" + fact.relation + "'");
      continue;
    }

    if (!fact.cloze_template.empty()) {
      try {
        check_cloze_template(fact.cloze_template);
      } catch (const TemplateError& e) {
        issue(RecordIssue::Severity::Error, fact.uuid, e.what());
        continue;
      }
    }

    if (!seen.insert(fact.uuid).second) {
      issue(RecordIssue::Severity::Warning, fact.uuid, "duplicate uuid; later record rejected");
      continue;
    }

    if (!result.facts.relations.contains(fact.relation)) {
      if (rel_it != relations.end()) {
        result.facts.relations.emplace(fact.relation, rel_it->second);
      } else {
        // Per-fact templates: the relation has no shared template.
        result.facts.relations.emplace(fact.relation, RelationTemplates{});
      }
    }
    result.facts.facts.push_back(std::move(fact));
  }
  return result;
}

void check_cloze_template(std::string_view tmpl) {
  auto nx = count_occurrences(tmpl, "[X]");
  auto ny = count_occurrences(tmpl, "[Y]");
  if (nx != 1 || ny != 1) {
    throw TemplateError("cloze template must contain exactly one [X] and one [Y]: \"" + std::string(tmpl) + "\"");
  }
}

ClozeQuery instantiate_cloze(const Fact& fact) {
  check_cloze_template(fact.cloze_template);
  auto text = replace_all(fact.cloze_template, "[Y]", kMaskToken);
  text = replace_all(text, "[X]", fact.subject);
  return {fact.uuid, std::move(text), fact.answer};
}

std::string to_natural_question(const Fact& fact) {
  if (!fact.question_template || fact.question_template->empty()) {
    throw MissingTemplate("relation '" + fact.relation + "' has no question template");
  }
  if (count_occurrences(*fact.question_template, "[X]") != 1) {
    throw TemplateError("question template must contain exactly one [X]: \"" + *fact.question_template + "\"");
  }
  std::string q(trim(replace_all(*fact.question_template, "[X]", fact.subject)));
  if (q.empty() || q.back() != '?') q.push_back('?');
  return q;
}

FilterResult filter_by_vocab(const FactSet& facts, const Vocabulary& vocab) {
  FilterResult out;
  out.facts.relations = facts.relations;
  for (const auto& f : facts.facts) {
    if (vocab.contains(f.answer)) out.facts.facts.push_back(f);
  }
  if (!facts.facts.empty()) {
    auto removed = facts.facts.size() - out.facts.facts.size();
    out.removed_fraction = static_cast<double>(removed) / static_cast<double>(facts.facts.size());
  }
  return out;
}

DatasetStats dataset_stats(const FactSet& facts) {
  DatasetStats stats;
  std::map<std::string, std::set<std::string>> relations_by_corpus;
  for (const auto& f : facts.facts) {
    ++stats.total;
    ++stats.per_relation[f.relation];
    ++stats.per_corpus[f.corpus.name()].facts;
    relations_by_corpus[f.corpus.name()].insert(f.relation);
  }
  for (auto& [name, cs] : stats.per_corpus) cs.relations = relations_by_corpus[name].size();
  return stats;
}

}  // namespace ctxprobe
