#include "ctxprobe/synthetic.hpp"

#include <array>
#include <fstream>
#include <set>

#include "ctxprobe/error.hpp"
#include "ctxprobe/scorer.hpp"
#include "ctxprobe/text.hpp"

namespace ctxprobe {

using nlohmann::json;

namespace {

struct RelationSpec {
  const char* id;
  const char* corpus;
  const char* cloze;
  const char* question;
  const char* phrase;  // evidence text between subject and answer
  const char* tail;    // evidence text after the answer
  std::array<const char*, 5> answers;
};

constexpr std::array<RelationSpec, 5> kRelations{{
    {"P19", "GoogleRE", "[X] was born in [Y] .", "Where was [X] born?", "was born in", "",
     {"Paris", "Rome", "London", "Berlin", "Madrid"}},
    {"P101", "TREx", "[X] works in the field of [Y] .", "What field does [X] work in?", "works in the field of", "",
     {"physics", "chemistry", "biology", "mathematics", "astronomy"}},
    {"P27", "TREx", "[X] is a citizen of [Y] .", "Which country is [X] a citizen of?", "is a citizen of", "",
     {"France", "Italy", "Germany", "Spain", "Japan"}},
    {"P106", "TREx", "[X] is a [Y] by profession .", "What is the profession of [X]?", "is a", " by profession",
     {"lawyer", "painter", "poet", "actor", "architect"}},
    {"P1412", "TREx", "[X] speaks [Y] .", "What language does [X] speak?", "speaks", "",
     {"French", "Italian", "German", "Spanish", "Japanese"}},
}};

// Which of the relation's five answers each of its ten facts gets. The first
// answer of the first relation is vocab[0], the uniform-prior argmax.
constexpr std::array<int, 10> kAnswerPattern{0, 0, 0, 0, 1, 1, 2, 2, 3, 4};

constexpr std::array<const char*, 5> kExtraCandidates{"river", "stone", "music", "bread", "garden"};

constexpr std::array<const char*, 10> kDistractors{
    "The old stone bridge crosses a quiet valley near the northern hills.",
    "Farmers in the region grow barley and keep sheep on the high pastures.",
    "A narrow road winds through the forest toward the abandoned mill.",
    "The harbour town hosts a small market every second weekend.",
    "Winter storms often close the mountain pass for several weeks.",
    "Local bakers still use wood ovens for their morning loaves.",
    "The museum displays pottery recovered from the ancient settlement.",
    "Migrating birds rest on the marsh before crossing the sea.",
    "A wooden lighthouse once guided ships past the rocky cape.",
    "The annual festival celebrates the end of the harvest season.",
};

std::string invented_word(std::uint64_t n) {
  static constexpr std::string_view onsets = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::string w;
  for (int i = 0; i < 5; ++i) {
    if (i % 2 == 0) {
      w.push_back(onsets[n % onsets.size()]);
      n /= onsets.size();
    } else {
      w.push_back(vowels[n % vowels.size()]);
      n /= vowels.size();
    }
  }
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

// 100 distinct names drawn by a fixed multiplicative walk over the
// 14*5*14*5*14 CVCVC space.
std::vector<std::string> invented_words(std::size_t n, const StopwordSet& stop) {
  constexpr std::uint64_t space = 14ull * 5 * 14 * 5 * 14;
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::uint64_t i = 1; out.size() < n; ++i) {
    auto w = invented_word((i * 7919ull + 104729ull) % space);
    if (stop.contains(ascii_lower(w)) || !seen.insert(ascii_lower(w)).second) continue;
    out.push_back(std::move(w));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

}  // namespace

SyntheticProbe make_synthetic_probe() {
  SyntheticProbe p;
  const auto& stop = *default_stopwords();
  auto names = invented_words(100, stop);

  for (const auto& r : kRelations) {
    for (const auto* a : r.answers) p.vocab.emplace_back(a);
  }
  for (const auto* e : kExtraCandidates) p.vocab.emplace_back(e);

  std::size_t none_correct = 0;
  json per_relation_none = json::object();
  std::size_t n_facts = 0;
  std::size_t n_generated = 0;
  for (std::size_t ri = 0; ri < kRelations.size(); ++ri) {
    const auto& r = kRelations[ri];
    p.relations.push_back({{"relation", r.id}, {"template", r.cloze}, {"question", r.question}});
    std::size_t rel_none = 0;
    for (std::size_t j = 0; j < kAnswerPattern.size(); ++j) {
      auto k = ri * kAnswerPattern.size() + j;
      std::string subject = names[k] + " " + names[k + 50];
      std::string answer = r.answers[kAnswerPattern[j]];
      char uuid[32];
      std::snprintf(uuid, sizeof(uuid), "syn-%s-%02zu", r.id, j);
      std::string evidence = subject + " " + r.phrase + " " + answer + r.tail + ".";

      // Construction checks: the evidence clears the gate against its own
      // query and carries exactly one candidate.
      std::string query = subject + " " + replace_all(replace_all(r.cloze, "[X] ", ""), "[Y]", std::string(kMaskToken));
      if (mock_nsp(query, evidence) <= kNspThreshold) throw Error("synthetic evidence fails the NSP gate: " + evidence);
      std::size_t candidates = 0;
      for (const auto& v : p.vocab) candidates += contains_token(evidence, v) ? 1 : 0;
      if (candidates != 1) throw Error("synthetic evidence must hold exactly one candidate: " + evidence);

      p.facts.push_back({{"uuid", uuid},
                         {"corpus", r.corpus},
                         {"relation", r.id},
                         {"sub_label", subject},
                         {"obj_label", answer},
                         {"evidences", json::array({{{"text", evidence}}})}});
      p.paragraphs.push_back({{"para_id", std::string("p-") + uuid}, {"doc_id", subject}, {"text", evidence}});
      if (j + 1 < kAnswerPattern.size()) {
        p.generated.push_back({{"uuid", uuid}, {"text", "Reportedly, " + evidence}, {"batch", "synthetic"}});
        ++n_generated;
      }
      if (answer == p.vocab.front()) {
        ++none_correct;
        ++rel_none;
      }
      ++n_facts;
    }
    per_relation_none[r.id] = 100.0 * static_cast<double>(rel_none) / static_cast<double>(kAnswerPattern.size());
  }
  for (std::size_t i = 0; i < kDistractors.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "d-%02zu", i);
    p.paragraphs.push_back({{"para_id", id}, {"doc_id", "distractors"}, {"text", kDistractors[i]}});
  }

  // Uniform prior: every candidate ties, so the argmax is vocab[0] and the
  // no-context run is right exactly when the answer is vocab[0]. Oracle,
  // retrieved (each subject occurs in one paragraph) and generated contexts
  // hold only the answer, so the copy term makes it the argmax. Adversarial
  // donors hold only a different answer: with the gate closed the output is
  // the prior again, without a gate the donor answer wins.
  double p1_none = 100.0 * static_cast<double>(none_correct) / static_cast<double>(n_facts);
  p.expected = {
      {"facts", n_facts},
      {"vocab_size", p.vocab.size()},
      {"generated_facts", n_generated},
      {"p1",
       {{"none", p1_none},
        {"oracle", 100.0},
        {"retrieved", 100.0},
        {"generated", 100.0},
        {"adversarial_two_segment", p1_none},
        {"adversarial_one_segment", 0.0}}},
      {"p1_none_per_relation", per_relation_none},
      {"adversarial_drop_one_segment", p1_none},
      {"nsp_rate", {{"oracle", 100.0}, {"adversarial", 0.0}}},
      {"recall_at_n", 100.0},
  };
  return p;
}

void write_synthetic_probe(const SyntheticProbe& probe, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_jsonl(dir / "facts.jsonl", probe.facts);
  write_jsonl(dir / "relations.jsonl", probe.relations);
  write_jsonl(dir / "corpus.jsonl", probe.paragraphs);
  write_jsonl(dir / "generated.jsonl", probe.generated);
  {
    std::ofstream out(dir / "vocab.txt", std::ios::trunc | std::ios::binary);
    for (const auto& v : probe.vocab) out << v << '\n';
  }
  {
    std::ofstream out(dir / "expected.json", std::ios::trunc | std::ios::binary);
    out << probe.expected.dump(2) << '\n';
  }
  json config{{"facts", "facts.jsonl"},
              {"relations", "relations.jsonl"},
              {"vocab", "vocab.txt"},
              {"corpus_tag", "TREx"},
              {"corpus", "corpus.jsonl"},
              {"generated", "generated.jsonl"},
              {"strategies", {"none", "oracle", "retrieved", "adversarial", "generated"}},
              {"mode", "two_segment"},
              {"query_mode", "question"},
              {"scorer", {{"type", "copy"}, {"lambda", 0.9}, {"gate", 0.5}}},
              {"seed", 13},
              {"concurrency", 4},
              {"top_k", 5},
              {"out", "run_out"}};
  std::ofstream out(dir / "run_config.json", std::ios::trunc | std::ios::binary);
  out << config.dump(2) << '\n';
}

}  // namespace ctxprobe
