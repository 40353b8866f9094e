#include "ctxprobe/context_builder.hpp"

#include <fstream>
#include <unordered_set>

#include "ctxprobe/error.hpp"
#include "ctxprobe/parallel.hpp"
#include "ctxprobe/text.hpp"
#include "json.hpp"

namespace ctxprobe {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::None: return "none";
    case Strategy::Oracle: return "oracle";
    case Strategy::Retrieved: return "retrieved";
    case Strategy::Adversarial: return "adversarial";
    case Strategy::Generated: return "generated";
  }
  return "none";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::None, Strategy::Oracle, Strategy::Retrieved, Strategy::Adversarial, Strategy::Generated}) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown strategy '" + std::string(name) + "'");
}

std::string_view to_string(QueryMode m) noexcept { return m == QueryMode::Question ? "question" : "cloze"; }

QueryMode parse_query_mode(std::string_view name) {
  if (name == "question") return QueryMode::Question;
  if (name == "cloze") return QueryMode::Cloze;
  throw InvalidArgument("unknown query mode '" + std::string(name) + "'");
}

bool answer_in_context(std::string_view context_text, std::string_view answer) {
  return contains_token(context_text, answer);
}

Context no_context(const Fact& fact) { return {fact.uuid, Strategy::None, "", "", false, false}; }

Context oracle_context(const Fact& fact, std::size_t max_sentences) {
  if (!fact.evidence || trim(*fact.evidence).empty()) {
    throw MissingEvidence("fact " + fact.uuid + " has no evidence");
  }
  auto sentences = split_sentences(*fact.evidence);
  std::string text;
  for (std::size_t i = 0; i < sentences.size() && i < max_sentences; ++i) {
    if (i) text.push_back(' ');
    text += sentences[i];
  }
  Context c{fact.uuid, Strategy::Oracle, std::move(text), fact.uuid, false, false};
  c.answer_present = answer_in_context(c.text, fact.answer);
  return c;
}

std::string retrieval_query(const Fact& fact, QueryMode mode) {
  if (mode == QueryMode::Question) return to_natural_question(fact);
  return std::string(trim(replace_all(instantiate_cloze(fact).text, kMaskToken, "")));
}

Context retrieved_context(const Fact& fact, const TfidfIndex& index, const ParagraphStore& store, QueryMode mode) {
  Context c{fact.uuid, Strategy::Retrieved, "", "", false, true};
  auto hits = index.query(retrieval_query(fact, mode), 1);
  if (hits.empty() || hits.front().score <= 0.0) return c;
  const auto* p = store.find(hits.front().para_id);
  if (!p) throw Error("paragraph '" + hits.front().para_id + "' is in the index but not in the corpus");
  c.text = p->text;
  c.source_id = p->para_id;
  c.miss = false;
  c.answer_present = answer_in_context(c.text, fact.answer);
  return c;
}

std::size_t uniform_index(std::uint64_t& state, std::size_t bound) {
  if (bound == 0) throw InvalidArgument("uniform_index bound must be positive");
  const std::uint64_t b = bound;
  const std::uint64_t threshold = (0 - b) % b;
  while (true) {
    auto x = splitmix64(state);
    if (x >= threshold) return static_cast<std::size_t>(x % b);
  }
}

AdversarialSampler::AdversarialSampler(const FactSet& facts, std::uint64_t seed) : facts_(facts), seed_(seed) {
  for (std::size_t i = 0; i < facts.facts.size(); ++i) {
    const auto& f = facts.facts[i];
    if (f.evidence && !trim(*f.evidence).empty()) by_relation_[f.relation].push_back(i);
  }
}

const Fact& AdversarialSampler::donor_for(const Fact& fact) const {
  std::vector<std::size_t> eligible;
  if (auto it = by_relation_.find(fact.relation); it != by_relation_.end()) {
    for (auto i : it->second) {
      const auto& d = facts_.facts[i];
      if (d.uuid != fact.uuid && d.answer != fact.answer) eligible.push_back(i);
    }
  }
  if (eligible.empty()) throw NoDonor("no adversarial donor for fact " + fact.uuid + " (relation " + fact.relation + ")");
  std::uint64_t state = seed_ ^ fnv1a64(fact.uuid);
  return facts_.facts[eligible[uniform_index(state, eligible.size())]];
}

Context AdversarialSampler::sample(const Fact& fact, std::size_t max_sentences) const {
  const auto& donor = donor_for(fact);
  auto c = oracle_context(donor, max_sentences);
  c.fact_uuid = fact.uuid;
  c.strategy = Strategy::Adversarial;
  c.source_id = donor.uuid;
  c.answer_present = answer_in_context(c.text, fact.answer);
  return c;
}

Context adversarial_context(const Fact& fact, const FactSet& facts, std::uint64_t seed, std::size_t max_sentences) {
  return AdversarialSampler(facts, seed).sample(fact, max_sentences);
}

GeneratedImport import_generated(const std::filesystem::path& path, const FactSet& facts) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open generated-contexts file " + path.string());
  std::unordered_map<std::string, const Fact*> by_uuid;
  for (const auto& f : facts.facts) by_uuid.emplace(f.uuid, &f);

  GeneratedImport out;
  std::string default_batch = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("uuid") || !rec["uuid"].is_string() ||
        !rec.contains("text") || !rec["text"].is_string()) {
      out.issues.push_back({RecordIssue::Severity::Error, line_no, "", "malformed generated-context record"});
      continue;
    }
    auto uuid = rec["uuid"].get<std::string>();
    auto fit = by_uuid.find(uuid);
    if (fit == by_uuid.end()) {
      out.issues.push_back({RecordIssue::Severity::Warning, line_no, uuid, "unknown uuid"});
      continue;
    }
    if (out.contexts.contains(uuid)) {
      out.issues.push_back({RecordIssue::Severity::Warning, line_no, uuid, "duplicate uuid; later record rejected"});
      continue;
    }
    Context c{uuid, Strategy::Generated, rec["text"].get<std::string>(), rec.value("batch", default_batch), false, false};
    c.answer_present = answer_in_context(c.text, fit->second->answer);
    out.contexts.emplace(uuid, std::move(c));
  }
  for (const auto& f : facts.facts) {
    if (!out.contexts.contains(f.uuid)) out.missing.push_back(f.uuid);
  }
  return out;
}

ContextBatch build_contexts(Strategy strategy, const FactSet& facts, const ContextSources& sources,
                            std::size_t threads) {
  if (strategy == Strategy::Retrieved && (!sources.index || !sources.store)) {
    throw InvalidArgument("retrieved contexts need an index and a corpus");
  }
  if (strategy == Strategy::Generated && !sources.generated) {
    throw InvalidArgument("generated contexts need an imported generations file");
  }
  std::optional<AdversarialSampler> sampler;
  if (strategy == Strategy::Adversarial) sampler.emplace(facts, sources.seed);

  ContextBatch batch;
  batch.contexts.resize(facts.size());
  std::vector<std::string> reasons(facts.size());
  parallel_for(facts.size(), threads, [&](std::size_t i) {
    const auto& fact = facts.facts[i];
    try {
      switch (strategy) {
        case Strategy::None: batch.contexts[i] = no_context(fact); break;
        case Strategy::Oracle: batch.contexts[i] = oracle_context(fact, sources.max_sentences); break;
        case Strategy::Retrieved:
          batch.contexts[i] = retrieved_context(fact, *sources.index, *sources.store, sources.query_mode);
          break;
        case Strategy::Adversarial: batch.contexts[i] = sampler->sample(fact, sources.max_sentences); break;
        case Strategy::Generated: {
          auto it = sources.generated->contexts.find(fact.uuid);
          if (it == sources.generated->contexts.end()) {
            reasons[i] = "no generated context";
          } else {
            batch.contexts[i] = it->second;
          }
          break;
        }
      }
    } catch (const MissingEvidence& e) {
      reasons[i] = e.what();
    } catch (const NoDonor& e) {
      reasons[i] = e.what();
    } catch (const MissingTemplate& e) {
      reasons[i] = e.what();
    } catch (const TemplateError& e) {
      reasons[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < facts.size(); ++i) {
    if (!batch.contexts[i]) batch.skipped.push_back({facts.facts[i].uuid, reasons[i]});
  }
  return batch;
}

void write_contexts(const std::filesystem::path& path, const std::vector<Context>& contexts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write contexts file " + path.string());
  for (const auto& c : contexts) {
    json j{{"uuid", c.fact_uuid},
           {"strategy", to_string(c.strategy)},
           {"text", c.text},
           {"source_id", c.source_id},
           {"answer_present", c.answer_present}};
    if (c.miss) j["miss"] = true;
    out << j.dump() << '\n';
  }
}

std::vector<Context> read_contexts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open contexts file " + path.string());
  std::vector<Context> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      Context c;
      c.fact_uuid = j.at("uuid").get<std::string>();
      c.strategy = parse_strategy(j.at("strategy").get<std::string>());
      c.text = j.at("text").get<std::string>();
      c.source_id = j.value("source_id", std::string());
      c.answer_present = j.value("answer_present", false);
      c.miss = j.value("miss", false);
      out.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ctxprobe
