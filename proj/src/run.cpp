#include "ctxprobe/run.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <set>

#include "ctxprobe/corpus_index.hpp"
#include "ctxprobe/error.hpp"
#include "ctxprobe/evaluation.hpp"
#include "ctxprobe/parallel.hpp"
#include "ctxprobe/probe_data.hpp"
#include "ctxprobe/remote.hpp"
#include "ctxprobe/report.hpp"
#include "ctxprobe/scorer.hpp"

namespace ctxprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kManifestFlushEvery = 16;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json_atomic(const fs::path& path, const json& j) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

template <class T>
T typed(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const std::exception&) {
    throw ValidationError(std::string("config field '") + key + "' has the wrong type");
  }
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ValidationError(std::string(what) + " path is required");
  if (!fs::exists(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto piece = trim(s.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end + 1;
  }
  return out;
}

}  // namespace

fs::path predictions_path(const fs::path& out, Strategy s) {
  return out / ("predictions." + std::string(to_string(s)) + ".jsonl");
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return "fnv1a64:" + hex64(fnv1a64(bytes));
}

void apply_override(json& j, std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ValidationError("override must look like key=value: " + std::string(assignment));
  }
  std::string key(trim(assignment.substr(0, eq)));
  std::string raw(trim(assignment.substr(eq + 1)));

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  if (key == "strategies" && value.is_string()) value = split_commas(value.get<std::string>());

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    auto dot = key.find('.', start);
    auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("bad override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("run configuration must be a JSON object");
  auto path_of = [&](const char* key) -> fs::path {
    auto s = typed<std::string>(j, key, "");
    if (s.empty()) return {};
    fs::path p(s);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p.lexically_normal();
  };

  RunConfig c;
  try {
    c.facts = path_of("facts");
    c.relations = path_of("relations");
    c.vocab = path_of("vocab");
    c.corpus_tag = typed<std::string>(j, "corpus_tag", c.corpus_tag);
    c.corpus = path_of("corpus");
    c.index = path_of("index");
    c.generated = path_of("generated");
    c.out = path_of("out");

    if (auto it = j.find("strategies"); it != j.end()) {
      std::vector<std::string> names;
      if (it->is_string()) {
        names = split_commas(it->get<std::string>());
      } else if (it->is_array()) {
        names = it->get<std::vector<std::string>>();
      } else {
        throw ValidationError("config field 'strategies' must be a list");
      }
      c.strategies.clear();
      for (const auto& n : names) c.strategies.push_back(parse_strategy(n));
    }
    c.mode = parse_segment_mode(typed<std::string>(j, "mode", std::string(to_string(c.mode))));
    c.query_mode = parse_query_mode(typed<std::string>(j, "query_mode", std::string(to_string(c.query_mode))));

    if (auto it = j.find("scorer"); it != j.end()) {
      if (it->is_string()) {
        c.scorer.type = it->get<std::string>();
      } else if (it->is_object()) {
        c.scorer.type = typed<std::string>(*it, "type", c.scorer.type);
        c.scorer.lambda = typed<double>(*it, "lambda", c.scorer.lambda);
        c.scorer.gate = typed<double>(*it, "gate", c.scorer.gate);
        c.scorer.endpoint = typed<std::string>(*it, "endpoint", "");
        auto prior = typed<std::string>(*it, "prior", "");
        if (!prior.empty()) {
          fs::path p(prior);
          if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
          c.scorer.prior = p.lexically_normal();
        }
      } else {
        throw ValidationError("config field 'scorer' must be a string or object");
      }
    }

    if (j.contains("seed") && !j["seed"].is_null()) {
      c.seed = typed<std::uint64_t>(j, "seed", 0);
    } else if (const char* env = std::getenv(kSeedEnv)) {
      try {
        c.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ValidationError(std::string(kSeedEnv) + " is not an unsigned integer");
      }
    }
    c.concurrency = typed<std::size_t>(j, "concurrency", c.concurrency);
    c.top_k = typed<std::size_t>(j, "top_k", c.top_k);
    c.max_sentences = typed<std::size_t>(j, "max_sentences", c.max_sentences);
    c.recall_k_max = typed<std::size_t>(j, "recall_k_max", c.recall_k_max);
    c.hash_bits = typed<std::uint32_t>(j, "hash_bits", c.hash_bits);
    c.ngrams = typed<std::uint32_t>(j, "ngrams", c.ngrams);
  } catch (const InvalidArgument& e) {
    throw ValidationError(e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open run configuration " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("run configuration is not valid JSON: " + path.string());
  for (const auto& o : overrides) apply_override(j, o);
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
  std::vector<std::string> names;
  for (auto s : strategies) names.emplace_back(to_string(s));
  return {{"facts", facts.string()},
          {"relations", relations.string()},
          {"vocab", vocab.string()},
          {"corpus_tag", corpus_tag},
          {"corpus", corpus.string()},
          {"index", index.string()},
          {"generated", generated.string()},
          {"strategies", names},
          {"mode", to_string(mode)},
          {"query_mode", to_string(query_mode)},
          {"scorer",
           {{"type", scorer.type},
            {"lambda", scorer.lambda},
            {"gate", scorer.gate},
            {"prior", scorer.prior.string()},
            {"endpoint", scorer.endpoint}}},
          {"seed", seed},
          {"concurrency", concurrency},
          {"out", out.string()},
          {"top_k", top_k},
          {"max_sentences", max_sentences},
          {"recall_k_max", recall_k_max},
          {"hash_bits", hash_bits},
          {"ngrams", ngrams}};
}

std::string RunConfig::hash() const {
  auto j = to_json();
  j.erase("concurrency");
  j.erase("out");
  return hex64(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
  require_file(facts, "facts file");
  require_file(relations, "relations file");
  require_file(vocab, "vocab file");
  if (strategies.empty()) throw ValidationError("at least one strategy is required");
  bool wants_retrieval = std::find(strategies.begin(), strategies.end(), Strategy::Retrieved) != strategies.end();
  if (wants_retrieval && corpus.empty()) throw ValidationError("retrieved contexts need a corpus file");
  if (!corpus.empty()) require_file(corpus, "corpus file");
  if (!index.empty()) require_file(index, "index file");
  if (!index.empty() && corpus.empty()) throw ValidationError("an index needs its corpus file for paragraph texts");
  if (std::find(strategies.begin(), strategies.end(), Strategy::Generated) != strategies.end()) {
    require_file(generated, "generated-contexts file");
  }
  if (scorer.type == "remote") {
    if (scorer.endpoint.empty() && !std::getenv(kEndpointEnv)) {
      throw ValidationError("remote scorer needs an endpoint or CTXPROBE_ENDPOINT");
    }
  } else if (scorer.type == "copy" || scorer.type == "uniform" || scorer.type == "prior") {
    if (scorer.type == "prior" && scorer.prior.empty()) throw ValidationError("prior scorer needs a prior file");
    if (!scorer.prior.empty()) require_file(scorer.prior, "prior file");
    if (!(scorer.lambda >= 0.0 && scorer.lambda < 1.0)) throw ValidationError("scorer.lambda must be in [0, 1)");
    if (!(scorer.gate >= 0.0 && scorer.gate <= 1.0)) throw ValidationError("scorer.gate must be in [0, 1]");
  } else {
    throw ValidationError("unknown scorer type '" + scorer.type + "'");
  }
  if (concurrency < 1) throw ValidationError("concurrency must be >= 1");
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
  if (max_sentences < 1) throw ValidationError("max_sentences must be >= 1");
  if (hash_bits < 1 || hash_bits > 32) throw ValidationError("hash_bits must be in [1, 32]");
  if (ngrams < 1) throw ValidationError("ngrams must be >= 1");
  if (out.empty()) throw ValidationError("output directory is required");
}

namespace {

class Pipeline {
 public:
  Pipeline(const RunConfig& config, const RunHooks& hooks) : cfg_(config), hooks_(hooks) {}

  RunOutcome execute() {
    RunOutcome outcome;
    fs::create_directories(cfg_.out);
    outcome.manifest = cfg_.out / "manifest.json";
    manifest_path_ = outcome.manifest;
    init_manifest();

    load_inputs();
    if (facts_.empty()) throw Error("no facts left after loading and vocabulary filtering");
    make_scorer();

    std::vector<Strategy> order{Strategy::None};
    for (auto s : cfg_.strategies) {
      if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
    }

    std::map<Strategy, std::vector<RunRecord>> results;
    for (auto s : order) {
      auto records = score_strategy(s);
      if (interrupted_) {
        manifest_["status"] = "partial";
        flush_manifest();
        outcome.exit_code = 1;
        outcome.interrupted = true;
        outcome.messages.push_back("interrupted; rerun with the same configuration to resume");
        return outcome;
      }
      if (s == Strategy::None) {
        if (records.empty()) throw Error("baseline scoring produced no records");
        for (const auto& r : records) baseline_logprob_.emplace(r.fact_uuid, r.answer_logprob);
      }
      results.emplace(s, std::move(records));
    }

    write_outputs(order, results);
    manifest_["status"] = "complete";
    flush_manifest();
    outcome.messages.push_back("wrote " + cfg_.out.string());
    return outcome;
  }

 private:
  void log(const std::string& msg) const {
    if (hooks_.log) hooks_.log(msg);
  }

  void init_manifest() {
    if (fs::exists(manifest_path_)) {
      std::ifstream in(manifest_path_);
      auto old = json::parse(in, nullptr, false);
      if (!old.is_discarded() && old.value("config_hash", "") == cfg_.hash() && old.value("status", "") == "partial") {
        resume_ = true;
        manifest_ = std::move(old);
        log("resuming partial run");
      }
    }
    if (!resume_) {
      manifest_ = json::object();
      manifest_["strategies"] = json::object();
    }
    auto cfg = cfg_.to_json();
    cfg.erase("concurrency");
    cfg.erase("out");
    manifest_["config"] = cfg;
    manifest_["config_hash"] = cfg_.hash();
    manifest_["seed"] = cfg_.seed;
    manifest_["status"] = "partial";
    flush_manifest();
  }

  void flush_manifest() { write_json_atomic(manifest_path_, manifest_); }

  void load_inputs() {
    auto relations = load_relations(cfg_.relations);
    auto loaded = load_facts(cfg_.facts, CorpusTag::parse(cfg_.corpus_tag), relations);
    vocab_ = std::make_shared<const Vocabulary>(Vocabulary::load(cfg_.vocab));
    auto filtered = filter_by_vocab(loaded.facts, *vocab_);
    facts_ = std::move(filtered.facts);

    json issues = json::array();
    for (const auto& i : loaded.issues) {
      issues.push_back({{"line", i.line},
                        {"uuid", i.uuid},
                        {"severity", i.severity == RecordIssue::Severity::Error ? "error" : "warning"},
                        {"message", i.message}});
    }
    manifest_["facts"] = {{"loaded", loaded.facts.size()},
                          {"kept", facts_.size()},
                          {"removed_fraction", filtered.removed_fraction},
                          {"issues", std::move(issues)}};
    log("facts: " + std::to_string(facts_.size()) + " kept of " + std::to_string(loaded.facts.size()));

    if (!cfg_.corpus.empty()) {
      store_ = ParagraphStore::load(cfg_.corpus);
      if (cfg_.index.empty()) {
        IndexConfig ic;
        ic.hash_bits = cfg_.hash_bits;
        ic.ngram_order = cfg_.ngrams;
        index_ = TfidfIndex::build(store_->paragraphs(), ic);
      } else {
        index_ = TfidfIndex::load(cfg_.index);
      }
      if (cfg_.recall_k_max > 0) {
        auto mode = cfg_.query_mode;
        recall_ = recall_at_k(
            *index_, *store_, facts_,
            [mode](const Fact& f) {
              try {
                return retrieval_query(f, mode);
              } catch (const Error&) {
                return std::string();
              }
            },
            cfg_.recall_k_max, cfg_.concurrency);
      }
    }
    if (!cfg_.generated.empty() &&
        std::find(cfg_.strategies.begin(), cfg_.strategies.end(), Strategy::Generated) != cfg_.strategies.end()) {
      generated_ = import_generated(cfg_.generated, facts_);
    }
  }

  void make_scorer() {
    if (cfg_.scorer.type == "remote") {
      RemoteOptions opts;
      opts.endpoint = cfg_.scorer.endpoint;
      opts.max_in_flight = cfg_.concurrency;
      scorer_ = std::make_unique<RemoteScorer>(std::move(opts));
    } else {
      scorer_ = make_mock_scorer({cfg_.scorer.type, cfg_.scorer.lambda, cfg_.scorer.gate, cfg_.scorer.prior.string()});
    }
  }

  std::vector<RunRecord> score_strategy(Strategy s) {
    const std::string name(to_string(s));
    ContextSources sources;
    sources.index = index_ ? &*index_ : nullptr;
    sources.store = store_ ? &*store_ : nullptr;
    sources.generated = generated_ ? &*generated_ : nullptr;
    sources.query_mode = cfg_.query_mode;
    sources.seed = cfg_.seed;
    sources.max_sentences = cfg_.max_sentences;
    auto batch = build_contexts(s, facts_, sources, cfg_.concurrency);
    if (s != Strategy::None) {
      std::vector<Context> present;
      for (const auto& c : batch.contexts) {
        if (c) present.push_back(*c);
      }
      write_contexts(cfg_.out / ("contexts." + name + ".jsonl"), present);
    }

    auto& entry = manifest_["strategies"][name];
    if (!entry.is_object()) entry = json::object();
    const auto final_path = predictions_path(cfg_.out, s);
    auto partial_path = final_path;
    partial_path.replace_extension(".partial.jsonl");

    if (resume_ && entry.value("complete", false) && fs::exists(final_path) &&
        entry.value("checksum", "") == file_checksum(final_path)) {
      log(name + ": already complete");
      return read_records(final_path);
    }

    std::map<std::string, RunRecord> done;
    std::set<std::string> scored;
    if (resume_ && entry.contains("scored") && fs::exists(partial_path)) {
      std::set<std::string> committed = entry["scored"].get<std::set<std::string>>();
      for (auto& r : read_records(partial_path)) {
        if (committed.contains(r.fact_uuid)) done.emplace(r.fact_uuid, std::move(r));
      }
      for (const auto& [uuid, _] : done) scored.insert(uuid);
    }
    {
      std::vector<RunRecord> kept;
      for (const auto& [_, r] : done) kept.push_back(r);
      write_records(partial_path, kept);
    }

    json skipped = json::array();
    for (const auto& sk : batch.skipped) skipped.push_back({{"uuid", sk.uuid}, {"reason", sk.reason}});
    entry = {{"complete", false}, {"scored", scored}, {"skipped", std::move(skipped)}};

    std::vector<std::size_t> tasks;
    for (std::size_t i = 0; i < facts_.size(); ++i) {
      if (batch.contexts[i] && !done.contains(facts_.facts[i].uuid)) tasks.push_back(i);
    }
    log(name + ": scoring " + std::to_string(tasks.size()) + " facts");

    std::ofstream partial(partial_path, std::ios::app | std::ios::binary);
    if (!partial) throw Error("cannot append to " + partial_path.string());
    std::mutex mu;
    std::map<std::string, std::string> failures;
    std::size_t since_flush = 0;

    parallel_for(tasks.size(), cfg_.concurrency, [&](std::size_t t) {
      if (interrupted_) return;
      const auto& fact = facts_.facts[tasks[t]];
      const auto& ctx = *batch.contexts[tasks[t]];
      ScoreRequest req;
      req.id = fact.uuid;
      req.query = instantiate_cloze(fact).text;
      if (!ctx.text.empty()) req.context = ctx.text;
      req.mode = cfg_.mode;
      req.candidates = vocab_;
      req.top_k = cfg_.top_k;

      RunRecord rec;
      try {
        auto pred = scorer_->score(req);
        rec = to_record(fact, ctx, req, pred, s);
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        failures[fact.uuid] = e.what();
        return;
      }

      std::lock_guard lock(mu);
      if (interrupted_) return;
      partial << to_json(rec).dump() << '\n';
      partial.flush();
      scored.insert(rec.fact_uuid);
      done.emplace(rec.fact_uuid, std::move(rec));
      ++newly_scored_;
      if (++since_flush >= kManifestFlushEvery) {
        since_flush = 0;
        entry["scored"] = scored;
        flush_manifest();
      }
      if (hooks_.stop_after && newly_scored_ >= *hooks_.stop_after) interrupted_ = true;
    });
    partial.close();

    json fails = json::array();
    for (const auto& [uuid, msg] : failures) fails.push_back({{"uuid", uuid}, {"error", msg}});
    entry["failures"] = std::move(fails);
    entry["scored"] = scored;
    if (interrupted_) {
      flush_manifest();
      return {};
    }

    std::vector<RunRecord> records;
    records.reserve(done.size());
    for (auto& [_, r] : done) records.push_back(std::move(r));
    write_records(final_path, records);
    fs::remove(partial_path);
    entry.erase("scored");
    entry["complete"] = true;
    entry["records"] = records.size();
    entry["predictions"] = final_path.filename().string();
    entry["checksum"] = file_checksum(final_path);
    flush_manifest();
    log(name + ": " + std::to_string(records.size()) + " records, " + std::to_string(failures.size()) + " failures");
    return records;
  }

  RunRecord to_record(const Fact& fact, const Context& ctx, const ScoreRequest& req, const Prediction& pred,
                      Strategy s) const {
    RunRecord r;
    r.fact_uuid = fact.uuid;
    r.relation = fact.relation;
    r.corpus = fact.corpus.name();
    r.strategy = std::string(to_string(s));
    r.answer = fact.answer;
    r.argmax_token = pred.argmax_token;
    auto idx = vocab_->find(fact.answer);
    if (!idx) throw InvalidArgument("answer '" + fact.answer + "' is not a candidate");
    r.answer_logprob = pred.candidate_logprobs.at(*idx);
    if (s == Strategy::None) {
      r.answer_logprob_nocontext = r.answer_logprob;
    } else if (auto it = baseline_logprob_.find(fact.uuid); it != baseline_logprob_.end()) {
      r.answer_logprob_nocontext = it->second;
    }
    r.nsp_prob = pred.nsp_prob;
    r.answer_present = ctx.answer_present;
    r.query = req.query;
    r.context = ctx.text;
    r.top_k = pred.top_k;
    return r;
  }

  void write_outputs(const std::vector<Strategy>& order, const std::map<Strategy, std::vector<RunRecord>>& results) {
    RunData baseline{"none", results.at(Strategy::None)};
    std::vector<RunData> runs;
    for (auto s : order) {
      if (s != Strategy::None) runs.push_back({std::string(to_string(s)), results.at(s)});
    }
    auto report = build_report(baseline, runs, recall_, dataset_stats(facts_));
    auto report_dir = cfg_.out / "report";
    write_report(report, baseline, runs, report_dir);

    json artifacts = json::object();
    for (auto s : order) {
      auto p = predictions_path(cfg_.out, s);
      artifacts[p.filename().string()] = file_checksum(p);
    }
    artifacts["report/report.json"] = file_checksum(report_dir / "report.json");
    manifest_["artifacts"] = std::move(artifacts);
  }

  const RunConfig& cfg_;
  const RunHooks& hooks_;
  fs::path manifest_path_;
  json manifest_;
  bool resume_ = false;
  std::atomic<bool> interrupted_{false};
  std::size_t newly_scored_ = 0;

  FactSet facts_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::optional<ParagraphStore> store_;
  std::optional<TfidfIndex> index_;
  std::optional<RecallCurve> recall_;
  std::optional<GeneratedImport> generated_;
  std::unique_ptr<Scorer> scorer_;
  std::map<std::string, double> baseline_logprob_;
};

}  // namespace

RunOutcome run(const RunConfig& config, const RunHooks& hooks) {
  RunOutcome outcome;
  try {
    config.validate();
  } catch (const ValidationError& e) {
    outcome.exit_code = 2;
    outcome.messages.push_back(e.what());
    return outcome;
  }
  try {
    return Pipeline(config, hooks).execute();
  } catch (const std::exception& e) {
    outcome.exit_code = 1;
    outcome.manifest = config.out / "manifest.json";
    outcome.messages.push_back(e.what());
    return outcome;
  }
}

}  // namespace ctxprobe
