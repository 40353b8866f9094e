// ctxprobe command line: index, contexts, run, report, serve-mock.
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "ctxprobe/context_builder.hpp"
#include "ctxprobe/corpus_index.hpp"
#include "ctxprobe/error.hpp"
#include "ctxprobe/evaluation.hpp"
#include "ctxprobe/probe_data.hpp"
#include "ctxprobe/remote.hpp"
#include "ctxprobe/report.hpp"
#include "ctxprobe/run.hpp"
#include "ctxprobe/scorer.hpp"

namespace fs = std::filesystem;
using namespace ctxprobe;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInvalid = 2;

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
}

int index_build(const fs::path& corpus, const fs::path& out, std::uint32_t hash_bits, std::uint32_t ngrams,
                const fs::path& stopwords) {
  require_exists(corpus, "corpus file");
  if (hash_bits < 1 || hash_bits > 32) throw ValidationError("--hash-bits must be in [1, 32]");
  if (ngrams < 1) throw ValidationError("--ngrams must be >= 1");
  IndexConfig cfg;
  cfg.hash_bits = hash_bits;
  cfg.ngram_order = ngrams;
  if (!stopwords.empty()) cfg.stopwords = load_stopwords(stopwords);
  auto store = ParagraphStore::load(corpus);
  auto index = TfidfIndex::build(store.paragraphs(), cfg);
  index.save(out);
  std::cerr << "indexed " << index.num_paragraphs() << " paragraphs into " << out.string() << '\n';
  return kOk;
}

int index_query(const fs::path& path, const std::string& text, std::size_t k, const fs::path& stopwords) {
  require_exists(path, "index file");
  auto index = stopwords.empty() ? TfidfIndex::load(path) : TfidfIndex::load(path, load_stopwords(stopwords));
  for (const auto& hit : index.query(text, k)) {
    std::printf("%s\t%.6f\n", hit.para_id.c_str(), hit.score);
  }
  return kOk;
}

struct ContextsArgs {
  fs::path facts, relations, index, corpus, generated, out;
  std::string strategy, corpus_tag = "Other", query_mode = "question";
  std::uint64_t seed = 0;
  std::size_t max_sentences = kDefaultMaxSentences;
  std::size_t threads = 1;
};

int contexts_build(const ContextsArgs& a) {
  require_exists(a.facts, "facts file");
  require_exists(a.relations, "relations file");
  auto strategy = parse_strategy(a.strategy);
  auto query_mode = parse_query_mode(a.query_mode);

  std::optional<ParagraphStore> store;
  std::optional<TfidfIndex> index;
  std::optional<GeneratedImport> generated;
  if (strategy == Strategy::Retrieved) {
    if (a.corpus.empty()) throw ValidationError("retrieved contexts need --corpus");
    require_exists(a.corpus, "corpus file");
    if (!a.index.empty()) require_exists(a.index, "index file");
  }
  if (strategy == Strategy::Generated) {
    if (a.generated.empty()) throw ValidationError("generated contexts need --generated");
    require_exists(a.generated, "generated-contexts file");
  }

  auto relations = load_relations(a.relations);
  auto loaded = load_facts(a.facts, CorpusTag::parse(a.corpus_tag), relations);
  for (const auto& i : loaded.issues) {
    std::cerr << a.facts.string() << ":" << i.line << ": " << i.message << '\n';
  }
  if (strategy == Strategy::Retrieved) {
    store = ParagraphStore::load(a.corpus);
    index = a.index.empty() ? TfidfIndex::build(store->paragraphs()) : TfidfIndex::load(a.index);
  }
  if (strategy == Strategy::Generated) generated = import_generated(a.generated, loaded.facts);

  ContextSources sources;
  sources.index = index ? &*index : nullptr;
  sources.store = store ? &*store : nullptr;
  sources.generated = generated ? &*generated : nullptr;
  sources.query_mode = query_mode;
  sources.seed = a.seed;
  sources.max_sentences = a.max_sentences;
  auto batch = build_contexts(strategy, loaded.facts, sources, a.threads);

  std::vector<Context> present;
  for (const auto& c : batch.contexts) {
    if (c) present.push_back(*c);
  }
  write_contexts(a.out, present);
  for (const auto& s : batch.skipped) std::cerr << "skipped " << s.uuid << ": " << s.reason << '\n';
  std::cerr << "wrote " << present.size() << " contexts, skipped " << batch.skipped.size() << '\n';
  return kOk;
}

int run_command(const fs::path& config_path, const std::vector<std::string>& overrides,
                std::optional<std::size_t> stop_after) {
  auto config = RunConfig::load(config_path, overrides);
  RunHooks hooks;
  hooks.stop_after = stop_after;
  hooks.log = [](std::string_view msg) { std::cerr << msg << '\n'; };
  auto outcome = run(config, hooks);
  for (const auto& m : outcome.messages) std::cerr << m << '\n';
  return outcome.exit_code;
}

int report_command(const fs::path& baseline_path, const std::vector<fs::path>& preds, const fs::path& facts_path,
                   const fs::path& relations_path, const std::string& corpus_tag, const fs::path& out) {
  require_exists(baseline_path, "baseline predictions");
  for (const auto& p : preds) require_exists(p, "predictions file");
  std::optional<DatasetStats> stats;
  if (!facts_path.empty()) {
    require_exists(facts_path, "facts file");
    RelationTable relations;
    if (!relations_path.empty()) relations = load_relations(relations_path);
    LoadOptions opts;
    opts.require_templates = false;
    stats = dataset_stats(load_facts(facts_path, CorpusTag::parse(corpus_tag), relations, opts).facts);
  }

  auto baseline_records = read_records(baseline_path);
  RunData baseline{run_name_for(baseline_path, baseline_records), baseline_records};
  std::map<std::string, double> nocontext;
  for (const auto& r : baseline.records) nocontext.emplace(r.fact_uuid, r.answer_logprob);

  std::vector<RunData> runs;
  for (const auto& p : preds) {
    auto records = read_records(p);
    for (auto& r : records) {
      if (r.answer_logprob_nocontext) continue;
      if (auto it = nocontext.find(r.fact_uuid); it != nocontext.end()) r.answer_logprob_nocontext = it->second;
    }
    runs.push_back({run_name_for(p, records), std::move(records)});
  }
  auto report = build_report(baseline, runs, std::nullopt, stats);
  write_report(report, baseline, runs, out);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << "wrote " << out.string() << '\n';
  return kOk;
}

MockServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve_mock(const std::string& host, int port, const MockSpec& spec) {
  std::shared_ptr<const Scorer> scorer = make_mock_scorer(spec);
  MockServer server(scorer, host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << server.endpoint() << std::endl;
  server.serve();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-augmented cloze probing toolkit"};
  app.require_subcommand(1);

  fs::path stopwords;

  auto* index_cmd = app.add_subcommand("index", "Build or query a TF-IDF paragraph index");
  index_cmd->require_subcommand(1);
  fs::path ib_corpus, ib_out;
  std::uint32_t ib_bits = 24, ib_ngrams = 2;
  auto* ib = index_cmd->add_subcommand("build", "Build an index from a corpus JSONL");
  ib->add_option("--corpus", ib_corpus, "Paragraphs JSONL")->required();
  ib->add_option("--out", ib_out, "Index file")->required();
  ib->add_option("--hash-bits", ib_bits, "Feature hash bits")->capture_default_str();
  ib->add_option("--ngrams", ib_ngrams, "Maximum n-gram order")->capture_default_str();
  ib->add_option("--stopwords", stopwords, "Stopword list (one per line)");

  fs::path iq_index;
  std::string iq_text;
  std::size_t iq_k = 10;
  auto* iq = index_cmd->add_subcommand("query", "Print top-k paragraphs for a query");
  iq->add_option("--index", iq_index, "Index file")->required();
  iq->add_option("--text", iq_text, "Query text")->required();
  iq->add_option("-k", iq_k, "Number of results")->capture_default_str();
  iq->add_option("--stopwords", stopwords, "Stopword list used at build time");

  auto* contexts_cmd = app.add_subcommand("contexts", "Build contexts for a probe");
  contexts_cmd->require_subcommand(1);
  ContextsArgs ca;
  auto* cb = contexts_cmd->add_subcommand("build", "Write one context per fact");
  cb->add_option("--facts", ca.facts)->required();
  cb->add_option("--relations", ca.relations)->required();
  cb->add_option("--strategy", ca.strategy, "none|oracle|retrieved|adversarial|generated")->required();
  cb->add_option("--index", ca.index);
  cb->add_option("--corpus", ca.corpus, "Paragraphs JSONL (retrieved)");
  cb->add_option("--generated", ca.generated, "Generated contexts JSONL");
  cb->add_option("--corpus-tag", ca.corpus_tag)->capture_default_str();
  cb->add_option("--query-mode", ca.query_mode, "question|cloze")->capture_default_str();
  cb->add_option("--max-sentences", ca.max_sentences)->capture_default_str();
  cb->add_option("--threads", ca.threads)->capture_default_str();
  cb->add_option("--seed", ca.seed)->capture_default_str();
  cb->add_option("--out", ca.out)->required();

  fs::path run_config;
  std::vector<std::string> run_overrides;
  std::size_t run_stop_after = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a configured experiment end to end");
  run_cmd->add_option("config", run_config, "Run configuration JSON")->required();
  run_cmd->add_option("--set", run_overrides, "Override a config key (key=value)");
  run_cmd->add_option("--stop-after", run_stop_after, "Stop after N newly scored records (resumable)");

  fs::path rp_baseline, rp_facts, rp_relations, rp_out;
  std::vector<fs::path> rp_preds;
  std::string rp_tag = "Other";
  auto* report_cmd = app.add_subcommand("report", "Evaluate prediction files against a baseline");
  report_cmd->add_option("--baseline", rp_baseline, "No-context predictions")->required();
  report_cmd->add_option("--preds", rp_preds, "Predictions with context")->required();
  report_cmd->add_option("--facts", rp_facts, "Facts JSONL for dataset statistics");
  report_cmd->add_option("--relations", rp_relations);
  report_cmd->add_option("--corpus-tag", rp_tag)->capture_default_str();
  report_cmd->add_option("--out", rp_out)->required();

  std::string sm_host = "127.0.0.1";
  int sm_port = 8080;
  MockSpec sm_spec;
  auto* serve_cmd = app.add_subcommand("serve-mock", "Serve a mock scorer over HTTP");
  serve_cmd->add_option("--host", sm_host)->capture_default_str();
  serve_cmd->add_option("--port", sm_port, "0 picks a free port")->capture_default_str();
  serve_cmd->add_option("--scorer", sm_spec.kind, "copy|uniform|prior")->capture_default_str();
  serve_cmd->add_option("--lambda", sm_spec.lambda)->capture_default_str();
  serve_cmd->add_option("--gate", sm_spec.gate)->capture_default_str();
  serve_cmd->add_option("--prior", sm_spec.prior_path, "Token frequency file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (ib->parsed()) return index_build(ib_corpus, ib_out, ib_bits, ib_ngrams, stopwords);
    if (iq->parsed()) return index_query(iq_index, iq_text, iq_k, stopwords);
    if (cb->parsed()) return contexts_build(ca);
    if (run_cmd->parsed()) {
      std::optional<std::size_t> stop;
      if (run_stop_after > 0) stop = run_stop_after;
      return run_command(run_config, run_overrides, stop);
    }
    if (report_cmd->parsed()) return report_command(rp_baseline, rp_preds, rp_facts, rp_relations, rp_tag, rp_out);
    if (serve_cmd->parsed()) return serve_mock(sm_host, sm_port, sm_spec);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
