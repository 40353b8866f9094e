#include "ctxprobe/report.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ctxprobe/error.hpp"

namespace ctxprobe {

using nlohmann::json;

namespace {

std::string fixed(double v, int decimals = 1) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string tsv_cell(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(c == '\t' || c == '\n' || c == '\r' ? ' ' : c);
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

bool all_have_nsp(std::span<const RunRecord> records) {
  if (records.empty()) return false;
  for (const auto& r : records) {
    if (!r.nsp_prob) return false;
  }
  return true;
}

bool all_paired(std::span<const RunRecord> records) {
  for (const auto& r : records) {
    if (!r.answer_logprob_nocontext) return false;
  }
  return true;
}

RunSummary summarize(const RunData& run, const RunData* baseline, std::vector<std::string>& warnings) {
  RunSummary s;
  s.name = run.name;
  s.p1 = precision_at_1(run.records);
  if (!s.p1.per_corpus.empty()) {
    std::map<std::string, double> weights;
    for (const auto& [c, n] : s.p1.relations_per_corpus) weights[c] = static_cast<double>(n);
    s.weighted_average_p1 = weighted_average(s.p1.per_corpus, weights);
  }
  if (baseline) {
    try {
      s.better_worse = delta_analysis(run.records, baseline->records);
    } catch (const InvalidArgument& e) {
      warnings.push_back(run.name + ": delta analysis skipped: " + e.what());
    }
  }
  if (all_have_nsp(run.records)) {
    s.nsp_rate_percent = nsp_rate(run.records);
    std::map<std::string, std::vector<RunRecord>> by_corpus;
    for (const auto& r : run.records) by_corpus[r.corpus].push_back(r);
    for (const auto& [c, recs] : by_corpus) s.nsp_rate_per_corpus[c] = nsp_rate(recs);
    if (run.records.size() >= 2 && all_paired(run.records)) s.nsp_delta = nsp_delta_correlation(run.records);
  }
  return s;
}

json to_json(const PrecisionTable& t) {
  return {{"per_relation", t.per_relation},
          {"per_corpus", t.per_corpus},
          {"relations_per_corpus", t.relations_per_corpus},
          {"overall", t.overall},
          {"records", t.records}};
}

json to_json(const RunSummary& s) {
  json j{{"name", s.name}, {"p1", to_json(s.p1)}, {"weighted_average_p1", s.weighted_average_p1}};
  if (s.better_worse) {
    const auto& b = *s.better_worse;
    j["better_worse"] = {{"better_present", b.better_present}, {"better_absent", b.better_absent},
                         {"worse_present", b.worse_present},   {"worse_absent", b.worse_absent},
                         {"better_total", b.better_total},     {"worse_total", b.worse_total},
                         {"n_relations_improved", b.n_relations_improved}, {"paired", b.paired}};
  }
  if (s.nsp_rate_percent) {
    j["nsp_rate_percent"] = *s.nsp_rate_percent;
    j["nsp_rate_per_corpus"] = s.nsp_rate_per_corpus;
  }
  if (s.nsp_delta) {
    json bins = json::array();
    for (const auto& b : s.nsp_delta->bins) {
      bins.push_back({{"bin_hi", b.upper}, {"mean_delta", b.mean_abs_delta}, {"count", b.count}});
    }
    j["nsp_delta_bins"] = std::move(bins);
    j["spearman_rho"] = s.nsp_delta->spearman_rho;
    j["spearman_defined"] = s.nsp_delta->rho_defined;
  }
  return j;
}

}  // namespace

EvalReport build_report(const RunData& baseline, std::span<const RunData> runs, std::optional<RecallCurve> recall,
                        std::optional<DatasetStats> dataset) {
  EvalReport report;
  report.recall_curve = std::move(recall);
  report.dataset = std::move(dataset);
  report.runs.push_back(summarize(baseline, nullptr, report.warnings));
  for (const auto& run : runs) report.runs.push_back(summarize(run, &baseline, report.warnings));

  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    for (std::size_t j = i + 1; j < report.runs.size(); ++j) {
      const auto& a = report.runs[i].p1.per_relation;
      const auto& b = report.runs[j].p1.per_relation;
      std::map<std::string, double> ka, kb;
      for (const auto& [rel, v] : a) {
        if (auto it = b.find(rel); it != b.end()) {
          ka[rel] = v;
          kb[rel] = it->second;
        }
      }
      if (ka.size() != a.size() || kb.size() != b.size()) {
        report.warnings.push_back("sign test " + report.runs[i].name + " vs " + report.runs[j].name +
                                  " restricted to shared relations");
      }
      auto result = sign_test(ka, kb);
      if (result.degenerate) {
        report.warnings.push_back("sign test " + report.runs[i].name + " vs " + report.runs[j].name +
                                  ": no untied relations, p = 1");
      }
      report.sign_tests.push_back({report.runs[i].name, report.runs[j].name, result});
    }
  }
  return report;
}

json to_json(const EvalReport& report) {
  json j;
  j["runs"] = json::array();
  for (const auto& s : report.runs) j["runs"].push_back(to_json(s));
  j["sign_tests"] = json::array();
  for (const auto& e : report.sign_tests) {
    j["sign_tests"].push_back({{"run_a", e.run_a},
                               {"run_b", e.run_b},
                               {"wins", e.result.wins},
                               {"losses", e.result.losses},
                               {"ties", e.result.ties},
                               {"p_value", e.result.p_value}});
  }
  if (report.recall_curve) {
    json pts = json::array();
    for (const auto& p : report.recall_curve->points) pts.push_back({{"k", p.k}, {"recall", p.recall}});
    j["recall_curve"] = std::move(pts);
  }
  if (report.dataset) {
    json corpora = json::object();
    for (const auto& [c, cs] : report.dataset->per_corpus) corpora[c] = {{"facts", cs.facts}, {"relations", cs.relations}};
    j["dataset"] = {{"total", report.dataset->total}, {"per_relation", report.dataset->per_relation}, {"per_corpus", corpora}};
  }
  j["warnings"] = report.warnings;
  return j;
}

void write_report(const EvalReport& report, const RunData& baseline, std::span<const RunData> runs,
                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  open_out(out_dir / "report.json") << to_json(report).dump(2) << '\n';

  {
    auto out = open_out(out_dir / "p_at_1.tsv");
    out << "corpus\trelation";
    for (const auto& s : report.runs) out << '\t' << tsv_cell(s.name);
    out << '\n';
    std::map<std::string, std::set<std::string>> relations;
    for (const auto& s : report.runs) {
      for (const auto& [rel, corpus] : s.p1.relation_corpus) relations[corpus].insert(rel);
    }
    auto cell = [](const std::map<std::string, double>& m, const std::string& key) {
      auto it = m.find(key);
      return it == m.end() ? std::string("-") : fixed(it->second);
    };
    for (const auto& [corpus, rels] : relations) {
      for (const auto& rel : rels) {
        out << tsv_cell(corpus) << '\t' << tsv_cell(rel);
        for (const auto& s : report.runs) out << '\t' << cell(s.p1.per_relation, rel);
        out << '\n';
      }
      out << tsv_cell(corpus) << "\tTotal";
      for (const auto& s : report.runs) out << '\t' << cell(s.p1.per_corpus, corpus);
      out << '\n';
    }
    out << "weighted average\t";
    for (const auto& s : report.runs) out << '\t' << fixed(s.weighted_average_p1);
    out << '\n';
  }

  {
    auto out = open_out(out_dir / "delta_better_worse.tsv");
    out << "run\tbetter_total\tbetter_present\tbetter_absent\tworse_total\tworse_present\tworse_absent\t"
           "relations_improved\n";
    for (const auto& s : report.runs) {
      if (!s.better_worse) continue;
      const auto& b = *s.better_worse;
      out << tsv_cell(s.name) << '\t' << fixed(b.better_total) << '\t' << fixed(b.better_present) << '\t'
          << fixed(b.better_absent) << '\t' << fixed(b.worse_total) << '\t' << fixed(b.worse_present) << '\t'
          << fixed(b.worse_absent) << '\t' << b.n_relations_improved << '\n';
    }
  }

  {
    auto out = open_out(out_dir / "nsp_rates.tsv");
    std::set<std::string> corpora;
    for (const auto& s : report.runs) {
      for (const auto& [c, _] : s.nsp_rate_per_corpus) corpora.insert(c);
    }
    out << "corpus";
    for (const auto& s : report.runs) {
      if (s.nsp_rate_percent) out << '\t' << tsv_cell(s.name);
    }
    out << '\n';
    for (const auto& c : corpora) {
      out << tsv_cell(c);
      for (const auto& s : report.runs) {
        if (!s.nsp_rate_percent) continue;
        auto it = s.nsp_rate_per_corpus.find(c);
        out << '\t' << (it == s.nsp_rate_per_corpus.end() ? std::string("-") : fixed(it->second));
      }
      out << '\n';
    }
    out << "all";
    for (const auto& s : report.runs) {
      if (s.nsp_rate_percent) out << '\t' << fixed(*s.nsp_rate_percent);
    }
    out << '\n';
  }

  {
    auto out = open_out(out_dir / "sign_tests.tsv");
    out << "run_a\trun_b\twins\tlosses\tties\tp_value\n";
    for (const auto& e : report.sign_tests) {
      char p[32];
      std::snprintf(p, sizeof(p), "%.6g", e.result.p_value);
      out << tsv_cell(e.run_a) << '\t' << tsv_cell(e.run_b) << '\t' << e.result.wins << '\t' << e.result.losses << '\t'
          << e.result.ties << '\t' << p << '\n';
    }
  }

  if (report.recall_curve) {
    auto out = open_out(out_dir / "recall.csv");
    out << "k,recall\n";
    for (const auto& p : report.recall_curve->points) out << p.k << ',' << fixed(p.recall, 4) << '\n';
  }

  for (const auto& s : report.runs) {
    if (!s.nsp_delta) continue;
    auto out = open_out(out_dir / ("nsp_bins." + s.name + ".csv"));
    out << "bin_hi,mean_delta,count\n";
    for (const auto& b : s.nsp_delta->bins) out << fixed(b.upper) << ',' << fixed(b.mean_abs_delta, 6) << ',' << b.count << '\n';
  }

  {
    auto out = open_out(out_dir / "examples.tsv");
    out << "run\tuuid\tquery\tcontext\ttop3\tnsp\n";
    auto dump = [&](const RunData& run) {
      for (const auto& r : run.records) {
        std::string head = r.context.size() > 120 ? r.context.substr(0, 120) + "..." : r.context;
        std::string top;
        for (std::size_t i = 0; i < r.top_k.size() && i < 3; ++i) {
          if (i) top += ", ";
          top += r.top_k[i].token + " [" + fixed(r.top_k[i].logprob) + "]";
        }
        out << tsv_cell(run.name) << '\t' << tsv_cell(r.fact_uuid) << '\t' << tsv_cell(r.query) << '\t'
            << tsv_cell(head) << '\t' << tsv_cell(top) << '\t' << (r.nsp_prob ? fixed(*r.nsp_prob, 2) : "-") << '\n';
      }
    };
    dump(baseline);
    for (const auto& run : runs) dump(run);
  }
}

std::string run_name_for(const std::filesystem::path& path, std::span<const RunRecord> records) {
  if (!records.empty()) {
    const auto& s = records.front().strategy;
    bool same = std::all_of(records.begin(), records.end(), [&](const RunRecord& r) { return r.strategy == s; });
    if (same && !s.empty()) return s;
  }
  return path.stem().string();
}

}  // namespace ctxprobe
