#include "ctxprobe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "ctxprobe/error.hpp"
#include "ctxprobe/text.hpp"

namespace ctxprobe {

using nlohmann::json;

namespace {

std::vector<const RunRecord*> sorted_by_uuid(std::span<const RunRecord> records) {
  std::vector<const RunRecord*> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(),
                   [](const RunRecord* a, const RunRecord* b) { return a->fact_uuid < b->fact_uuid; });
  return out;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

json to_json(const RunRecord& r) {
  json top = json::array();
  for (const auto& t : r.top_k) top.push_back({{"token", t.token}, {"logprob", t.logprob}});
  return {{"uuid", r.fact_uuid},
          {"relation", r.relation},
          {"corpus", r.corpus},
          {"strategy", r.strategy},
          {"answer", r.answer},
          {"argmax_token", r.argmax_token},
          {"answer_logprob", r.answer_logprob},
          {"answer_logprob_nocontext", r.answer_logprob_nocontext ? json(*r.answer_logprob_nocontext) : json(nullptr)},
          {"nsp_prob", r.nsp_prob ? json(*r.nsp_prob) : json(nullptr)},
          {"answer_present", r.answer_present},
          {"query", r.query},
          {"context", r.context},
          {"top_k", std::move(top)}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.fact_uuid = j.at("uuid").get<std::string>();
  r.relation = j.at("relation").get<std::string>();
  r.corpus = j.value("corpus", std::string("Other"));
  r.strategy = j.at("strategy").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.argmax_token = j.at("argmax_token").get<std::string>();
  r.answer_logprob = j.at("answer_logprob").get<double>();
  if (auto it = j.find("answer_logprob_nocontext"); it != j.end() && !it->is_null()) {
    r.answer_logprob_nocontext = it->get<double>();
  }
  if (auto it = j.find("nsp_prob"); it != j.end() && !it->is_null()) r.nsp_prob = it->get<double>();
  r.answer_present = j.value("answer_present", false);
  r.query = j.value("query", std::string());
  r.context = j.value("context", std::string());
  if (auto it = j.find("top_k"); it != j.end() && it->is_array()) {
    for (const auto& t : *it) r.top_k.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
  }
  return r;
}

void write_records(const std::filesystem::path& path, std::span<const RunRecord> records) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write predictions file " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions file " + path.string());
  std::vector<RunRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

PrecisionTable precision_at_1(std::span<const RunRecord> records) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> hits;  // relation -> (correct, total)
  PrecisionTable t;
  std::size_t correct = 0;
  for (const auto& r : records) {
    auto& h = hits[r.relation];
    bool ok = r.argmax_token == r.answer;
    h.first += ok;
    ++h.second;
    correct += ok;
    t.relation_corpus.emplace(r.relation, r.corpus);
  }
  std::map<std::string, std::vector<double>> by_corpus;
  for (const auto& [rel, h] : hits) {
    double p = 100.0 * static_cast<double>(h.first) / static_cast<double>(h.second);
    t.per_relation[rel] = p;
    by_corpus[t.relation_corpus[rel]].push_back(p);
  }
  for (const auto& [corpus, values] : by_corpus) {
    double sum = 0.0;
    for (double v : values) sum += v;
    t.per_corpus[corpus] = sum / static_cast<double>(values.size());
    t.relations_per_corpus[corpus] = values.size();
  }
  t.records = records.size();
  if (!records.empty()) t.overall = 100.0 * static_cast<double>(correct) / static_cast<double>(records.size());
  return t;
}

const std::map<std::string, double>& default_corpus_weights() {
  static const std::map<std::string, double> w{{"GoogleRE", 3.0}, {"TREx", 41.0}, {"SQuAD", 1.0}};
  return w;
}

double weighted_average(const std::map<std::string, double>& per_corpus, const std::map<std::string, double>& weights) {
  std::string missing;
  double num = 0.0, den = 0.0;
  for (const auto& [corpus, w] : weights) {
    auto it = per_corpus.find(corpus);
    if (it == per_corpus.end()) {
      missing += (missing.empty() ? "" : ", ") + corpus;
      continue;
    }
    num += w * it->second;
    den += w;
  }
  if (!missing.empty()) throw InvalidArgument("weighted average is missing corpora: " + missing);
  if (den <= 0.0) throw InvalidArgument("weights must sum to a positive value");
  return num / den;
}

double binomial_half_cdf(std::uint64_t n, std::uint64_t m) {
  if (m >= n) return 1.0;
  if (n <= 62) {
    // Exact: sum_{i<=m} C(n, i) / 2^n.
    __extension__ typedef unsigned __int128 u128;
    u128 c = 1, sum = 1;
    for (std::uint64_t i = 0; i < m; ++i) {
      c = c * (n - i) / (i + 1);
      sum += c;
    }
    return static_cast<double>(sum) / std::ldexp(1.0, static_cast<int>(n));
  }
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double sum = 0.0;
  for (std::uint64_t i = 0; i <= m; ++i) {
    double lp = lg_n1 - std::lgamma(static_cast<double>(i) + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) +
                log_half_n;
    sum += std::exp(lp);
  }
  return std::min(1.0, sum);
}

SignTestResult sign_test(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
        return x.first == y.first;
      })) {
    throw InvalidArgument("sign test needs the same relation keys on both sides");
  }
  SignTestResult r;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->second > ib->second) {
      ++r.wins;
    } else if (ia->second < ib->second) {
      ++r.losses;
    } else {
      ++r.ties;
    }
  }
  const auto n = r.wins + r.losses;
  if (n == 0) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }
  r.p_value = 2.0 * std::min(binomial_half_cdf(n, std::min(r.wins, r.losses)), 0.5);
  return r;
}

BetterWorse delta_analysis(std::span<const RunRecord> with_context, std::span<const RunRecord> baseline) {
  std::unordered_map<std::string, const RunRecord*> base;
  for (const auto& r : baseline) base.emplace(r.fact_uuid, &r);

  BetterWorse bw;
  std::size_t bp = 0, ba = 0, wp = 0, wa = 0;
  std::vector<RunRecord> ctx_paired, base_paired;
  for (const auto* r : sorted_by_uuid(with_context)) {
    auto it = base.find(r->fact_uuid);
    if (it == base.end()) throw InvalidArgument("record " + r->fact_uuid + " has no baseline counterpart");
    bool before = it->second->argmax_token == it->second->answer;
    bool after = r->argmax_token == r->answer;
    if (!before && after) (r->answer_present ? bp : ba)++;
    if (before && !after) (r->answer_present ? wp : wa)++;
    ctx_paired.push_back(*r);
    base_paired.push_back(*it->second);
  }
  bw.paired = ctx_paired.size();
  if (bw.paired == 0) return bw;
  auto pct = [&](std::size_t c) { return 100.0 * static_cast<double>(c) / static_cast<double>(bw.paired); };
  bw.better_present = pct(bp);
  bw.better_absent = pct(ba);
  bw.worse_present = pct(wp);
  bw.worse_absent = pct(wa);
  bw.better_total = pct(bp + ba);
  bw.worse_total = pct(wp + wa);

  auto p_ctx = precision_at_1(ctx_paired);
  auto p_base = precision_at_1(base_paired);
  for (const auto& [rel, p] : p_ctx.per_relation) {
    if (p > p_base.per_relation[rel]) ++bw.n_relations_improved;
  }
  return bw;
}

double nsp_rate(std::span<const RunRecord> records) {
  if (records.empty()) throw InvalidArgument("nsp_rate needs at least one record");
  std::size_t next = 0;
  for (const auto& r : records) {
    if (!r.nsp_prob) throw InvalidArgument("record " + r.fact_uuid + " has no NSP probability");
    next += *r.nsp_prob > kNspThreshold;
  }
  return 100.0 * static_cast<double>(next) / static_cast<double>(records.size());
}

double spearman(std::span<const double> x, std::span<const double> y, bool* defined) {
  if (x.size() != y.size()) throw InvalidArgument("spearman inputs differ in length");
  if (defined) *defined = false;
  if (x.size() < 2) return 0.0;
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  if (defined) *defined = true;
  return sxy / std::sqrt(sxx * syy);
}

NspDeltaResult nsp_delta_correlation(std::span<const RunRecord> records) {
  if (records.size() < 2) throw InvalidArgument("NSP/delta correlation needs at least 2 records");
  std::vector<double> nsp, delta;
  std::vector<double> bin_sum(10, 0.0);
  std::vector<std::size_t> bin_count(10, 0);
  for (const auto* r : sorted_by_uuid(records)) {
    if (!r->nsp_prob) throw InvalidArgument("record " + r->fact_uuid + " has no NSP probability");
    if (!r->answer_logprob_nocontext) throw InvalidArgument("record " + r->fact_uuid + " has no paired baseline");
    double d = std::abs(std::exp(*r->answer_logprob_nocontext) - std::exp(r->answer_logprob));
    double p = *r->nsp_prob;
    auto bin = static_cast<std::size_t>(std::clamp(std::floor(p * 10.0), 0.0, 9.0));
    bin_sum[bin] += d;
    ++bin_count[bin];
    nsp.push_back(p);
    delta.push_back(d);
  }
  NspDeltaResult out;
  for (std::size_t b = 0; b < 10; ++b) {
    double mean = bin_count[b] ? bin_sum[b] / static_cast<double>(bin_count[b]) : 0.0;
    out.bins.push_back({static_cast<double>(b + 1) / 10.0, mean, bin_count[b]});
  }
  out.spearman_rho = spearman(nsp, delta, &out.rho_defined);
  return out;
}

}  // namespace ctxprobe
