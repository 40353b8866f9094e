#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxprobe/scorer.hpp"
#include "json.hpp"

namespace ctxprobe {

// One scored (fact, context) pair as written to a predictions file.
struct RunRecord {
  std::string fact_uuid;
  std::string relation;
  std::string corpus;
  std::string strategy;
  std::string answer;
  std::string argmax_token;
  double answer_logprob = 0.0;
  std::optional<double> answer_logprob_nocontext;
  std::optional<double> nsp_prob;
  bool answer_present = false;
  // For per-example dumps.
  std::string query;
  std::string context;
  std::vector<TokenScore> top_k;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

void write_records(const std::filesystem::path& path, std::span<const RunRecord> records);
std::vector<RunRecord> read_records(const std::filesystem::path& path);

struct PrecisionTable {
  std::map<std::string, double> per_relation;
  // Mean of the corpus's per-relation values.
  std::map<std::string, double> per_corpus;
  std::map<std::string, std::size_t> relations_per_corpus;
  std::map<std::string, std::string> relation_corpus;
  // Micro average over all records.
  double overall = 0.0;
  std::size_t records = 0;
};

// P@1 = 100 * exact argmax==answer matches / records, per relation.
PrecisionTable precision_at_1(std::span<const RunRecord> records);

const std::map<std::string, double>& default_corpus_weights();

// sum_i w_i p_i / sum_i w_i over the weighted corpora. Throws InvalidArgument
// listing every weighted corpus missing from per_corpus.
double weighted_average(const std::map<std::string, double>& per_corpus,
                        const std::map<std::string, double>& weights = default_corpus_weights());

struct SignTestResult {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double p_value = 1.0;
  // n == 0 after dropping ties.
  bool degenerate = false;
};

// P(X <= m) for X ~ Binomial(n, 1/2).
double binomial_half_cdf(std::uint64_t n, std::uint64_t m);

// Exact two-sided sign test over relations: p = 2 * min(P(X <= min(w, l)), 0.5).
SignTestResult sign_test(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

struct BetterWorse {
  double better_present = 0.0;
  double better_absent = 0.0;
  double worse_present = 0.0;
  double worse_absent = 0.0;
  double better_total = 0.0;
  double worse_total = 0.0;
  std::size_t n_relations_improved = 0;
  std::size_t paired = 0;
};

// Fact-level comparison of a context run against its no-context baseline.
// Percentages are over all paired records. Throws InvalidArgument naming the
// first record whose uuid is missing from the baseline.
BetterWorse delta_analysis(std::span<const RunRecord> with_context, std::span<const RunRecord> baseline);

// 100 * #(nsp_prob > 0.5) / #records. Throws if a record lacks nsp_prob.
double nsp_rate(std::span<const RunRecord> records);

struct NspBin {
  double upper = 0.0;
  double mean_abs_delta = 0.0;
  std::size_t count = 0;
};

struct NspDeltaResult {
  std::vector<NspBin> bins;
  double spearman_rho = 0.0;
  bool rho_defined = false;
};

// Spearman correlation with average ranks for ties. Undefined (returns 0,
// defined=false) when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y, bool* defined = nullptr);

// |exp(answer_logprob_nocontext) - exp(answer_logprob)| against nsp_prob,
// in ten equal-width bins on [0, 1].
NspDeltaResult nsp_delta_correlation(std::span<const RunRecord> records);

}  // namespace ctxprobe
