#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxprobe/corpus_index.hpp"
#include "ctxprobe/evaluation.hpp"
#include "ctxprobe/probe_data.hpp"
#include "json.hpp"

namespace ctxprobe {

struct RunData {
  std::string name;
  std::vector<RunRecord> records;
};

struct RunSummary {
  std::string name;
  PrecisionTable p1;
  double weighted_average_p1 = 0.0;
  std::optional<BetterWorse> better_worse;
  std::optional<double> nsp_rate_percent;
  std::map<std::string, double> nsp_rate_per_corpus;
  std::optional<NspDeltaResult> nsp_delta;
};

struct SignTestEntry {
  std::string run_a;
  std::string run_b;
  SignTestResult result;
};

struct EvalReport {
  std::vector<RunSummary> runs;  // baseline first
  std::vector<SignTestEntry> sign_tests;
  std::optional<RecallCurve> recall_curve;
  std::optional<DatasetStats> dataset;
  std::vector<std::string> warnings;
};

// Weighted averages use the number of relations per corpus as weights, which
// is 3 / 41 / 1 on the full Google-RE / T-REx / SQuAD probe.
EvalReport build_report(const RunData& baseline, std::span<const RunData> runs,
                        std::optional<RecallCurve> recall = std::nullopt,
                        std::optional<DatasetStats> dataset = std::nullopt);

nlohmann::json to_json(const EvalReport& report);

// report.json, p_at_1.tsv, delta_better_worse.tsv, nsp_rates.tsv,
// sign_tests.tsv, recall.csv, nsp_bins.<run>.csv, examples.tsv.
void write_report(const EvalReport& report, const RunData& baseline, std::span<const RunData> runs,
                  const std::filesystem::path& out_dir);

// Run name for a predictions file: the records' strategy, or the file stem
// when the file mixes strategies or is empty.
std::string run_name_for(const std::filesystem::path& path, std::span<const RunRecord> records);

}  // namespace ctxprobe
