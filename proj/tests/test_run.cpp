#include <gtest/gtest.h>

#include <cstdlib>

#include "ctxprobe/error.hpp"
#include "ctxprobe/evaluation.hpp"
#include "ctxprobe/run.hpp"
#include "ctxprobe/synthetic.hpp"
#include "support.hpp"

using namespace ctxprobe;
using fixtures::read_file;
using fixtures::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class RunTest : public ::testing::Test {
 protected:
  void SetUp() override { write_synthetic_probe(make_synthetic_probe(), probe_dir()); }

  fs::path probe_dir() const { return dir_ / "probe"; }

  RunConfig config(const std::string& out, std::vector<std::string> overrides = {}) const {
    overrides.push_back("out=" + (dir_ / out).string());
    return RunConfig::load(probe_dir() / "run_config.json", overrides);
  }

  json manifest(const RunConfig& c) const { return json::parse(read_file(c.out / "manifest.json")); }

  TempDir dir_{"run"};
};

double report_p1(const fs::path& out, const std::string& run) {
  auto j = json::parse(read_file(out / "report" / "report.json"));
  for (const auto& r : j["runs"]) {
    if (r["name"] == run) return r["p1"]["overall"].get<double>();
  }
  throw std::runtime_error("no run " + run);
}

}  // namespace

TEST_F(RunTest, NoneAndOracleProduceTwoFiles) {
  auto c = config("two", {"strategies=none,oracle"});
  auto outcome = run(c);
  ASSERT_EQ(outcome.exit_code, 0) << (outcome.messages.empty() ? "" : outcome.messages[0]);
  EXPECT_TRUE(fs::exists(predictions_path(c.out, Strategy::None)));
  EXPECT_TRUE(fs::exists(predictions_path(c.out, Strategy::Oracle)));
  EXPECT_FALSE(fs::exists(predictions_path(c.out, Strategy::Retrieved)));
  EXPECT_EQ(read_records(predictions_path(c.out, Strategy::Oracle)).size(), 50u);
  EXPECT_DOUBLE_EQ(report_p1(c.out, "oracle"), 100.0);
  EXPECT_DOUBLE_EQ(report_p1(c.out, "none"), 8.0);

  auto m = manifest(c);
  EXPECT_EQ(m["status"], "complete");
  EXPECT_EQ(m["seed"], 13);
  EXPECT_EQ(m["config_hash"], c.hash());
  EXPECT_EQ(m["strategies"]["oracle"]["checksum"], file_checksum(predictions_path(c.out, Strategy::Oracle)));
  EXPECT_TRUE(m["artifacts"].contains("report/report.json"));
  // Oracle records carry the paired no-context log-probability.
  auto recs = read_records(predictions_path(c.out, Strategy::Oracle));
  EXPECT_TRUE(recs.front().answer_logprob_nocontext.has_value());
}

TEST_F(RunTest, ValidationFailureWritesNothing) {
  auto c = config("bad", {"index=missing.idx"});
  auto outcome = run(c);
  EXPECT_EQ(outcome.exit_code, 2);
  ASSERT_FALSE(outcome.messages.empty());
  EXPECT_NE(outcome.messages[0].find("missing.idx"), std::string::npos);
  EXPECT_FALSE(fs::exists(c.out));

  auto lam = config("bad2", {"scorer.lambda=1.5"});
  EXPECT_EQ(run(lam).exit_code, 2);
  EXPECT_FALSE(fs::exists(lam.out));
  EXPECT_THROW(config("bad3", {"strategies=none,psychic"}), ValidationError);
  EXPECT_THROW(config("bad4", {"concurrency=\"many\""}), ValidationError);
  EXPECT_THROW(config("bad5", {"noequals"}), ValidationError);
}

TEST_F(RunTest, RerunIsIdentical) {
  auto c = config("again");
  ASSERT_EQ(run(c).exit_code, 0);
  auto first_manifest = read_file(c.out / "manifest.json");
  auto first_preds = read_file(predictions_path(c.out, Strategy::Retrieved));
  ASSERT_EQ(run(c).exit_code, 0);
  EXPECT_EQ(read_file(c.out / "manifest.json"), first_manifest);
  EXPECT_EQ(read_file(predictions_path(c.out, Strategy::Retrieved)), first_preds);
}

TEST_F(RunTest, ConcurrencyDoesNotChangeOutputs) {
  auto one = config("c1", {"concurrency=1"});
  auto eight = config("c8", {"concurrency=8"});
  ASSERT_EQ(run(one).exit_code, 0);
  ASSERT_EQ(run(eight).exit_code, 0);
  for (auto s : {Strategy::None, Strategy::Oracle, Strategy::Retrieved, Strategy::Adversarial, Strategy::Generated}) {
    EXPECT_EQ(read_file(predictions_path(one.out, s)), read_file(predictions_path(eight.out, s))) << to_string(s);
  }
  EXPECT_EQ(read_file(one.out / "manifest.json"), read_file(eight.out / "manifest.json"));
  EXPECT_EQ(read_file(one.out / "report" / "report.json"), read_file(eight.out / "report" / "report.json"));
}

TEST_F(RunTest, ResumeAfterInterruption) {
  auto clean = config("clean");
  ASSERT_EQ(run(clean).exit_code, 0);

  auto c = config("resumed", {"concurrency=3"});
  RunHooks hooks;
  hooks.stop_after = 70;
  auto stopped = run(c, hooks);
  EXPECT_EQ(stopped.exit_code, 1);
  EXPECT_TRUE(stopped.interrupted);
  auto partial = manifest(c);
  EXPECT_EQ(partial["status"], "partial");

  auto resumed = config("resumed", {"concurrency=1"});
  ASSERT_EQ(resumed.hash(), c.hash());
  ASSERT_EQ(run(resumed).exit_code, 0);
  EXPECT_EQ(read_file(resumed.out / "manifest.json"), read_file(clean.out / "manifest.json"));
  for (auto s : {Strategy::None, Strategy::Oracle, Strategy::Retrieved, Strategy::Adversarial, Strategy::Generated}) {
    EXPECT_EQ(read_file(predictions_path(resumed.out, s)), read_file(predictions_path(clean.out, s))) << to_string(s);
  }
}

TEST_F(RunTest, PerFactFailureIsRecorded) {
  std::string subject;
  for (int i = 0; i < 600; ++i) subject += "Word" + std::to_string(i) + " ";
  json fact{{"uuid", "syn-long"},  {"relation", "P19"},     {"sub_label", subject},
            {"obj_label", "Paris"}, {"corpus", "GoogleRE"}, {"evidences", json::array({{{"text", "Paris."}}})}};
  std::ofstream(probe_dir() / "facts.jsonl", std::ios::app) << fact.dump() << '\n';

  auto c = config("fail", {"strategies=none,oracle"});
  auto outcome = run(c);
  ASSERT_EQ(outcome.exit_code, 0);
  auto m = manifest(c);
  ASSERT_EQ(m["strategies"]["none"]["failures"].size(), 1u);
  EXPECT_EQ(m["strategies"]["none"]["failures"][0]["uuid"], "syn-long");
  EXPECT_EQ(read_records(predictions_path(c.out, Strategy::None)).size(), 50u);
}

TEST(RunConfig, OverridesSeedAndHash) {
  json j{{"facts", "f.jsonl"}, {"strategies", {"none"}}};
  apply_override(j, "scorer.lambda=0.5");
  apply_override(j, "strategies=none, oracle");
  apply_override(j, "corpus_tag=TREx");
  EXPECT_EQ(j["scorer"]["lambda"], 0.5);
  EXPECT_EQ(j["strategies"], json({"none", "oracle"}));
  EXPECT_EQ(j["corpus_tag"], "TREx");

  ::setenv(kSeedEnv, "77", 1);
  auto from_env = RunConfig::from_json(j, "/base");
  ::unsetenv(kSeedEnv);
  EXPECT_EQ(from_env.seed, 77u);
  EXPECT_EQ(RunConfig::from_json(j, "/base").seed, 0u);
  EXPECT_EQ(from_env.facts, fs::path("/base/f.jsonl"));
  EXPECT_DOUBLE_EQ(from_env.scorer.lambda, 0.5);

  auto a = RunConfig::from_json(j, "/base");
  auto b = a;
  b.concurrency = 16;
  b.out = "/elsewhere";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 5;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);

  json bad = j;
  bad["mode"] = "sideways";
  EXPECT_THROW(RunConfig::from_json(bad), ValidationError);
}
