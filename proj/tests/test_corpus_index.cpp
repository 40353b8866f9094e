#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "ctxprobe/context_builder.hpp"
#include "ctxprobe/corpus_index.hpp"
#include "ctxprobe/error.hpp"
#include "support.hpp"

using namespace ctxprobe;
using fixtures::DenseTfidfOracle;
using fixtures::TempDir;

namespace {

std::vector<Paragraph> three_docs() {
  return {{"d1", "a", "the cat sat"}, {"d2", "b", "the dog sat"}, {"d3", "c", "cats and dogs"}};
}

Fact fact_with(std::string uuid, std::string answer, std::string evidence) {
  Fact f;
  f.uuid = std::move(uuid);
  f.relation = "r";
  f.subject = "S";
  f.answer = std::move(answer);
  f.cloze_template = "[X] is [Y]";
  f.evidence = std::move(evidence);
  return f;
}

}  // namespace

TEST(Features, StopwordOnlyGramsDropped) {
  auto f = index_features("The cat, and the Dog!", 2, *default_stopwords());
  std::vector<std::string> expected{"cat", "dog", "the cat", "cat and", "the dog"};
  EXPECT_EQ(f, expected);
  EXPECT_EQ(f, fixtures::oracle_features("The cat, and the Dog!", 2, *default_stopwords()));
}

TEST(Features, BinsWithinHashSpace) {
  for (unsigned bits : {1u, 4u, 12u, 24u, 32u}) {
    for (const char* s : {"cat", "the cat", "x", "longer feature string"}) {
      auto b = feature_bin(s, bits);
      if (bits < 32) EXPECT_LT(b, 1u << bits);
      EXPECT_EQ(b, fixtures::oracle_bin(s, bits));
    }
  }
}

TEST(BuildIndex, ThreeDocIdf) {
  auto idx = TfidfIndex::build(three_docs());
  EXPECT_EQ(idx.num_paragraphs(), 3u);
  EXPECT_NEAR(idx.idf_of("cat"), std::log(2.5 / 1.5), 1e-15);
  EXPECT_NEAR(idx.idf_of("cat"), 0.5108256, 1e-6);
  // "sat" occurs in two of three docs: log(1.5/2.5) < 0, clamped.
  EXPECT_EQ(idx.idf_of("sat"), 0.0);
}

TEST(BuildIndex, UbiquitousTermClamped) {
  auto idx = TfidfIndex::build(std::vector<Paragraph>{{"a", "", "x y"}, {"b", "", "x z"}, {"c", "", "x w"}});
  EXPECT_EQ(idx.idf_of("x"), 0.0);
  EXPECT_EQ(idf_weight(3, 3), 0.0);
  EXPECT_GT(idf_weight(3, 0), 0.0);
}

TEST(BuildIndex, WeightsNormsBins) {
  std::mt19937_64 rng(11);
  auto corpus = fixtures::random_corpus(rng, 60);
  IndexConfig cfg;
  cfg.hash_bits = 10;
  auto idx = TfidfIndex::build(corpus, cfg);
  for (std::size_t r = 0; r < idx.num_paragraphs(); ++r) {
    double sq = 0.0;
    for (const auto& [bin, w] : idx.row(r)) {
      EXPECT_LT(bin, 1u << 10);
      EXPECT_TRUE(std::isfinite(w));
      EXPECT_GT(w, 0.0);
      sq += w * w;
    }
    EXPECT_NEAR(std::sqrt(sq), idx.doc_norm(r), 1e-12);
  }
}

TEST(BuildIndex, DuplicateIdNamesTheId) {
  std::vector<Paragraph> ps{{"dup-7", "", "alpha"}, {"dup-7", "", "beta"}};
  try {
    TfidfIndex::build(ps);
    FAIL() << "expected BuildError";
  } catch (const BuildError& e) {
    EXPECT_NE(std::string(e.what()).find("dup-7"), std::string::npos);
  }
}

TEST(BuildIndex, EmptyParagraphsSkipped) {
  auto idx = TfidfIndex::build(std::vector<Paragraph>{{"a", "", "  "}, {"b", "", "river"}});
  EXPECT_EQ(idx.num_paragraphs(), 1u);
  EXPECT_THROW(TfidfIndex::build(std::vector<Paragraph>{{"a", "", ""}}), BuildError);
}

TEST(Query, CatSatTopOne) {
  auto docs = three_docs();
  auto idx = TfidfIndex::build(docs);
  auto hits = idx.query("cat sat", 3);
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits.front().para_id, "d1");
  EXPECT_EQ(hits, DenseTfidfOracle(docs).query("cat sat", 3));
}

TEST(Query, KLargerThanCorpus) {
  auto idx = TfidfIndex::build(three_docs());
  auto hits = idx.query("dog", 50);
  ASSERT_EQ(hits.size(), 3u);
  for (std::size_t i = 1; i < hits.size(); ++i) {
    EXPECT_TRUE(hits[i - 1].score > hits[i].score ||
                (hits[i - 1].score == hits[i].score && hits[i - 1].para_id < hits[i].para_id));
  }
  EXPECT_THROW(idx.query("dog", 0), InvalidArgument);
}

TEST(Query, StopwordOnlyQueryIsEmpty) {
  auto idx = TfidfIndex::build(three_docs());
  EXPECT_TRUE(idx.query("the and", 5).empty());
  EXPECT_TRUE(idx.query("", 5).empty());
}

TEST(Query, MatchesDenseOracleOnRandomCorpora) {
  std::mt19937_64 rng(2024);
  for (int c = 0; c < 8; ++c) {
    auto corpus = fixtures::random_corpus(rng, 120);
    auto idx = TfidfIndex::build(corpus);
    DenseTfidfOracle oracle(corpus);
    for (int q = 0; q < 15; ++q) {
      auto text = fixtures::random_query(rng, corpus);
      EXPECT_EQ(idx.query(text, 10), oracle.query(text, 10)) << "query: " << text;
    }
  }
}

TEST(Query, SmallHashSpaceStillMatchesOracle) {
  std::mt19937_64 rng(99);
  auto corpus = fixtures::random_corpus(rng, 80);
  IndexConfig cfg;
  cfg.hash_bits = 6;
  cfg.ngram_order = 3;
  auto idx = TfidfIndex::build(corpus, cfg);
  DenseTfidfOracle oracle(corpus, 6, 3);
  for (int q = 0; q < 20; ++q) {
    auto text = fixtures::random_query(rng, corpus);
    EXPECT_EQ(idx.query(text, 10), oracle.query(text, 10));
  }
}

TEST(SaveLoad, RoundTrip) {
  TempDir dir("idx");
  auto idx = TfidfIndex::build(three_docs());
  idx.save(dir / "i.bin");
  auto back = TfidfIndex::load(dir / "i.bin");
  EXPECT_EQ(back.num_paragraphs(), 3u);
  EXPECT_EQ(back.para_ids(), idx.para_ids());
  EXPECT_EQ(back.query("cat sat", 3), idx.query("cat sat", 3));
  back.save(dir / "again.bin");
  EXPECT_EQ(fixtures::read_file(dir / "i.bin"), fixtures::read_file(dir / "again.bin"));
}

TEST(SaveLoad, HeaderLayout) {
  TempDir dir("idx");
  TfidfIndex::build(three_docs()).save(dir / "i.bin");
  auto bytes = fixtures::read_file(dir / "i.bin");
  ASSERT_GE(bytes.size(), 28u);
  EXPECT_EQ(bytes.substr(0, 8), std::string("CTXIDX1\0", 8));
  auto u32 = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  std::uint64_t n;
  std::memcpy(&n, bytes.data() + 20, 8);
  EXPECT_EQ(u32(8), 1u);
  EXPECT_EQ(u32(12), 24u);
  EXPECT_EQ(u32(16), 2u);
  EXPECT_EQ(n, 3u);
}

TEST(SaveLoad, CorruptFiles) {
  TempDir dir("idx");
  TfidfIndex::build(three_docs()).save(dir / "i.bin");
  auto bytes = fixtures::read_file(dir / "i.bin");

  fixtures::write_file(dir / "empty.bin", "");
  EXPECT_THROW(TfidfIndex::load(dir / "empty.bin"), FormatError);

  for (std::size_t cut : {std::size_t{4}, std::size_t{27}, bytes.size() / 2, bytes.size() - 1}) {
    fixtures::write_file(dir / "cut.bin", bytes.substr(0, cut));
    EXPECT_THROW(TfidfIndex::load(dir / "cut.bin"), FormatError) << "cut at " << cut;
  }
  fixtures::write_file(dir / "tail.bin", bytes + "x");
  EXPECT_THROW(TfidfIndex::load(dir / "tail.bin"), FormatError);

  auto bad = bytes;
  bad[0] = 'X';
  fixtures::write_file(dir / "magic.bin", bad);
  EXPECT_THROW(TfidfIndex::load(dir / "magic.bin"), FormatError);

  bad = bytes;
  bad[8] = 9;
  fixtures::write_file(dir / "version.bin", bad);
  EXPECT_THROW(TfidfIndex::load(dir / "version.bin"), FormatError);

  EXPECT_THROW(TfidfIndex::load(dir / "nope.bin"), Error);
}

TEST(Recall, SelfRetrievalAndExhaustiveBound) {
  // Evidences are the corpus; a third of them lack the answer.
  std::vector<Paragraph> corpus;
  FactSet facts;
  std::mt19937_64 rng(5);
  auto base = fixtures::random_corpus(rng, 60);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::string answer = "ans" + std::to_string(i);
    std::string text = "unique" + std::to_string(i) + " " + base[i].text + (i % 3 ? " " + answer + "." : "");
    corpus.push_back({base[i].para_id, "", text});
    facts.facts.push_back(fact_with("f" + std::to_string(i), answer, text));
  }
  auto idx = TfidfIndex::build(corpus);
  ParagraphStore store(corpus);
  const std::size_t n = corpus.size();
  auto curve = recall_at_k(idx, store, facts, [](const Fact& f) { return *f.evidence; }, n);

  // Exhaustive membership: which facts have their answer anywhere / in their own evidence.
  std::size_t own = 0, anywhere = 0;
  for (const auto& f : facts.facts) {
    own += answer_in_context(*f.evidence, f.answer) ? 1 : 0;
    bool any = false;
    for (const auto& p : corpus) any = any || answer_in_context(p.text, f.answer);
    anywhere += any ? 1 : 0;
  }
  ASSERT_EQ(curve.points.size(), n);
  EXPECT_DOUBLE_EQ(curve.points[0].recall, 100.0 * own / n);
  EXPECT_DOUBLE_EQ(curve.points.back().recall, 100.0 * anywhere / n);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    EXPECT_EQ(curve.points[i].k, i + 1);
    if (i) EXPECT_GE(curve.points[i].recall, curve.points[i - 1].recall);
    EXPECT_GE(curve.points[i].recall, 0.0);
    EXPECT_LE(curve.points[i].recall, 100.0);
  }
}

TEST(Recall, IndependentOfThreadCount) {
  std::mt19937_64 rng(17);
  auto corpus = fixtures::random_corpus(rng, 150);
  FactSet facts;
  static const std::vector<std::string> answers{"Paris", "Rome", "river", "king", "winter", "absent"};
  for (int i = 0; i < 40; ++i) {
    facts.facts.push_back(fact_with("f" + std::to_string(i), answers[i % answers.size()], ""));
  }
  auto idx = TfidfIndex::build(corpus);
  ParagraphStore store(corpus);
  auto q = [&](const Fact& f) { return f.answer + " city " + std::to_string(f.uuid.size()); };
  auto one = recall_at_k(idx, store, facts, q, 10, 1);
  auto many = recall_at_k(idx, store, facts, q, 10, 6);
  ASSERT_EQ(one.points.size(), many.points.size());
  for (std::size_t i = 0; i < one.points.size(); ++i) EXPECT_EQ(one.points[i].recall, many.points[i].recall);
}

TEST(ParagraphStoreLoad, FormatErrors) {
  TempDir dir("store");
  fixtures::write_file(dir / "ok.jsonl", R"({"para_id":"a","doc_id":"d","text":"x"})"
                                         "\n\n");
  EXPECT_EQ(ParagraphStore::load(dir / "ok.jsonl").size(), 1u);
  fixtures::write_file(dir / "bad.jsonl", R"({"para_id":"a"})"
                                          "\n");
  EXPECT_THROW(ParagraphStore::load(dir / "bad.jsonl"), FormatError);
  fixtures::write_file(dir / "dup.jsonl", R"({"para_id":"a","text":"x"})"
                                          "\n"
                                          R"({"para_id":"a","text":"y"})"
                                          "\n");
  EXPECT_THROW(ParagraphStore::load(dir / "dup.jsonl"), FormatError);
}
