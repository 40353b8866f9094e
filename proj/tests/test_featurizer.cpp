#include <gtest/gtest.h>

#include <random>

#include "ctxprobe/error.hpp"
#include "ctxprobe/featurizer.hpp"

using namespace ctxprobe;

namespace {

using Tokens = std::vector<std::string>;

Tokens filler(std::size_t n, const std::string& stem) {
  Tokens t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(stem + std::to_string(i));
  return t;
}

Tokens query_of(std::size_t n) {
  auto q = filler(n - 1, "q");
  q.insert(q.begin() + static_cast<std::ptrdiff_t>(n / 2), "[MASK]");
  return q;
}

// Checks every layout rule from scratch against the token list.
void check_layout(const FeaturizedInput& in, std::size_t max_len) {
  ASSERT_LE(in.tokens.size(), max_len);
  ASSERT_EQ(in.tokens.size(), in.segment_ids.size());
  std::size_t masks = 0;
  for (const auto& t : in.tokens) masks += t == "[MASK]";
  EXPECT_EQ(masks, 1u);
  EXPECT_EQ(in.tokens[in.mask_index], "[MASK]");
  EXPECT_EQ(in.tokens.front(), "[CLS]");
  EXPECT_EQ(in.tokens.back(), "[SEP]");
  std::size_t first_sep = 0;
  while (in.tokens[first_sep] != "[SEP]") ++first_sep;
  bool has_context = in.context_end > in.context_begin;
  for (std::size_t i = 0; i < in.tokens.size(); ++i) {
    std::uint8_t want = 0;
    if (in.mode == SegmentMode::TwoSegment && i > first_sep) want = 1;
    EXPECT_EQ(in.segment_ids[i], want) << i;
  }
  if (in.mode == SegmentMode::OneSegment) {
    EXPECT_EQ(first_sep, in.tokens.size() - 1);
  } else if (has_context) {
    EXPECT_EQ(first_sep, in.query_end);
    EXPECT_EQ(in.context_begin, first_sep + 1);
  }
}

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("Paris, France."), (Tokens{"Paris", ",", "France", "."}));
  EXPECT_EQ(tokenize("X is [MASK] ."), (Tokens{"X", "is", "[MASK]", "."}));
  EXPECT_EQ(tokenize("X is [MASK]."), (Tokens{"X", "is", "[MASK]", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("\"Hi!\""), (Tokens{"\"", "Hi", "!", "\""}));
}

TEST(Tokenize, ConcatenationStable) {
  std::mt19937 rng(5);
  const Tokens words{"Paris,", "is", "[MASK]", "the", "(capital).", "of", "France!"};
  for (int i = 0; i < 100; ++i) {
    std::string a, b;
    for (int j = 0; j < 5; ++j) a += words[rng() % words.size()] + " ";
    for (int j = 0; j < 5; ++j) b += words[rng() % words.size()] + " ";
    auto ta = tokenize(a), tb = tokenize(b);
    ta.insert(ta.end(), tb.begin(), tb.end());
    EXPECT_EQ(tokenize(a + " " + b), ta);
  }
}

TEST(Assemble, CapitalOfFranceExample) {
  Tokens q{"The", "capital", "of", "France", "is", "[MASK]", "."};
  Tokens c{"Paris", "is", "the", "capital", "."};
  auto in = assemble(q, c, SegmentMode::TwoSegment, {"u1", Strategy::Oracle});
  Tokens want{"[CLS]", "The", "capital", "of",  "France",  "is", "[MASK]", ".",
              "[SEP]", "Paris", "is",   "the", "capital", ".",  "[SEP]"};
  EXPECT_EQ(in.tokens, want);
  for (std::size_t i = 0; i < in.segment_ids.size(); ++i) EXPECT_EQ(in.segment_ids[i], i <= 8 ? 0 : 1) << i;
  EXPECT_EQ(in.mask_index, 6u);
  EXPECT_EQ(in.fact_uuid, "u1");
  EXPECT_EQ(in.strategy, Strategy::Oracle);
  check_layout(in, kMaxSequenceLength);
}

TEST(Assemble, Modes) {
  Tokens q{"A", "is", "[MASK]"};
  Tokens c{"A", "is", "b"};
  auto one = assemble(q, c, SegmentMode::OneSegment);
  EXPECT_EQ(one.tokens, (Tokens{"[CLS]", "A", "is", "[MASK]", "A", "is", "b", "[SEP]"}));
  check_layout(one, kMaxSequenceLength);
  auto sep = assemble(q, c, SegmentMode::SeparatorOnly);
  EXPECT_EQ(sep.tokens, (Tokens{"[CLS]", "A", "is", "[MASK]", "[SEP]", "A", "is", "b", "[SEP]"}));
  for (auto s : sep.segment_ids) EXPECT_EQ(s, 0);
  check_layout(sep, kMaxSequenceLength);
}

TEST(Assemble, TruncatesContextTail) {
  auto q = query_of(300);
  auto c = filler(300, "c");
  auto in = assemble(q, c, SegmentMode::TwoSegment);
  EXPECT_EQ(in.tokens.size(), 512u);
  EXPECT_EQ(in.context_end - in.context_begin, 209u);
  EXPECT_EQ(in.context_tokens().back(), "c208");
  EXPECT_EQ(in.query_end - in.query_begin, 300u);
  check_layout(in, kMaxSequenceLength);

  auto one = assemble(q, c, SegmentMode::OneSegment);
  EXPECT_EQ(one.context_end - one.context_begin, 210u);
}

TEST(Assemble, EmptyContextReducesToQueryOnly) {
  Tokens q{"A", "is", "[MASK]"};
  Tokens want{"[CLS]", "A", "is", "[MASK]", "[SEP]"};
  for (auto m : {SegmentMode::TwoSegment, SegmentMode::OneSegment, SegmentMode::SeparatorOnly}) {
    auto in = assemble(q, {}, m);
    EXPECT_EQ(in.tokens, want);
    for (auto s : in.segment_ids) EXPECT_EQ(s, 0);
  }
  // A query that fills the budget exactly squeezes the context out entirely.
  auto full = assemble(query_of(510), filler(4, "c"), SegmentMode::TwoSegment);
  EXPECT_EQ(full.tokens.size(), 512u);
  EXPECT_EQ(full.context_end, full.context_begin);
  check_layout(full, kMaxSequenceLength);
}

TEST(Assemble, Errors) {
  EXPECT_THROW(assemble(query_of(511), {}, SegmentMode::TwoSegment), QueryTooLong);
  EXPECT_NO_THROW(assemble(query_of(510), {}, SegmentMode::TwoSegment));
  Tokens none{"A", "is", "b"};
  Tokens two{"[MASK]", "[MASK]"};
  EXPECT_THROW(assemble(none, {}, SegmentMode::TwoSegment), InvalidArgument);
  EXPECT_THROW(assemble(two, {}, SegmentMode::TwoSegment), InvalidArgument);
  Tokens q{"[MASK]"};
  Tokens masked_ctx{"x", "[MASK]"};
  EXPECT_THROW(assemble(q, masked_ctx, SegmentMode::TwoSegment), InvalidArgument);
  EXPECT_THROW(parse_segment_mode("three_segment"), InvalidArgument);
  EXPECT_EQ(parse_segment_mode("separator_only"), SegmentMode::SeparatorOnly);
}

TEST(Assemble, RandomLayoutsHoldInvariants) {
  std::mt19937 rng(11);
  for (int t = 0; t < 500; ++t) {
    std::size_t max_len = 8 + rng() % 60;
    std::size_t qn = 1 + rng() % (max_len - 2);
    auto q = query_of(qn);
    auto c = filler(rng() % 80, "c");
    auto mode = static_cast<SegmentMode>(rng() % 3);
    auto in = assemble(q, c, mode, {}, max_len);
    check_layout(in, max_len);
    ASSERT_EQ(in.query_tokens().size(), q.size());
    EXPECT_TRUE(std::equal(q.begin(), q.end(), in.query_tokens().begin()));
    auto ctx = in.context_tokens();
    EXPECT_TRUE(std::equal(ctx.begin(), ctx.end(), c.begin()));
    // Both query-context modes keep the same query span.
    auto other = assemble(q, {}, SegmentMode::OneSegment, {}, max_len);
    auto base = assemble(q, {}, SegmentMode::TwoSegment, {}, max_len);
    EXPECT_EQ(other.tokens, base.tokens);
  }
}
