#include <catch2/catch_amalgamated.hpp>

#include "elmia/align.hpp"
#include "elmia/provider.hpp"
#include "elmia/refmodel.hpp"
#include "elmia/rng.hpp"
#include "support/synthetic.hpp"

using namespace elmia;

namespace {

ScoredText three_tokens() {
  ScoredText st;
  st.text = std::string(15, 'x');
  st.tokens = {{"aaaaa", 0, 5, -1.0}, {"bbbbbb", 5, 11, -2.0}, {"cccc", 11, 15, -3.0}};
  return st;
}

}  // namespace

TEST_CASE("token_span with exact boundaries under overlap policy") {
  CHECK(token_span(three_tokens(), 5, 11, OverlapPolicy::overlap) == TokenSpan{1, 2});
}

TEST_CASE("token_span catches partial intersections under overlap policy") {
  CHECK(token_span(three_tokens(), 3, 7, OverlapPolicy::overlap) == TokenSpan{0, 2});
}

TEST_CASE("token_span under contained policy requires full containment") {
  try {
    token_span(three_tokens(), 3, 7, OverlapPolicy::contained);
    FAIL("expected EmptySpan");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_span);
  }
  CHECK(token_span(three_tokens(), 5, 15, OverlapPolicy::contained) == TokenSpan{1, 3});
}

TEST_CASE("token_span validates the char range") {
  try {
    token_span(three_tokens(), 4, 99);
    FAIL("expected InvalidSpan");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_span);
  }
}

TEST_CASE("partition splits six tokens around a middle candidate") {
  ScoredText st;
  st.text = std::string(6, 'x');
  for (int i = 0; i < 6; ++i)
    st.tokens.push_back({"t", static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), -1.0});
  TokenPartition p = partition(st, TokenSpan{2, 4});
  CHECK(p.prefix.size() == 2);
  CHECK(p.candidate.size() == 2);
  CHECK(p.suffix.size() == 2);
}

TEST_CASE("partition with the candidate at the start has an empty prefix") {
  ScoredText st = three_tokens();
  TokenPartition p = partition(st, TokenSpan{0, 1});
  CHECK(p.prefix.empty());
  CHECK(p.candidate.size() == 1);
  CHECK(p.suffix.size() == 2);
}

TEST_CASE("partition with the candidate at the end has an empty suffix") {
  ScoredText st = three_tokens();
  TokenPartition p = partition(st, TokenSpan{2, 3});
  CHECK(p.prefix.size() == 2);
  CHECK(p.suffix.empty());
}

TEST_CASE("partition pieces always cover every token") {
  Rng rng(17);
  ScoredText st;
  for (const LmToken& t : lm_tokenize("the quick brown fox jumps over the lazy dog ."))
    st.tokens.push_back({t.text, t.char_start, t.char_end, -1.0});
  st.text = "the quick brown fox jumps over the lazy dog .";
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t a = rng.bounded(st.tokens.size() + 1);
    std::size_t b = rng.bounded(st.tokens.size() + 1);
    TokenSpan span{std::min(a, b), std::max(a, b)};
    TokenPartition p = partition(st, span);
    REQUIRE(p.prefix.size() + p.candidate.size() + p.suffix.size() == st.tokens.size());
  }
}

TEST_CASE("contained-policy span is a subset of the overlap-policy span") {
  ReferenceProvider provider(TrigramLM::train({"alice pays bob every day"}), "m");
  ScoredText st = provider.score_text("alice pays bob every day");
  Rng rng(23);
  const std::size_t len = char_length(st.text);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t a = rng.bounded(len);
    std::size_t b = a + 1 + rng.bounded(len - a);
    TokenSpan overlap = token_span(st, a, b, OverlapPolicy::overlap);
    try {
      TokenSpan contained = token_span(st, a, b, OverlapPolicy::contained);
      REQUIRE(contained.start_idx >= overlap.start_idx);
      REQUIRE(contained.end_idx <= overlap.end_idx);
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::empty_span);  // empty is a subset, fine
    }
  }
}
