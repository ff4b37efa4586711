#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "elmia/error.hpp"
#include "elmia/scored_text.hpp"
#include "elmia/unicode.hpp"

// Mapping between a candidate's character span and token indices, plus the
// prefix / candidate / suffix token partition the suffix-window scorers need.

namespace elmia {

struct TokenSpan {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;  // half-open

  std::size_t size() const { return end_idx - start_idx; }
  bool empty() const { return start_idx == end_idx; }
  bool operator==(const TokenSpan&) const = default;
};

enum class OverlapPolicy { overlap, contained };

// Tokens matching a char range: under `overlap` any token whose range has a
// non-empty intersection with it, under `contained` only tokens lying fully
// inside it.
inline TokenSpan token_span(const ScoredText& scored, std::size_t char_start,
                            std::size_t char_end, OverlapPolicy policy = OverlapPolicy::overlap) {
  const std::size_t total = char_length(scored.text);
  if (char_start > char_end || char_end > total)
    throw Error(Errc::invalid_span, "char range (" + std::to_string(char_start) + "," +
                                        std::to_string(char_end) + ") outside [0," +
                                        std::to_string(total) + "]");
  bool found = false;
  std::size_t first = 0, last = 0;
  for (std::size_t i = 0; i < scored.tokens.size(); ++i) {
    const TokenScore& t = scored.tokens[i];
    const bool match = policy == OverlapPolicy::overlap
                           ? (t.char_start < char_end && t.char_end > char_start)
                           : (t.char_start >= char_start && t.char_end <= char_end);
    if (!match) continue;
    if (!found) {
      first = i;
      found = true;
    } else if (i != last + 1) {
      throw Error(Errc::non_contiguous, "matched tokens are not contiguous");
    }
    last = i;
  }
  if (!found)
    throw Error(Errc::empty_span, "no token matched char range (" + std::to_string(char_start) +
                                      "," + std::to_string(char_end) + ")");
  return TokenSpan{first, last + 1};
}

struct TokenPartition {
  std::span<const TokenScore> prefix;
  std::span<const TokenScore> candidate;
  std::span<const TokenScore> suffix;
};

inline TokenPartition partition(const ScoredText& scored, TokenSpan candidate) {
  if (candidate.start_idx > candidate.end_idx || candidate.end_idx > scored.tokens.size())
    throw Error(Errc::invalid_span, "token span outside token list");
  std::span<const TokenScore> all(scored.tokens);
  return TokenPartition{all.subspan(0, candidate.start_idx),
                        all.subspan(candidate.start_idx, candidate.size()),
                        all.subspan(candidate.end_idx)};
}

}  // namespace elmia
