#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "elmia/error.hpp"
#include "elmia/unicode.hpp"

namespace elmia {

// One scored token. Char ranges are code-point indices into the owning text;
// consecutive ranges tile the text. The logprob is a natural-log probability
// and is absent only for the first token of an unconditioned sequence.
struct TokenScore {
  std::string token;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::optional<double> logprob;

  bool operator==(const TokenScore&) const = default;
};

struct ScoredText {
  std::string text;
  std::optional<std::string> conditioning;
  std::vector<TokenScore> tokens;
  std::string model_id;

  bool operator==(const ScoredText&) const = default;
};

// Token char ranges must partition [0, char_length(text)).
inline void check_tiling(const ScoredText& st) {
  const std::size_t total = char_length(st.text);
  std::size_t cursor = 0;
  for (const TokenScore& t : st.tokens) {
    if (t.char_start != cursor || t.char_end < t.char_start)
      throw Error(Errc::token_offset_mismatch,
                  "token ranges do not tile the text at char " + std::to_string(cursor));
    cursor = t.char_end;
  }
  if (cursor != total)
    throw Error(Errc::token_offset_mismatch, "token ranges cover " + std::to_string(cursor) +
                                                 " of " + std::to_string(total) + " chars");
}

inline std::vector<double> defined_logprobs(const std::vector<TokenScore>& tokens) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const TokenScore& t : tokens)
    if (t.logprob) out.push_back(*t.logprob);
  return out;
}

inline double sum_defined_logprobs(const std::vector<TokenScore>& tokens) {
  double s = 0.0;
  for (const TokenScore& t : tokens)
    if (t.logprob) s += *t.logprob;
  return s;
}

// Drop tokens that belong to the conditioning prefix of a jointly scored
// string and re-base ranges onto the bare text. Tokens are kept when their
// range starts at or after the conditioning boundary (strict-start policy).
// If the leading gap left behind is whitespace-only, the first kept token
// absorbs it so ranges still tile; otherwise the boundary split a token in
// half and the request is rejected.
inline std::vector<TokenScore> strip_conditioning_tokens(const std::vector<TokenScore>& tokens,
                                                         std::size_t conditioning_chars,
                                                         const std::string& text) {
  std::vector<TokenScore> kept;
  for (const TokenScore& t : tokens) {
    if (t.char_start < conditioning_chars) continue;
    TokenScore shifted = t;
    shifted.char_start -= conditioning_chars;
    shifted.char_end -= conditioning_chars;
    kept.push_back(std::move(shifted));
  }
  if (kept.empty())
    throw Error(Errc::token_offset_mismatch, "no tokens start inside the scored text");
  if (kept.front().char_start > 0) {
    std::string gap = char_slice(text, 0, kept.front().char_start);
    for (unsigned char c : gap)
      if (!std::isspace(c))
        throw Error(Errc::token_offset_mismatch,
                    "conditioning boundary splits a token inside the scored text");
    kept.front().char_start = 0;
  }
  return kept;
}

}  // namespace elmia
