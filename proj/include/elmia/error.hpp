#pragma once

#include <stdexcept>
#include <string>

namespace elmia {

enum class Errc {
  // corpus
  malformed_line,
  span_out_of_bounds,
  span_value_mismatch,
  overlapping_spans,
  empty_corpus,
  pool_exhausted,
  // provider / cache
  provider_unreachable,
  protocol_error,
  token_offset_mismatch,
  cache_corrupt,
  // reference model
  empty_training_set,
  // alignment
  empty_span,
  non_contiguous,
  invalid_span,
  // attacks
  no_scored_tokens,
  mismatched_target,
  zero_denominator,
  empty_refs,
  empty_window,
  refset_underfull,
  // metrics / analysis
  empty_group,
  no_scorable_groups,
  degenerate_variance,
  too_few_points,
  // io / config
  io_error,
  bad_config,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_line: return "MalformedLine";
    case Errc::span_out_of_bounds: return "SpanOutOfBounds";
    case Errc::span_value_mismatch: return "SpanValueMismatch";
    case Errc::overlapping_spans: return "OverlappingSpans";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::pool_exhausted: return "PoolExhausted";
    case Errc::provider_unreachable: return "ProviderUnreachable";
    case Errc::protocol_error: return "ProtocolError";
    case Errc::token_offset_mismatch: return "TokenOffsetMismatch";
    case Errc::cache_corrupt: return "CacheCorrupt";
    case Errc::empty_training_set: return "EmptyTrainingSet";
    case Errc::empty_span: return "EmptySpan";
    case Errc::non_contiguous: return "NonContiguous";
    case Errc::invalid_span: return "InvalidSpan";
    case Errc::no_scored_tokens: return "NoScoredTokens";
    case Errc::mismatched_target: return "MismatchedTarget";
    case Errc::zero_denominator: return "ZeroDenominator";
    case Errc::empty_refs: return "EmptyRefs";
    case Errc::empty_window: return "EmptyWindow";
    case Errc::refset_underfull: return "RefSetUnderfull";
    case Errc::empty_group: return "EmptyGroup";
    case Errc::no_scorable_groups: return "NoScorableGroups";
    case Errc::degenerate_variance: return "DegenerateVariance";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::io_error: return "IoError";
    case Errc::bad_config: return "BadConfig";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace elmia
