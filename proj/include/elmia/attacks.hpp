#pragma once

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "elmia/align.hpp"
#include "elmia/corpus.hpp"
#include "elmia/error.hpp"
#include "elmia/provider.hpp"
#include "elmia/refmodel.hpp"
#include "elmia/rng.hpp"
#include "elmia/scored_text.hpp"

// The seven membership-inference scorers. Every score follows the convention
// "higher means more likely member".

namespace elmia {

enum class MethodId {
  lowest_loss,
  zlib,
  min_k,
  recall,
  lowest_loss_suffix,
  reference_set,
  reference_set_suffix,
};

constexpr std::array<MethodId, 7> kAllMethods = {
    MethodId::lowest_loss,  MethodId::zlib,          MethodId::min_k,
    MethodId::recall,       MethodId::lowest_loss_suffix,
    MethodId::reference_set, MethodId::reference_set_suffix,
};

inline const char* to_string(MethodId m) {
  switch (m) {
    case MethodId::lowest_loss: return "lowest_loss";
    case MethodId::zlib: return "zlib";
    case MethodId::min_k: return "min_k";
    case MethodId::recall: return "recall";
    case MethodId::lowest_loss_suffix: return "lowest_loss_suffix";
    case MethodId::reference_set: return "reference_set";
    case MethodId::reference_set_suffix: return "reference_set_suffix";
  }
  return "?";
}

inline MethodId method_from_string(const std::string& s) {
  for (MethodId m : kAllMethods)
    if (s == to_string(m)) return m;
  throw Error(Errc::bad_config, "unknown method '" + s + "'");
}

enum class LlrVariant { ratio, standardized };

// Suffix continuation window: all remaining tokens, or a fixed count.
struct SuffixWindow {
  bool all = true;
  std::size_t count = 0;

  static SuffixWindow parse(const std::string& s) {
    if (s == "all") return {};
    return {false, static_cast<std::size_t>(std::stoull(s))};
  }
  std::string str() const { return all ? "all" : std::to_string(count); }
};

struct AttackConfig {
  double min_k_fraction = 0.2;
  SuffixWindow suffix_window;
  bool suffix_includes_candidate = false;
  std::size_t refset_size = 5;
  LlrVariant llr_variant = LlrVariant::ratio;
  int zlib_level = 6;
  std::string recall_prefix_path;
  bool recall_invert = false;
  OverlapPolicy alignment_policy = OverlapPolicy::overlap;
};

struct AttackScore {
  std::string record_id;
  MethodId method = MethodId::lowest_loss;
  double score = 0.0;
  std::string model_id;
};

struct SkipEntry {
  std::string record_id;
  MethodId method = MethodId::lowest_loss;
  std::string error;
};

// ---------------------------------------------------------------------------
// baseline scorers

inline double score_lowest_loss(const ScoredText& scored) {
  std::vector<double> lps = defined_logprobs(scored.tokens);
  if (lps.empty()) throw Error(Errc::no_scored_tokens, "no token has a logprob");
  double sum = 0.0;
  for (double lp : lps) sum += lp;
  return sum / static_cast<double>(lps.size());
}

// RFC-1950 (zlib format) compressed byte length of the UTF-8 text.
inline std::size_t zlib_compressed_size(std::string_view text, int level) {
  uLongf bound = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buf(bound);
  uLongf out_len = bound;
  int rc = compress2(buf.data(), &out_len, reinterpret_cast<const Bytef*>(text.data()),
                     static_cast<uLong>(text.size()), level);
  if (rc != Z_OK) throw Error(Errc::io_error, "zlib compress2 failed: " + std::to_string(rc));
  return static_cast<std::size_t>(out_len);
}

inline double score_zlib(const ScoredText& scored, int level = 6) {
  std::vector<double> lps = defined_logprobs(scored.tokens);
  if (lps.empty()) throw Error(Errc::no_scored_tokens, "no token has a logprob");
  double sum = 0.0;
  for (double lp : lps) sum += lp;
  return sum / static_cast<double>(zlib_compressed_size(scored.text, level));
}

inline double score_min_k(const ScoredText& scored, double k_fraction) {
  std::vector<double> lps = defined_logprobs(scored.tokens);
  if (lps.empty()) throw Error(Errc::no_scored_tokens, "no token has a logprob");
  const auto n = lps.size();
  auto m = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(n)));
  m = std::clamp<std::size_t>(m, 1, n);
  if (m == n) return score_lowest_loss(scored);  // keeps min_k(k=1) bit-identical
  std::partial_sort(lps.begin(), lps.begin() + static_cast<std::ptrdiff_t>(m), lps.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) sum += lps[i];
  return sum / static_cast<double>(m);
}

inline double score_recall(const ScoredText& plain, const ScoredText& prefixed,
                           bool invert = false) {
  if (plain.text != prefixed.text)
    throw Error(Errc::mismatched_target, "plain and prefixed scores cover different texts");
  const double ll_plain = sum_defined_logprobs(plain.tokens);
  const double ll_prefixed = sum_defined_logprobs(prefixed.tokens);
  if (std::abs(ll_plain) < 1e-12)
    throw Error(Errc::zero_denominator, "unconditional log-likelihood is zero");
  const double score = ll_prefixed / ll_plain;
  return invert ? -score : score;
}

// ---------------------------------------------------------------------------
// reference sets

struct RefCues {
  std::size_t token_length = 0;
  std::string casing_class;
  int frequency_bin = 0;
  int relax_level = 0;  // 0 all cues, 1 freq relaxed, 2 +casing, 3 +length
};

struct RefSet {
  std::string entity_type;
  std::vector<std::string> values;
  RefCues cues;
  std::size_t requested = 0;

  bool underfull() const { return values.size() < requested; }
};

namespace detail {

inline std::string casing_class(const std::string& value) {
  bool has_upper = false, has_lower = false, title = true, first_of_word = true, has_alpha = false;
  for (unsigned char c : value) {
    if (std::isspace(c)) {
      first_of_word = true;
      continue;
    }
    if (std::isupper(c)) {
      has_upper = true;
      has_alpha = true;
      if (!first_of_word) title = false;
    } else if (std::islower(c)) {
      has_lower = true;
      has_alpha = true;
      if (first_of_word) title = false;
    }
    first_of_word = false;
  }
  if (!has_upper) return "all_lower";  // includes caseless strings (digits etc.)
  if (!has_lower) return "all_upper";
  if (has_alpha && title) return "title";
  return "mixed";
}

// Tercile bin of a value's occurrence count among the pool's counts.
struct FrequencyBins {
  std::size_t t1 = 0, t2 = 0;

  static FrequencyBins from_counts(std::vector<std::size_t> counts) {
    FrequencyBins bins;
    if (counts.empty()) return bins;
    std::sort(counts.begin(), counts.end());
    const std::size_t n = counts.size();
    bins.t1 = counts[(n - 1) / 3];
    bins.t2 = counts[(2 * (n - 1)) / 3];
    return bins;
  }

  int bin(std::size_t count) const { return count <= t1 ? 0 : count <= t2 ? 1 : 2; }
};

}  // namespace detail

// Type-consistent reference values matched to the candidate on token-length
// bin (+-1 token), casing class and corpus frequency tercile. When fewer than
// N values qualify, cues are relaxed in the order frequency, casing, length.
inline RefSet build_refset(const BenchmarkRecord& record, const CandidatePool& pool,
                           const AttackConfig& config, std::uint64_t seed) {
  RefSet out;
  out.entity_type = record.entity_type;
  out.requested = config.refset_size;

  std::vector<std::string> values;
  for (const std::string& v : pool.trained_values)
    if (v != record.candidate_value) values.push_back(v);
  for (const std::string& v : pool.untrained_values)
    if (v != record.candidate_value) values.push_back(v);
  std::sort(values.begin(), values.end());

  std::vector<std::size_t> counts;
  counts.reserve(pool.value_counts.size());
  for (const auto& [v, c] : pool.value_counts) counts.push_back(c);
  const auto bins = detail::FrequencyBins::from_counts(std::move(counts));
  auto count_of = [&](const std::string& v) -> std::size_t {
    auto it = pool.value_counts.find(v);
    return it == pool.value_counts.end() ? 0 : it->second;
  };

  const std::size_t cand_len = lm_tokenize(record.candidate_value).size();
  const std::string cand_casing = detail::casing_class(record.candidate_value);
  const int cand_bin = bins.bin(count_of(record.candidate_value));
  out.cues = {cand_len, cand_casing, cand_bin, 0};

  auto eligible_at = [&](int relax) {
    std::vector<std::string> out_values;
    for (const std::string& v : values) {
      if (relax < 3) {
        const std::size_t len = lm_tokenize(v).size();
        if (len + 1 < cand_len || len > cand_len + 1) continue;
      }
      if (relax < 2 && detail::casing_class(v) != cand_casing) continue;
      if (relax < 1 && bins.bin(count_of(v)) != cand_bin) continue;
      out_values.push_back(v);
    }
    return out_values;
  };

  std::vector<std::string> eligible;
  for (int relax = 0; relax <= 3; ++relax) {
    eligible = eligible_at(relax);
    out.cues.relax_level = relax;
    if (eligible.size() >= config.refset_size) break;
  }
  Rng rng(seed);
  out.values = rng.sample(std::move(eligible), config.refset_size);
  return out;
}

// Log-likelihood ratio of the candidate's fit against the reference set, or
// its standardized variant.
inline double score_reference_set(double lp_candidate, std::span<const double> lp_refs,
                                  LlrVariant variant) {
  if (lp_refs.empty()) throw Error(Errc::empty_refs, "reference set is empty");
  const auto n = static_cast<double>(lp_refs.size());
  if (variant == LlrVariant::standardized) {
    double mean = 0.0;
    for (double lp : lp_refs) mean += lp;
    mean /= n;
    double var = 0.0;
    for (double lp : lp_refs) var += (lp - mean) * (lp - mean);
    const double sd = std::sqrt(var / n);
    return (lp_candidate - mean) / std::max(sd, 1e-9);
  }
  // log-sum-exp of the reference logprobs, then subtract ln N for the mean.
  double m = lp_refs[0];
  for (double lp : lp_refs) m = std::max(m, lp);
  double acc = 0.0;
  for (double lp : lp_refs) acc += std::exp(lp - m);
  const double lse = m + std::log(acc);
  return lp_candidate - (lse - std::log(n));
}

// The continuation window after the candidate span: the next w tokens (all
// remaining when the window is "all"), optionally with the candidate tokens
// prepended.
inline TokenSpan suffix_slice(const ScoredText& scored, TokenSpan candidate,
                              const AttackConfig& config) {
  if (candidate.end_idx > scored.tokens.size())
    throw Error(Errc::invalid_span, "candidate span outside token list");
  const std::size_t remaining = scored.tokens.size() - candidate.end_idx;
  const std::size_t take = config.suffix_window.all
                               ? remaining
                               : std::min(config.suffix_window.count, remaining);
  TokenSpan slice{config.suffix_includes_candidate ? candidate.start_idx : candidate.end_idx,
                  candidate.end_idx + take};
  if (slice.empty())
    throw Error(Errc::empty_window, "suffix window resolves to zero tokens");
  return slice;
}

namespace detail {

inline std::vector<double> slice_logprobs(const ScoredText& scored, TokenSpan slice) {
  std::vector<double> out;
  for (std::size_t i = slice.start_idx; i < slice.end_idx; ++i)
    if (scored.tokens[i].logprob) out.push_back(*scored.tokens[i].logprob);
  return out;
}

}  // namespace detail

inline double score_lowest_loss_suffix(const ScoredText& scored, TokenSpan candidate,
                                       const AttackConfig& config) {
  TokenSpan slice = suffix_slice(scored, candidate, config);
  std::vector<double> lps = detail::slice_logprobs(scored, slice);
  if (lps.empty()) throw Error(Errc::no_scored_tokens, "no suffix token has a logprob");
  double sum = 0.0;
  for (double lp : lps) sum += lp;
  return sum / static_cast<double>(lps.size());
}

// Reference-set LLR over suffix-window logprob sums. References whose window
// is empty are dropped; an empty candidate window propagates EmptyWindow.
inline double score_reference_set_suffix(const ScoredText& candidate_scored,
                                         TokenSpan candidate_span,
                                         std::span<const ScoredText> ref_scoreds,
                                         std::span<const TokenSpan> ref_spans,
                                         const AttackConfig& config) {
  TokenSpan cand_slice = suffix_slice(candidate_scored, candidate_span, config);
  std::vector<double> cand_lps = detail::slice_logprobs(candidate_scored, cand_slice);
  if (cand_lps.empty()) throw Error(Errc::no_scored_tokens, "no suffix token has a logprob");
  double lp_candidate = 0.0;
  for (double lp : cand_lps) lp_candidate += lp;

  std::vector<double> lp_refs;
  for (std::size_t i = 0; i < ref_scoreds.size(); ++i) {
    try {
      TokenSpan slice = suffix_slice(ref_scoreds[i], ref_spans[i], config);
      double sum = 0.0;
      for (double lp : detail::slice_logprobs(ref_scoreds[i], slice)) sum += lp;
      lp_refs.push_back(sum);
    } catch (const Error& e) {
      if (e.code() != Errc::empty_window) throw;
    }
  }
  return score_reference_set(lp_candidate, lp_refs, config.llr_variant);
}

// ---------------------------------------------------------------------------
// batch driver

struct RunOptions {
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  std::uint64_t seed = 0;
  int max_in_flight = 1;
  std::string recall_prefix;  // conditioning text for the recall method
};

struct RunResult {
  std::vector<AttackScore> scores;
  std::vector<SkipEntry> skips;
};

namespace detail {

struct RecordOutput {
  std::vector<AttackScore> scores;
  std::vector<SkipEntry> skips;
};

inline bool wants(const std::vector<MethodId>& methods, MethodId m) {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

inline void score_one_record(const BenchmarkRecord& record, const Provider& provider,
                             const std::map<std::string, CandidatePool>& pools,
                             const AttackConfig& config, const RunOptions& options,
                             RecordOutput& out) {
  const std::string& model = provider.model_id();
  auto emit = [&](MethodId m, double score) {
    out.scores.push_back({record.record_id, m, score, model});
  };
  auto skip = [&](MethodId m, const std::string& why) {
    out.skips.push_back({record.record_id, m, why});
  };

  ScoredText full;
  try {
    full = provider.score_text(record.text);
  } catch (const std::exception& e) {
    for (MethodId m : options.methods) skip(m, e.what());
    return;
  }

  if (wants(options.methods, MethodId::lowest_loss)) {
    try {
      emit(MethodId::lowest_loss, score_lowest_loss(full));
    } catch (const std::exception& e) {
      skip(MethodId::lowest_loss, e.what());
    }
  }
  if (wants(options.methods, MethodId::zlib)) {
    try {
      emit(MethodId::zlib, score_zlib(full, config.zlib_level));
    } catch (const std::exception& e) {
      skip(MethodId::zlib, e.what());
    }
  }
  if (wants(options.methods, MethodId::min_k)) {
    try {
      emit(MethodId::min_k, score_min_k(full, config.min_k_fraction));
    } catch (const std::exception& e) {
      skip(MethodId::min_k, e.what());
    }
  }
  if (wants(options.methods, MethodId::recall)) {
    try {
      if (options.recall_prefix.empty())
        throw Error(Errc::bad_config, "no recall prefix text configured");
      ScoredText prefixed =
          provider.score_text(record.text, std::string_view(options.recall_prefix));
      emit(MethodId::recall, score_recall(full, prefixed, config.recall_invert));
    } catch (const std::exception& e) {
      skip(MethodId::recall, e.what());
    }
  }

  const bool needs_alignment = wants(options.methods, MethodId::lowest_loss_suffix) ||
                               wants(options.methods, MethodId::reference_set) ||
                               wants(options.methods, MethodId::reference_set_suffix);
  if (!needs_alignment) return;

  TokenSpan cand_span;
  try {
    cand_span = token_span(full, record.candidate_char_start, record.candidate_char_end,
                           config.alignment_policy);
  } catch (const std::exception& e) {
    for (MethodId m : {MethodId::lowest_loss_suffix, MethodId::reference_set,
                       MethodId::reference_set_suffix})
      if (wants(options.methods, m)) skip(m, e.what());
    return;
  }

  if (wants(options.methods, MethodId::lowest_loss_suffix)) {
    try {
      emit(MethodId::lowest_loss_suffix, score_lowest_loss_suffix(full, cand_span, config));
    } catch (const std::exception& e) {
      skip(MethodId::lowest_loss_suffix, e.what());
    }
  }

  const bool needs_refs = wants(options.methods, MethodId::reference_set) ||
                          wants(options.methods, MethodId::reference_set_suffix);
  if (!needs_refs) return;

  std::vector<ScoredText> ref_scoreds;
  std::vector<TokenSpan> ref_spans;
  try {
    auto pool_it = pools.find(record.entity_type);
    if (pool_it == pools.end())
      throw Error(Errc::refset_underfull, "no candidate pool for type " + record.entity_type);
    // Member copies of a template share one reference set across subsets so
    // a warm cache can serve all of them.
    RefSet refs = build_refset(
        record, pool_it->second, config,
        mix_seed(options.seed, record.template_id + "\x1f" + record.candidate_value));
    if (refs.values.empty())
      throw Error(Errc::refset_underfull, "no eligible reference values");
    for (const std::string& v : refs.values) {
      std::string ref_text = splice_chars(record.text, record.candidate_char_start,
                                          record.candidate_char_end, v);
      ScoredText scored = provider.score_text(ref_text);
      TokenSpan span = token_span(scored, record.candidate_char_start,
                                  record.candidate_char_start + char_length(v),
                                  config.alignment_policy);
      ref_scoreds.push_back(std::move(scored));
      ref_spans.push_back(span);
    }
  } catch (const std::exception& e) {
    for (MethodId m : {MethodId::reference_set, MethodId::reference_set_suffix})
      if (wants(options.methods, m)) skip(m, e.what());
    return;
  }

  if (wants(options.methods, MethodId::reference_set)) {
    try {
      std::vector<double> lp_refs;
      for (std::size_t i = 0; i < ref_scoreds.size(); ++i) {
        double sum = 0.0;
        for (double lp : slice_logprobs(ref_scoreds[i], ref_spans[i])) sum += lp;
        lp_refs.push_back(sum);
      }
      std::vector<double> cand_lps = slice_logprobs(full, cand_span);
      if (cand_lps.empty()) throw Error(Errc::no_scored_tokens, "candidate span has no logprobs");
      double lp_candidate = 0.0;
      for (double lp : cand_lps) lp_candidate += lp;
      emit(MethodId::reference_set,
           score_reference_set(lp_candidate, lp_refs, config.llr_variant));
    } catch (const std::exception& e) {
      skip(MethodId::reference_set, e.what());
    }
  }
  if (wants(options.methods, MethodId::reference_set_suffix)) {
    try {
      emit(MethodId::reference_set_suffix,
           score_reference_set_suffix(full, cand_span, ref_scoreds, ref_spans, config));
    } catch (const std::exception& e) {
      skip(MethodId::reference_set_suffix, e.what());
    }
  }
}

}  // namespace detail

// Scores every record with every requested method. Per-record failures land
// in the skip log; the batch never aborts. Output order is deterministic:
// (record_id, method), regardless of the worker count.
inline RunResult run_attacks(const std::vector<BenchmarkRecord>& records,
                             const Provider& provider,
                             const std::map<std::string, CandidatePool>& pools,
                             const AttackConfig& config, const RunOptions& options) {
  std::vector<detail::RecordOutput> outputs(records.size());
  const int workers = std::max(1, options.max_in_flight);
  if (workers == 1 || records.size() < 2) {
    for (std::size_t i = 0; i < records.size(); ++i)
      detail::score_one_record(records[i], provider, pools, config, options, outputs[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1))
          detail::score_one_record(records[i], provider, pools, config, options, outputs[i]);
      });
    }
    for (std::thread& t : threads) t.join();
  }

  RunResult result;
  for (detail::RecordOutput& out : outputs) {
    result.scores.insert(result.scores.end(), out.scores.begin(), out.scores.end());
    result.skips.insert(result.skips.end(), out.skips.begin(), out.skips.end());
  }
  auto by_record_then_method = [](const auto& a, const auto& b) {
    if (a.record_id != b.record_id) return a.record_id < b.record_id;
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  };
  std::sort(result.scores.begin(), result.scores.end(), by_record_then_method);
  std::sort(result.skips.begin(), result.skips.end(), by_record_then_method);
  return result;
}

}  // namespace elmia
