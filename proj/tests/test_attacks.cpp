#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>

#include "elmia/attacks.hpp"
#include "elmia/cache.hpp"
#include "elmia/corpus.hpp"
#include "elmia/provider.hpp"
#include "elmia/rng.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace elmia;
using Catch::Matchers::WithinAbs;

namespace {

ScoredText with_logprobs(std::vector<std::optional<double>> lps) {
  ScoredText st;
  st.text.assign(lps.size(), 'x');
  for (std::size_t i = 0; i < lps.size(); ++i) st.tokens.push_back({"x", i, i + 1, lps[i]});
  return st;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::io_error;
}

}  // namespace

TEST_CASE("lowest_loss is the mean of defined logprobs") {
  CHECK(score_lowest_loss(with_logprobs({-1.0, -3.0})) == -2.0);
  CHECK(score_lowest_loss(with_logprobs({-2.0})) == -2.0);
  CHECK(score_lowest_loss(with_logprobs({std::nullopt, -1.0, -3.0})) == -2.0);
  CHECK(code_of([] { score_lowest_loss(with_logprobs({std::nullopt, std::nullopt})); }) ==
        Errc::no_scored_tokens);
}

TEST_CASE("zlib score divides the logprob sum by the compressed byte length") {
  ScoredText st = with_logprobs({-20.0, -30.0});
  const double c = static_cast<double>(zlib_compressed_size(st.text, 6));
  CHECK(score_zlib(st, 6) == -50.0 / c);
}

TEST_CASE("zlib compressed size matches the frozen reference value") {
  CHECK(zlib_compressed_size(std::string(100, 'a'), 6) == testsupport::kZlibSizeA100Level6);
  CHECK(zlib_compressed_size(std::string(100, 'a'), 6) ==
        zlib_compressed_size(std::string(100, 'a'), 6));
}

TEST_CASE("min_k averages the smallest k-fraction of logprobs") {
  CHECK(score_min_k(with_logprobs({-1.0, -2.0, -3.0, -4.0}), 0.5) == -3.5);
  CHECK(score_min_k(with_logprobs({-7.0}), 0.01) == -7.0);  // ceiling keeps at least one
  CHECK(code_of([] { score_min_k(with_logprobs({std::nullopt}), 0.5); }) ==
        Errc::no_scored_tokens);
}

TEST_CASE("min_k with k=1 equals lowest_loss exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::optional<double>> lps;
    const std::size_t n = 1 + rng.bounded(40);
    for (std::size_t i = 0; i < n; ++i) lps.push_back(-30.0 * rng.unit());
    ScoredText st = with_logprobs(lps);
    REQUIRE(score_min_k(st, 1.0) == score_lowest_loss(st));
  }
}

TEST_CASE("recall is the ratio of conditional to unconditional log-likelihood") {
  ScoredText plain = with_logprobs({-4.0, -6.0});
  ScoredText prefixed = with_logprobs({-3.0, -5.0});
  prefixed.conditioning = "some prefix";
  CHECK(score_recall(plain, prefixed) == 0.8);
  CHECK(score_recall(plain, plain) == 1.0);
  CHECK(score_recall(plain, prefixed, /*invert=*/true) == -0.8);

  ScoredText zero = with_logprobs({0.0});
  CHECK(code_of([&] { score_recall(zero, prefixed); }) == Errc::zero_denominator);
  ScoredText other = with_logprobs({-1.0});
  other.text = "different";
  CHECK(code_of([&] { score_recall(plain, other); }) == Errc::mismatched_target);
}

TEST_CASE("build_refset keeps surface-matched values before relaxation") {
  BenchmarkRecord record;
  record.entity_type = "NAME";
  record.candidate_value = "Ann";
  record.template_id = "t0";
  CandidatePool pool;
  pool.entity_type = "NAME";
  pool.trained_values = {"Ann", "Bob", "Eve", "Zoë", "ANN2", "x y"};
  for (const auto& v : pool.trained_values) pool.value_counts[v] = 1;

  AttackConfig config;
  config.refset_size = 3;
  RefSet refs = build_refset(record, pool, config, 7);
  REQUIRE(refs.values.size() == 3);
  CHECK_FALSE(refs.underfull());
  CHECK(refs.cues.relax_level == 0);
  CHECK(refs.cues.casing_class == "title");
  for (const std::string& v : refs.values) {
    CHECK((v == "Bob" || v == "Eve" || v == "Zoë"));
    CHECK(v != "Ann");
  }
}

TEST_CASE("build_refset relaxes cues in order and reports underfull sets") {
  BenchmarkRecord record;
  record.entity_type = "NAME";
  record.candidate_value = "Ann";
  CandidatePool pool;
  pool.entity_type = "NAME";
  pool.trained_values = {"Ann", "BOB", "EVE"};  // casing mismatch only
  for (const auto& v : pool.trained_values) pool.value_counts[v] = 1;
  AttackConfig config;
  config.refset_size = 2;
  RefSet refs = build_refset(record, pool, config, 7);
  CHECK(refs.values.size() == 2);
  CHECK(refs.cues.relax_level == 2);  // frequency relaxed, then casing

  CandidatePool only_self;
  only_self.entity_type = "NAME";
  only_self.trained_values = {"Ann"};
  only_self.value_counts["Ann"] = 1;
  RefSet empty = build_refset(record, only_self, config, 7);
  CHECK(empty.values.empty());
  CHECK(empty.underfull());
}

TEST_CASE("build_refset is deterministic for a fixed seed") {
  BenchmarkRecord record;
  record.entity_type = "NAME";
  record.candidate_value = "Ann";
  CandidatePool pool;
  pool.entity_type = "NAME";
  for (int i = 0; i < 26; ++i) {
    std::string v = "Nm" + std::string(1, static_cast<char>('a' + i));
    v[0] = 'N';
    pool.trained_values.insert(v);
    pool.value_counts[v] = 1;
  }
  AttackConfig config;
  RefSet a = build_refset(record, pool, config, 123);
  RefSet b = build_refset(record, pool, config, 123);
  RefSet c = build_refset(record, pool, config, 124);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
}

TEST_CASE("reference-set LLR matches hand arithmetic") {
  const double ln = std::log(0.5);
  std::vector<double> refs = {std::log(0.25), std::log(0.25)};
  CHECK_THAT(score_reference_set(ln, refs, LlrVariant::ratio),
             WithinAbs(std::log(2.0), 1e-12));

  std::vector<double> equal = {-1.5, -1.5, -1.5};
  CHECK_THAT(score_reference_set(-1.5, equal, LlrVariant::ratio), WithinAbs(0.0, 1e-12));

  std::vector<double> spread = {-1.0, -3.0};
  CHECK_THAT(score_reference_set(-1.0, spread, LlrVariant::standardized),
             WithinAbs(1.0, 1e-12));
  CHECK(code_of([] { score_reference_set(-1.0, {}, LlrVariant::ratio); }) == Errc::empty_refs);
}

TEST_CASE("standardized variant floors a zero spread instead of dividing by it") {
  std::vector<double> equal = {-2.0, -2.0};
  CHECK(score_reference_set(-1.0, equal, LlrVariant::standardized) == 1.0 / 1e-9);
}

TEST_CASE("LLR log-sum-exp path equals direct probability-space computation") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.bounded(8);
    std::vector<double> refs;
    for (std::size_t i = 0; i < n; ++i) refs.push_back(-30.0 * rng.unit());
    const double lp_e = -30.0 * rng.unit();
    double mean_p = 0.0;
    for (double lp : refs) mean_p += std::exp(lp);
    mean_p /= static_cast<double>(n);
    const double direct = lp_e - std::log(mean_p);
    REQUIRE_THAT(score_reference_set(lp_e, refs, LlrVariant::ratio),
                 WithinAbs(direct, 1e-9));
  }
}

TEST_CASE("ratio LLR is invariant under constant shifts") {
  Rng rng(33);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.bounded(8);
    std::vector<double> refs, shifted;
    const double c = 20.0 * rng.unit() - 10.0;
    for (std::size_t i = 0; i < n; ++i) {
      refs.push_back(-30.0 * rng.unit());
      shifted.push_back(refs.back() + c);
    }
    const double lp_e = -30.0 * rng.unit();
    REQUIRE_THAT(score_reference_set(lp_e + c, shifted, LlrVariant::ratio),
                 WithinAbs(score_reference_set(lp_e, refs, LlrVariant::ratio), 1e-12));
  }
}

TEST_CASE("suffix_slice selects the continuation window") {
  ScoredText st = with_logprobs({-1, -2, -3, -4, -5, -6});
  AttackConfig config;
  config.suffix_window = {false, 2};
  CHECK(suffix_slice(st, {2, 4}, config) == TokenSpan{4, 6});

  config.suffix_window = {false, 1};
  config.suffix_includes_candidate = true;
  CHECK(suffix_slice(st, {2, 4}, config) == TokenSpan{2, 5});

  AttackConfig all;
  CHECK(suffix_slice(st, {0, 1}, all) == TokenSpan{1, 6});
  CHECK(code_of([&] { suffix_slice(st, {4, 6}, all); }) == Errc::empty_window);
}

TEST_CASE("lowest_loss_suffix averages the window logprobs") {
  ScoredText st = with_logprobs({-9, -9, -9, -9, -2, -4});
  AttackConfig config;
  config.suffix_window = {false, 2};
  CHECK(score_lowest_loss_suffix(st, {2, 4}, config) == -3.0);

  AttackConfig all;
  CHECK(code_of([&] { score_lowest_loss_suffix(st, {4, 6}, all); }) == Errc::empty_window);
}

TEST_CASE("lowest_loss_suffix over everything after a leading candidate equals lowest_loss "
          "of the tail") {
  ScoredText st = with_logprobs({-1, -2, -3, -4});
  AttackConfig all;
  ScoredText tail = with_logprobs({-2, -3, -4});
  CHECK(score_lowest_loss_suffix(st, {0, 1}, all) == score_lowest_loss(tail));
}

TEST_CASE("reference_set_suffix reduces to the plain LLR on aligned slices") {
  // candidate slice sum ln 0.5; both refs' slice sums ln 0.25 -> ln 2
  ScoredText cand = with_logprobs({-9.0, std::log(0.5)});
  ScoredText ref = with_logprobs({-9.0, std::log(0.25)});
  std::vector<ScoredText> refs = {ref, ref};
  std::vector<TokenSpan> spans = {{0, 1}, {0, 1}};
  AttackConfig config;
  CHECK_THAT(score_reference_set_suffix(cand, {0, 1}, refs, spans, config),
             WithinAbs(std::log(2.0), 1e-12));

  ScoredText same = with_logprobs({-9.0, -1.25});
  std::vector<ScoredText> same_refs = {same, same};
  CHECK_THAT(score_reference_set_suffix(same, {0, 1}, same_refs, spans, config),
             WithinAbs(0.0, 1e-12));
}

TEST_CASE("reference_set_suffix drops empty-window refs and fails only when all drop") {
  ScoredText cand = with_logprobs({std::log(0.5), -9.0});  // candidate at 0, suffix exists
  ScoredText ref_ok = with_logprobs({std::log(0.25), -9.0});
  ScoredText ref_trailing = with_logprobs({-9.0, std::log(0.25)});  // candidate at the end
  AttackConfig config;
  config.suffix_window = {false, 1};

  std::vector<ScoredText> refs = {ref_ok, ref_trailing};
  std::vector<TokenSpan> spans = {{0, 1}, {1, 2}};
  // only ref_ok contributes: ln p cand suffix = -9, ref suffix = -9 -> LLR 0
  CHECK_THAT(score_reference_set_suffix(cand, {0, 1}, refs, spans, config),
             WithinAbs(0.0, 1e-12));

  std::vector<ScoredText> all_trailing = {ref_trailing, ref_trailing};
  std::vector<TokenSpan> trailing_spans = {{1, 2}, {1, 2}};
  CHECK(code_of([&] {
          score_reference_set_suffix(cand, {0, 1}, all_trailing, trailing_spans, config);
        }) == Errc::empty_refs);
}

// ---------------------------------------------------------------------------
// run_attacks

namespace {

class CountingProvider : public Provider {
 public:
  CountingProvider(const Provider& inner) : inner_(inner) {}
  ScoredText score_text(std::string_view text,
                        std::optional<std::string_view> conditioning = {}) const override {
    ++calls;
    return inner_.score_text(text, conditioning);
  }
  const std::string& model_id() const override { return inner_.model_id(); }
  mutable std::atomic<std::size_t> calls{0};

 private:
  const Provider& inner_;
};

struct Pipeline {
  std::vector<AnnotatedSample> samples;
  std::map<std::string, CandidatePool> pools;
  BuildResult built;
  TrigramLM lm;

  static Pipeline make(std::size_t n_samples, std::uint64_t seed) {
    Pipeline p;
    p.samples = ingest_string(testsupport::generate_corpus_jsonl(n_samples, seed));
    assign_partition(p.samples, {seed, 0.5});
    p.pools = build_pools(p.samples);
    p.built = build_benchmark(p.samples, p.pools, seed);
    std::vector<std::string> lines;
    {
      std::stringstream ss(training_corpus_content(p.samples));
      std::string line;
      while (std::getline(ss, line)) lines.push_back(line);
    }
    p.lm = TrigramLM::train(lines);
    return p;
  }
};

}  // namespace

TEST_CASE("run_attacks emits at most records x methods scores plus a skip log") {
  Pipeline p = Pipeline::make(30, 911);
  ReferenceProvider provider(p.lm, "m");
  std::vector<BenchmarkRecord> ten(p.built.records.begin(), p.built.records.begin() + 10);

  RunOptions options;
  options.seed = 1;
  options.recall_prefix = "quiet filler sentence\n";
  RunResult result = run_attacks(ten, provider, p.pools, AttackConfig{}, options);
  CHECK(result.scores.size() + result.skips.size() == 70);
  CHECK(result.scores.size() <= 70);
  for (std::size_t i = 1; i < result.scores.size(); ++i) {
    const auto& a = result.scores[i - 1];
    const auto& b = result.scores[i];
    REQUIRE((a.record_id < b.record_id ||
             (a.record_id == b.record_id &&
              static_cast<int>(a.method) < static_cast<int>(b.method))));
  }
}

TEST_CASE("a warm cache serves the whole batch without provider calls") {
  Pipeline p = Pipeline::make(20, 913);
  ReferenceProvider inner(p.lm, "m");
  CountingProvider counting(inner);
  auto dir = std::filesystem::temp_directory_path() / "elmia_test_warm_cache";
  std::filesystem::remove_all(dir);
  ScoreCache cache(dir);
  CachingProvider cached(counting, cache);

  std::vector<BenchmarkRecord> records(p.built.records.begin(),
                                       p.built.records.begin() + 12);
  RunOptions options;
  options.seed = 2;
  options.recall_prefix = "quiet filler sentence\n";
  RunResult cold = run_attacks(records, cached, p.pools, AttackConfig{}, options);
  const std::size_t cold_calls = counting.calls;
  REQUIRE(cold_calls > 0);
  RunResult warm = run_attacks(records, cached, p.pools, AttackConfig{}, options);
  CHECK(counting.calls == cold_calls);  // zero new provider work
  REQUIRE(warm.scores.size() == cold.scores.size());
  for (std::size_t i = 0; i < warm.scores.size(); ++i) {
    CHECK(warm.scores[i].record_id == cold.scores[i].record_id);
    CHECK(warm.scores[i].score == cold.scores[i].score);
  }
}

TEST_CASE("records without eligible references keep their baseline scores") {
  Pipeline p = Pipeline::make(20, 917);
  ReferenceProvider provider(p.lm, "m");
  BenchmarkRecord record = p.built.records.front();
  // a pool that only contains the candidate itself
  std::map<std::string, CandidatePool> pools;
  CandidatePool pool;
  pool.entity_type = record.entity_type;
  pool.trained_values = {record.candidate_value};
  pool.value_counts[record.candidate_value] = 1;
  pools[record.entity_type] = pool;

  RunOptions options;
  options.seed = 3;
  options.recall_prefix = "quiet filler sentence\n";
  RunResult result = run_attacks({record}, provider, pools, AttackConfig{}, options);

  std::set<MethodId> scored, skipped;
  for (const auto& s : result.scores) scored.insert(s.method);
  for (const auto& s : result.skips) skipped.insert(s.method);
  CHECK(scored.count(MethodId::lowest_loss) == 1);
  CHECK(scored.count(MethodId::zlib) == 1);
  CHECK(scored.count(MethodId::min_k) == 1);
  CHECK(scored.count(MethodId::recall) == 1);
  CHECK(skipped.count(MethodId::reference_set) == 1);
  CHECK(skipped.count(MethodId::reference_set_suffix) == 1);
}

TEST_CASE("run_attacks output is identical across worker counts") {
  Pipeline p = Pipeline::make(24, 919);
  ReferenceProvider provider(p.lm, "m");
  std::vector<BenchmarkRecord> records(p.built.records.begin(),
                                       p.built.records.begin() + 30);
  RunOptions serial;
  serial.seed = 4;
  serial.recall_prefix = "quiet filler sentence\n";
  RunOptions parallel = serial;
  parallel.max_in_flight = 4;
  RunResult a = run_attacks(records, provider, p.pools, AttackConfig{}, serial);
  RunResult b = run_attacks(records, provider, p.pools, AttackConfig{}, parallel);
  REQUIRE(a.scores.size() == b.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    CHECK(a.scores[i].record_id == b.scores[i].record_id);
    CHECK(a.scores[i].method == b.scores[i].method);
    CHECK(a.scores[i].score == b.scores[i].score);
  }
}
