#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "elmia/error.hpp"
#include "elmia/rng.hpp"
#include "elmia/unicode.hpp"

// Benchmark construction: ingest PII-annotated text, split it into a train
// and a holdout partition, derive per-type candidate pools, and emit member /
// non-member record pairs for the trained, untrained and mix subsets.

namespace elmia {

enum class Partition { unassigned, train_set, holdout_set };
enum class Subset { trained, untrained, mix };
enum class Label { member, nonmember };

inline const char* to_string(Subset s) {
  switch (s) {
    case Subset::trained: return "trained";
    case Subset::untrained: return "untrained";
    case Subset::mix: return "mix";
  }
  return "?";
}

inline const char* to_string(Label l) { return l == Label::member ? "member" : "nonmember"; }

inline Subset subset_from_string(const std::string& s) {
  if (s == "trained") return Subset::trained;
  if (s == "untrained") return Subset::untrained;
  if (s == "mix") return Subset::mix;
  throw Error(Errc::bad_config, "unknown subset '" + s + "'");
}

inline Label label_from_string(const std::string& s) {
  if (s == "member") return Label::member;
  if (s == "nonmember") return Label::nonmember;
  throw Error(Errc::bad_config, "unknown label '" + s + "'");
}

constexpr std::array<Subset, 3> kAllSubsets = {Subset::trained, Subset::untrained, Subset::mix};

struct EntitySpan {
  std::string entity_type;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string value;
};

struct AnnotatedSample {
  std::string sample_id;
  std::string text;
  std::vector<EntitySpan> spans;  // sorted by char_start
  Partition partition = Partition::unassigned;
};

struct CandidatePool {
  std::string entity_type;
  std::set<std::string> trained_values;
  std::set<std::string> untrained_values;
  // Span-occurrence counts across the whole source corpus; feeds the
  // reference-set frequency-bin cue.
  std::map<std::string, std::size_t> value_counts;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  double holdout_fraction = 0.5;
};

struct BenchmarkRecord {
  std::string record_id;
  std::string template_id;  // sample_id + ":" + slot index
  Subset subset = Subset::trained;
  std::string entity_type;
  std::string text;  // fully instantiated sentence
  std::string candidate_value;
  std::size_t candidate_char_start = 0;
  std::size_t candidate_char_end = 0;
  Label label = Label::member;
  std::size_t n_entities = 0;
};

// ---------------------------------------------------------------------------
// ingest

namespace detail {

inline void validate_spans(AnnotatedSample& sample) {
  const std::size_t text_chars = char_length(sample.text);
  for (const EntitySpan& sp : sample.spans) {
    if (sp.char_start >= sp.char_end || sp.char_end > text_chars)
      throw Error(Errc::span_out_of_bounds,
                  "sample " + sample.sample_id + ": span (" + std::to_string(sp.char_start) +
                      "," + std::to_string(sp.char_end) + ") outside text of length " +
                      std::to_string(text_chars));
    if (char_slice(sample.text, sp.char_start, sp.char_end) != sp.value)
      throw Error(Errc::span_value_mismatch,
                  "sample " + sample.sample_id + ": slice '" +
                      char_slice(sample.text, sp.char_start, sp.char_end) + "' != value '" +
                      sp.value + "'");
  }
  std::sort(sample.spans.begin(), sample.spans.end(),
            [](const EntitySpan& a, const EntitySpan& b) { return a.char_start < b.char_start; });
  for (std::size_t i = 1; i < sample.spans.size(); ++i) {
    if (sample.spans[i].char_start < sample.spans[i - 1].char_end)
      throw Error(Errc::overlapping_spans,
                  "sample " + sample.sample_id + ": spans (" +
                      std::to_string(sample.spans[i - 1].char_start) + "," +
                      std::to_string(sample.spans[i - 1].char_end) + ") and (" +
                      std::to_string(sample.spans[i].char_start) + "," +
                      std::to_string(sample.spans[i].char_end) + ") overlap");
  }
}

inline std::string sequential_sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%06zu", index);
  return buf;
}

}  // namespace detail

// Parse one JSONL corpus line into a sample (without an id).
inline AnnotatedSample parse_sample_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_line, "line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("source_text") || !j.contains("privacy_mask") ||
      !j["source_text"].is_string() || !j["privacy_mask"].is_array())
    throw Error(Errc::malformed_line,
                "line " + std::to_string(line_no) +
                    ": expected object with source_text and privacy_mask");
  AnnotatedSample sample;
  sample.text = j["source_text"].get<std::string>();
  for (const auto& m : j["privacy_mask"]) {
    if (!m.is_object() || !m.contains("label") || !m.contains("start") || !m.contains("end") ||
        !m.contains("value"))
      throw Error(Errc::malformed_line,
                  "line " + std::to_string(line_no) + ": bad privacy_mask entry");
    EntitySpan sp;
    sp.entity_type = m["label"].get<std::string>();
    sp.char_start = m["start"].get<std::size_t>();
    sp.char_end = m["end"].get<std::size_t>();
    sp.value = m["value"].get<std::string>();
    sample.spans.push_back(std::move(sp));
  }
  return sample;
}

// Read a JSONL corpus from a stream. Blank lines and leading '#' header lines
// are skipped; everything else must parse.
inline std::vector<AnnotatedSample> ingest_stream(std::istream& in) {
  std::vector<AnnotatedSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("# ", 0) == 0) continue;
    AnnotatedSample sample = parse_sample_line(line, line_no);
    sample.sample_id = detail::sequential_sample_id(samples.size());
    detail::validate_spans(sample);
    samples.push_back(std::move(sample));
  }
  return samples;
}

inline std::vector<AnnotatedSample> ingest_string(const std::string& content) {
  std::istringstream in(content);
  return ingest_stream(in);
}

// ---------------------------------------------------------------------------
// partitioning and pools

inline void assign_partition(std::vector<AnnotatedSample>& samples, const SplitAssignment& split) {
  if (samples.empty()) throw Error(Errc::empty_corpus, "no samples to partition");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(split.seed, "partition"));
  rng.shuffle(order);
  const auto n = static_cast<double>(samples.size());
  const auto n_train =
      static_cast<std::size_t>(std::ceil((1.0 - split.holdout_fraction) * n));
  for (std::size_t rank = 0; rank < order.size(); ++rank)
    samples[order[rank]].partition =
        rank < n_train ? Partition::train_set : Partition::holdout_set;
}

// The exact byte content emit_training_corpus writes (headers excluded):
// train-set sample texts in sample_id order, one per line, LF-terminated.
inline std::string training_corpus_content(const std::vector<AnnotatedSample>& samples) {
  std::vector<const AnnotatedSample*> train;
  for (const AnnotatedSample& s : samples)
    if (s.partition == Partition::train_set) train.push_back(&s);
  std::sort(train.begin(), train.end(),
            [](const AnnotatedSample* a, const AnnotatedSample* b) {
              return a->sample_id < b->sample_id;
            });
  std::string out;
  for (const AnnotatedSample* s : train) {
    out += s->text;
    out += '\n';
  }
  return out;
}

// trained = values seen in any train-set span of the type (values seen in
// both partitions included); untrained = values seen only in holdout spans.
// An untrained value that still occurs as a raw substring of the training
// corpus is dropped from the pool: the membership label of a record built
// from it would be ambiguous, and the corpus-disjointness invariant must hold
// by construction.
inline std::map<std::string, CandidatePool> build_pools(
    const std::vector<AnnotatedSample>& samples) {
  std::map<std::string, CandidatePool> pools;
  std::map<std::string, std::set<std::string>> holdout_only;
  const std::string corpus = training_corpus_content(samples);
  for (const AnnotatedSample& s : samples) {
    for (const EntitySpan& sp : s.spans) {
      CandidatePool& pool = pools[sp.entity_type];
      pool.entity_type = sp.entity_type;
      pool.value_counts[sp.value] += 1;
      if (s.partition == Partition::train_set)
        pool.trained_values.insert(sp.value);
      else
        holdout_only[sp.entity_type].insert(sp.value);
    }
  }
  for (auto& [type, pool] : pools) {
    for (const std::string& v : holdout_only[type]) {
      if (pool.trained_values.count(v)) continue;
      if (corpus.find(v) != std::string::npos) continue;
      pool.untrained_values.insert(v);
    }
  }
  return pools;
}

// ---------------------------------------------------------------------------
// benchmark construction

struct BuildSkip {
  std::string template_id;
  Subset subset = Subset::trained;
  std::string entity_type;
  std::string reason;
};

struct BuildResult {
  std::vector<BenchmarkRecord> records;
  std::vector<BuildSkip> skips;
};

namespace detail {

// Replacement values must come from the subset pool, differ from the true
// value, and must not recreate a sentence that is itself in the training
// corpus (the non-member label has to be true by construction).
inline std::vector<std::string> eligible_replacements(
    const std::set<std::string>& pool_values, const std::string& true_value,
    const AnnotatedSample& sample, const EntitySpan& span,
    const std::unordered_set<std::string>& train_texts) {
  std::vector<std::string> out;
  for (const std::string& v : pool_values) {
    if (v == true_value) continue;
    if (train_texts.count(splice_chars(sample.text, span.char_start, span.char_end, v))) continue;
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline BuildResult build_benchmark(const std::vector<AnnotatedSample>& samples,
                                   const std::map<std::string, CandidatePool>& pools,
                                   std::uint64_t seed,
                                   const std::vector<Subset>& subsets = {kAllSubsets.begin(),
                                                                         kAllSubsets.end()}) {
  BuildResult result;
  std::unordered_set<std::string> train_texts;
  std::vector<const AnnotatedSample*> train;
  for (const AnnotatedSample& s : samples) {
    if (s.partition == Partition::train_set) {
      train.push_back(&s);
      train_texts.insert(s.text);
    }
  }
  std::sort(train.begin(), train.end(), [](const AnnotatedSample* a, const AnnotatedSample* b) {
    return a->sample_id < b->sample_id;
  });

  for (const AnnotatedSample* sample : train) {
    for (std::size_t slot = 0; slot < sample->spans.size(); ++slot) {
      const EntitySpan& span = sample->spans[slot];
      const std::string template_id = sample->sample_id + ":" + std::to_string(slot);
      auto pool_it = pools.find(span.entity_type);
      for (Subset subset : subsets) {
        const std::string subset_name = to_string(subset);
        if (pool_it == pools.end()) {
          result.skips.push_back({template_id, subset, span.entity_type, "no pool for type"});
          continue;
        }
        const CandidatePool& pool = pool_it->second;
        Rng rng(mix_seed(seed, template_id + "\x1f" + subset_name));

        std::vector<std::string> eligible;
        if (subset == Subset::trained) {
          eligible = detail::eligible_replacements(pool.trained_values, span.value, *sample, span,
                                                   train_texts);
        } else if (subset == Subset::untrained) {
          eligible = detail::eligible_replacements(pool.untrained_values, span.value, *sample,
                                                   span, train_texts);
        } else {
          auto trained = detail::eligible_replacements(pool.trained_values, span.value, *sample,
                                                       span, train_texts);
          auto untrained = detail::eligible_replacements(pool.untrained_values, span.value,
                                                         *sample, span, train_texts);
          bool pick_trained = rng.coin();
          if (pick_trained && trained.empty()) pick_trained = false;
          if (!pick_trained && untrained.empty()) pick_trained = true;
          eligible = pick_trained ? std::move(trained) : std::move(untrained);
        }
        if (eligible.empty()) {
          result.skips.push_back(
              {template_id, subset, span.entity_type, "no eligible replacement value"});
          continue;
        }
        const std::string& replacement = eligible[rng.bounded(eligible.size())];

        BenchmarkRecord member;
        member.record_id = template_id + ":" + subset_name + ":member";
        member.template_id = template_id;
        member.subset = subset;
        member.entity_type = span.entity_type;
        member.text = sample->text;
        member.candidate_value = span.value;
        member.candidate_char_start = span.char_start;
        member.candidate_char_end = span.char_end;
        member.label = Label::member;
        member.n_entities = sample->spans.size();

        BenchmarkRecord nonmember = member;
        nonmember.record_id = template_id + ":" + subset_name + ":nonmember";
        nonmember.text = splice_chars(sample->text, span.char_start, span.char_end, replacement);
        nonmember.candidate_value = replacement;
        nonmember.candidate_char_end = span.char_start + char_length(replacement);
        nonmember.label = Label::nonmember;

        result.records.push_back(std::move(member));
        result.records.push_back(std::move(nonmember));
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// validation

struct CheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::vector<std::string> examples;  // first few failing ids / values

  bool pass() const { return failed == 0; }
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const CheckResult& c : checks)
      if (!c.pass()) return false;
    return true;
  }
};

namespace detail {

inline void note_failure(CheckResult& check, const std::string& what) {
  ++check.failed;
  if (check.examples.size() < 5) check.examples.push_back(what);
}

}  // namespace detail

// `corpus_content` is the emitted training corpus without header lines.
inline ValidationReport validate_benchmark(const std::vector<BenchmarkRecord>& records,
                                           const std::string& corpus_content,
                                           const std::map<std::string, CandidatePool>& pools) {
  ValidationReport report;

  std::unordered_set<std::string> corpus_lines;
  {
    std::istringstream in(corpus_content);
    std::string line;
    while (std::getline(in, line)) corpus_lines.insert(line);
  }

  CheckResult offsets{.name = "candidate_offsets"};
  for (const BenchmarkRecord& r : records) {
    ++offsets.checked;
    const std::size_t text_chars = char_length(r.text);
    if (r.candidate_char_start >= r.candidate_char_end || r.candidate_char_end > text_chars ||
        char_slice(r.text, r.candidate_char_start, r.candidate_char_end) != r.candidate_value)
      detail::note_failure(offsets, r.record_id);
  }
  report.checks.push_back(std::move(offsets));

  CheckResult ids{.name = "record_id_unique"};
  {
    std::unordered_set<std::string> seen;
    for (const BenchmarkRecord& r : records) {
      ++ids.checked;
      if (!seen.insert(r.record_id).second) detail::note_failure(ids, r.record_id);
    }
  }
  report.checks.push_back(std::move(ids));

  CheckResult pairing{.name = "member_nonmember_pairing"};
  {
    std::map<std::pair<std::string, Subset>, std::pair<std::vector<const BenchmarkRecord*>,
                                                       std::vector<const BenchmarkRecord*>>>
        by_template;
    for (const BenchmarkRecord& r : records) {
      auto& bucket = by_template[{r.template_id, r.subset}];
      (r.label == Label::member ? bucket.first : bucket.second).push_back(&r);
    }
    for (const auto& [key, bucket] : by_template) {
      ++pairing.checked;
      const auto& [members, nonmembers] = bucket;
      if (members.size() != 1 || nonmembers.size() != 1) {
        detail::note_failure(pairing, key.first + ":" + to_string(key.second));
        continue;
      }
      // The two texts must differ only on the candidate span.
      const BenchmarkRecord& m = *members[0];
      const BenchmarkRecord& n = *nonmembers[0];
      if (splice_chars(m.text, m.candidate_char_start, m.candidate_char_end,
                       n.candidate_value) != n.text ||
          splice_chars(n.text, n.candidate_char_start, n.candidate_char_end,
                       m.candidate_value) != m.text)
        detail::note_failure(pairing, key.first + ":" + to_string(key.second));
    }
  }
  report.checks.push_back(std::move(pairing));

  CheckResult labels{.name = "label_matches_corpus"};
  for (const BenchmarkRecord& r : records) {
    ++labels.checked;
    const bool in_corpus = corpus_lines.count(r.text) > 0;
    if (in_corpus != (r.label == Label::member)) detail::note_failure(labels, r.record_id);
  }
  report.checks.push_back(std::move(labels));

  CheckResult sources{.name = "nonmember_value_source"};
  for (const BenchmarkRecord& r : records) {
    if (r.label != Label::nonmember) continue;
    ++sources.checked;
    auto it = pools.find(r.entity_type);
    if (it == pools.end()) {
      detail::note_failure(sources, r.record_id);
      continue;
    }
    const bool in_trained = it->second.trained_values.count(r.candidate_value) > 0;
    const bool in_untrained = it->second.untrained_values.count(r.candidate_value) > 0;
    const bool ok = r.subset == Subset::trained    ? in_trained
                    : r.subset == Subset::untrained ? in_untrained
                                                    : (in_trained || in_untrained);
    if (!ok) detail::note_failure(sources, r.record_id);
  }
  report.checks.push_back(std::move(sources));

  CheckResult disjoint{.name = "untrained_corpus_disjoint"};
  for (const auto& [type, pool] : pools) {
    for (const std::string& v : pool.untrained_values) {
      ++disjoint.checked;
      if (corpus_content.find(v) != std::string::npos)
        detail::note_failure(disjoint, type + ":" + v);
    }
  }
  report.checks.push_back(std::move(disjoint));

  CheckResult counts{.name = "per_subset_counts"};
  {
    std::map<Subset, std::pair<std::size_t, std::size_t>> per_subset;
    for (const BenchmarkRecord& r : records) {
      auto& [m, n] = per_subset[r.subset];
      (r.label == Label::member ? m : n) += 1;
    }
    for (const auto& [subset, mn] : per_subset) {
      ++counts.checked;
      if (mn.first != mn.second)
        detail::note_failure(counts, std::string(to_string(subset)) + ": " +
                                         std::to_string(mn.first) + " members vs " +
                                         std::to_string(mn.second) + " nonmembers");
    }
  }
  report.checks.push_back(std::move(counts));

  return report;
}

}  // namespace elmia
