#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elmia/align.hpp"
#include "elmia/attacks.hpp"
#include "elmia/corpus.hpp"
#include "elmia/error.hpp"
#include "elmia/metrics.hpp"
#include "elmia/refmodel.hpp"
#include "elmia/stats.hpp"

// Analytical lenses over attack results: token-length correlations with
// attack success, TPR by entity count, and per-type vulnerability regression
// against pool size.

namespace elmia {

struct LengthProfile {
  std::string record_id;
  std::size_t prefix_tokens = 0;
  std::size_t context_tokens = 0;  // prefix + candidate + suffix
  std::size_t candidate_tokens = 0;
};

// Token counts from the built-in tokenizer; matches the reference provider's
// segmentation exactly.
inline LengthProfile length_profile(const BenchmarkRecord& record) {
  ScoredText st;
  st.text = record.text;
  for (const LmToken& t : lm_tokenize(record.text))
    st.tokens.push_back({t.text, t.char_start, t.char_end, std::nullopt});
  TokenSpan span =
      token_span(st, record.candidate_char_start, record.candidate_char_end);
  LengthProfile p;
  p.record_id = record.record_id;
  p.prefix_tokens = span.start_idx;
  p.candidate_tokens = span.size();
  p.context_tokens = st.tokens.size();
  return p;
}

struct CorrelationResult {
  std::string variable;
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

struct LengthCorrelations {
  std::vector<CorrelationResult> per_record;  // point-biserial, member records
  std::vector<CorrelationResult> per_type;    // per-type TPR vs median lengths
  std::vector<std::string> notes;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct MethodScores {
  // entity type -> (member scores with record ids, nonmember scores)
  std::map<std::string, std::pair<std::vector<std::pair<std::string, double>>,
                                  std::vector<double>>>
      by_type;
};

inline MethodScores collect_method_scores(const std::vector<AttackScore>& scores,
                                          const std::vector<BenchmarkRecord>& records,
                                          MethodId method) {
  std::map<std::string, const BenchmarkRecord*> by_id;
  for (const BenchmarkRecord& r : records) by_id[r.record_id] = &r;
  MethodScores out;
  for (const AttackScore& s : scores) {
    if (s.method != method) continue;
    auto it = by_id.find(s.record_id);
    if (it == by_id.end()) continue;
    const BenchmarkRecord& r = *it->second;
    auto& bucket = out.by_type[r.entity_type];
    if (r.label == Label::member)
      bucket.first.emplace_back(r.record_id, s.score);
    else
      bucket.second.push_back(s.score);
  }
  return out;
}

}  // namespace detail

// Correlation between attack success (member score clears its entity type's
// TPR@FPR threshold) and prefix / context / candidate token counts. Both the
// per-record point-biserial and the per-type aggregate are reported; the
// per-record variant throws DegenerateVariance when the success indicator is
// constant.
inline LengthCorrelations length_correlations(const std::vector<AttackScore>& scores,
                                              const std::vector<BenchmarkRecord>& records,
                                              MethodId method, double fpr_target) {
  detail::MethodScores ms = detail::collect_method_scores(scores, records, method);

  std::map<std::string, const BenchmarkRecord*> by_id;
  for (const BenchmarkRecord& r : records) by_id[r.record_id] = &r;

  LengthCorrelations out;
  std::vector<double> indicator, prefix_len, context_len, candidate_len;
  struct TypeRow {
    double tpr;
    std::vector<double> prefix, context, candidate;
  };
  std::map<std::string, TypeRow> type_rows;

  for (const auto& [type, bucket] : ms.by_type) {
    const auto& [members, nonmembers] = bucket;
    if (members.empty() || nonmembers.empty()) {
      out.notes.push_back(type + ": skipped (one label missing)");
      continue;
    }
    std::vector<double> member_scores;
    member_scores.reserve(members.size());
    for (const auto& [id, score] : members) member_scores.push_back(score);
    TprResult t = tpr_at_fpr(member_scores, nonmembers, fpr_target);
    TypeRow& row = type_rows[type];
    row.tpr = t.tpr;
    for (const auto& [id, score] : members) {
      LengthProfile p = length_profile(*by_id.at(id));
      indicator.push_back(score >= t.threshold ? 1.0 : 0.0);
      prefix_len.push_back(static_cast<double>(p.prefix_tokens));
      context_len.push_back(static_cast<double>(p.context_tokens));
      candidate_len.push_back(static_cast<double>(p.candidate_tokens));
      row.prefix.push_back(static_cast<double>(p.prefix_tokens));
      row.context.push_back(static_cast<double>(p.context_tokens));
      row.candidate.push_back(static_cast<double>(p.candidate_tokens));
    }
  }
  if (indicator.empty())
    throw Error(Errc::no_scorable_groups, "no entity type has scores for both labels");

  bool all_same = std::all_of(indicator.begin(), indicator.end(),
                              [&](double v) { return v == indicator.front(); });
  if (all_same)
    throw Error(Errc::degenerate_variance, "success indicator is constant across records");

  auto add_per_record = [&](const std::string& name, const std::vector<double>& x) {
    try {
      double r = pearson(x, indicator);
      out.per_record.push_back({name, r, p_value(r, indicator.size()), indicator.size()});
    } catch (const Error& e) {
      out.notes.push_back("per_record/" + name + ": " + e.what());
    }
  };
  add_per_record("prefix", prefix_len);
  add_per_record("context", context_len);
  add_per_record("candidate", candidate_len);

  std::vector<double> type_tpr, med_prefix, med_context, med_candidate;
  for (const auto& [type, row] : type_rows) {
    type_tpr.push_back(row.tpr);
    med_prefix.push_back(detail::median(row.prefix));
    med_context.push_back(detail::median(row.context));
    med_candidate.push_back(detail::median(row.candidate));
  }
  auto add_per_type = [&](const std::string& name, const std::vector<double>& x) {
    try {
      double r = pearson(x, type_tpr);
      out.per_type.push_back({name, r, p_value(r, type_tpr.size()), type_tpr.size()});
    } catch (const Error& e) {
      out.notes.push_back("per_type/" + name + ": " + e.what());
    }
  };
  add_per_type("prefix", med_prefix);
  add_per_type("context", med_context);
  add_per_type("candidate", med_candidate);
  return out;
}

struct EntityCountPoint {
  std::size_t n_entities = 0;
  double tpr = 0.0;
  std::size_t n = 0;
};

struct EntityCountResult {
  std::vector<EntityCountPoint> series;  // sorted by n_entities
  std::optional<double> trend_r;
  std::optional<double> trend_p;
  std::vector<std::string> notes;
};

// TPR@FPR within groups of records that share an entity count, with the
// threshold chosen inside each group, plus the linear trend over groups.
inline EntityCountResult entity_count_tpr(const std::vector<AttackScore>& scores,
                                          const std::vector<BenchmarkRecord>& records,
                                          MethodId method, double fpr_target) {
  std::map<std::string, const BenchmarkRecord*> by_id;
  for (const BenchmarkRecord& r : records) by_id[r.record_id] = &r;
  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const AttackScore& s : scores) {
    if (s.method != method) continue;
    auto it = by_id.find(s.record_id);
    if (it == by_id.end()) continue;
    const BenchmarkRecord& r = *it->second;
    auto& bucket = groups[r.n_entities];
    (r.label == Label::member ? bucket.first : bucket.second).push_back(s.score);
  }

  EntityCountResult out;
  for (const auto& [n_entities, bucket] : groups) {
    const auto& [members, nonmembers] = bucket;
    if (members.empty() || nonmembers.empty()) {
      out.notes.push_back("n_entities=" + std::to_string(n_entities) +
                          ": skipped (one label missing)");
      continue;
    }
    TprResult t = tpr_at_fpr(members, nonmembers, fpr_target);
    out.series.push_back({n_entities, t.tpr, members.size() + nonmembers.size()});
  }
  if (out.series.empty())
    throw Error(Errc::no_scorable_groups, "no entity-count group has both labels");

  if (out.series.size() < 3) {
    out.notes.push_back("trend: TooFewPoints (" + std::to_string(out.series.size()) +
                        " groups)");
    return out;
  }
  std::vector<double> x, y;
  for (const EntityCountPoint& p : out.series) {
    x.push_back(static_cast<double>(p.n_entities));
    y.push_back(p.tpr);
  }
  try {
    out.trend_r = pearson(x, y);
    out.trend_p = p_value(*out.trend_r, x.size());
  } catch (const Error& e) {
    out.notes.push_back(std::string("trend: ") + e.what());
  }
  return out;
}

struct RegressionPoint {
  std::string entity_type;
  std::size_t pool_size = 0;
  double auc = 0.0;
};

struct RegressionResult {
  double r = 0.0;
  double p = 1.0;
  double slope = 0.0;
  std::size_t n = 0;
  std::vector<RegressionPoint> points;
};

// Per-type AUC against the number of unique candidate values of that type.
inline RegressionResult type_vulnerability_regression(
    const std::vector<std::pair<std::string, double>>& per_type_auc,
    const std::map<std::string, CandidatePool>& pools) {
  if (per_type_auc.size() < 3)
    throw Error(Errc::too_few_points, "regression needs at least 3 entity types");
  RegressionResult out;
  std::vector<double> x, y;
  for (const auto& [type, auc_value] : per_type_auc) {
    auto it = pools.find(type);
    const std::size_t pool_size =
        it == pools.end() ? 0
                          : it->second.trained_values.size() + it->second.untrained_values.size();
    out.points.push_back({type, pool_size, auc_value});
    x.push_back(static_cast<double>(pool_size));
    y.push_back(auc_value);
  }
  out.r = pearson(x, y);
  out.p = p_value(out.r, x.size());
  out.slope = regression_slope(x, y);
  out.n = x.size();
  return out;
}

}  // namespace elmia
