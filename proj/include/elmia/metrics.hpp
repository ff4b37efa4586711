#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "elmia/attacks.hpp"
#include "elmia/corpus.hpp"
#include "elmia/error.hpp"

// Attack evaluation: AUC via the Mann-Whitney statistic, TPR at a fixed FPR
// budget with empirical thresholds, and per-type vs. global aggregation.

namespace elmia {

// Probability that a random member outscores a random non-member, ties worth
// half. Computed from average ranks, so it is O(n log n); the test suite
// checks it against the O(m*n) pairwise definition.
inline double auc(std::span<const double> member_scores,
                  std::span<const double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty())
    throw Error(Errc::empty_group, "auc needs scores for both labels");
  struct Item {
    double score;
    bool member;
  };
  std::vector<Item> items;
  items.reserve(member_scores.size() + nonmember_scores.size());
  for (double s : member_scores) items.push_back({s, true});
  for (double s : nonmember_scores) items.push_back({s, false});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  double member_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    // 1-based average rank of the tie group [i, j)
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (items[k].member) member_rank_sum += avg_rank;
    i = j;
  }
  const auto m = static_cast<double>(member_scores.size());
  const auto n = static_cast<double>(nonmember_scores.size());
  const double u = member_rank_sum - m * (m + 1.0) / 2.0;
  return u / (m * n);
}

struct TprResult {
  double tpr = 0.0;
  double threshold = std::numeric_limits<double>::infinity();
};

// Decision rule "score >= t => member". The threshold is the smallest
// observed score whose false-positive rate stays within the budget; when
// even the largest observed score exceeds it the +inf sentinel is returned
// and no score classifies as member.
inline TprResult tpr_at_fpr(std::span<const double> member_scores,
                            std::span<const double> nonmember_scores, double fpr_target) {
  if (member_scores.empty() || nonmember_scores.empty())
    throw Error(Errc::empty_group, "tpr_at_fpr needs scores for both labels");
  if (!(fpr_target > 0.0 && fpr_target < 1.0))
    throw Error(Errc::bad_config, "fpr_target must be in (0,1)");

  std::vector<double> nm(nonmember_scores.begin(), nonmember_scores.end());
  std::sort(nm.begin(), nm.end());
  const auto n_nm = static_cast<double>(nm.size());
  auto fpr_at = [&](double t) {
    const auto first_ge = std::lower_bound(nm.begin(), nm.end(), t);
    return static_cast<double>(nm.end() - first_ge) / n_nm;
  };

  std::set<double> candidates(member_scores.begin(), member_scores.end());
  candidates.insert(nm.begin(), nm.end());

  TprResult result;
  for (double t : candidates) {  // ascending; first admissible one is smallest
    if (fpr_at(t) <= fpr_target) {
      result.threshold = t;
      break;
    }
  }
  std::size_t hits = 0;
  for (double s : member_scores)
    if (s >= result.threshold) ++hits;
  result.tpr = static_cast<double>(hits) / static_cast<double>(member_scores.size());
  return result;
}

enum class Thresholding { per_type, global };

inline const char* to_string(Thresholding t) {
  return t == Thresholding::per_type ? "per_type" : "global";
}

inline Thresholding thresholding_from_string(const std::string& s) {
  if (s == "per_type") return Thresholding::per_type;
  if (s == "global") return Thresholding::global;
  throw Error(Errc::bad_config, "unknown thresholding '" + s + "'");
}

struct GroupEval {
  MethodId method = MethodId::lowest_loss;
  std::string group;  // entity type, or "GLOBAL"
  double auc = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
  std::size_t n_member = 0;
  std::size_t n_nonmember = 0;

  std::size_t n() const { return n_member + n_nonmember; }
};

struct MethodAggregate {
  MethodId method = MethodId::lowest_loss;
  double auc = 0.0;
  double tpr = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  Thresholding thresholding = Thresholding::per_type;
  double fpr_target = 0.05;
  std::vector<GroupEval> groups;
  std::vector<MethodAggregate> aggregates;  // record-count-weighted averages
  std::vector<std::string> notes;

  const GroupEval* find(MethodId m, const std::string& group) const {
    for (const GroupEval& g : groups)
      if (g.method == m && g.group == group) return &g;
    return nullptr;
  }
  const MethodAggregate* aggregate(MethodId m) const {
    for (const MethodAggregate& a : aggregates)
      if (a.method == m) return &a;
    return nullptr;
  }
};

inline EvalReport evaluate(const std::vector<AttackScore>& scores,
                           const std::vector<BenchmarkRecord>& records, Thresholding mode,
                           double fpr_target = 0.05) {
  std::map<std::string, const BenchmarkRecord*> by_id;
  for (const BenchmarkRecord& r : records) by_id[r.record_id] = &r;

  // (method, group) -> scores split by label
  std::map<std::pair<MethodId, std::string>, std::pair<std::vector<double>, std::vector<double>>>
      buckets;
  EvalReport report;
  report.thresholding = mode;
  report.fpr_target = fpr_target;
  for (const AttackScore& s : scores) {
    auto it = by_id.find(s.record_id);
    if (it == by_id.end())
      throw Error(Errc::no_scorable_groups, "score references unknown record " + s.record_id);
    const BenchmarkRecord& r = *it->second;
    const std::string group = mode == Thresholding::per_type ? r.entity_type : "GLOBAL";
    auto& bucket = buckets[{s.method, group}];
    (r.label == Label::member ? bucket.first : bucket.second).push_back(s.score);
  }

  for (const auto& [key, bucket] : buckets) {
    const auto& [members, nonmembers] = bucket;
    if (members.empty() || nonmembers.empty()) {
      report.notes.push_back(std::string(to_string(key.first)) + "/" + key.second +
                             ": skipped (one label missing)");
      continue;
    }
    GroupEval g;
    g.method = key.first;
    g.group = key.second;
    g.auc = auc(members, nonmembers);
    TprResult t = tpr_at_fpr(members, nonmembers, fpr_target);
    g.tpr = t.tpr;
    g.threshold = t.threshold;
    g.n_member = members.size();
    g.n_nonmember = nonmembers.size();
    report.groups.push_back(std::move(g));
  }
  if (report.groups.empty())
    throw Error(Errc::no_scorable_groups, "no group has scores for both labels");

  std::map<MethodId, MethodAggregate> agg;
  for (const GroupEval& g : report.groups) {
    MethodAggregate& a = agg[g.method];
    a.method = g.method;
    const auto w = static_cast<double>(g.n());
    a.auc += w * g.auc;
    a.tpr += w * g.tpr;
    a.n += g.n();
  }
  for (auto& [m, a] : agg) {
    a.auc /= static_cast<double>(a.n);
    a.tpr /= static_cast<double>(a.n);
    report.aggregates.push_back(a);
  }
  return report;
}

}  // namespace elmia
