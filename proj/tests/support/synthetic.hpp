#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elmia/rng.hpp"
#include "elmia/unicode.hpp"

// Synthetic annotated-corpus generator for tests: sentence forms with PII
// slots, filled from per-type value tables with a skewed usage distribution
// (a few popular values, a long tail of rare ones). Rare values that land
// only in holdout samples become the untrained pools.

namespace elmia::testsupport {

struct ValueTable {
  std::string type;
  std::vector<std::string> values;  // first `popular` entries get extra weight
  std::size_t popular = 8;
};

inline std::vector<ValueTable> value_tables() {
  auto expand = [](std::vector<std::string> head, const std::vector<std::string>& stems,
                   const std::vector<std::string>& tails, const std::string& sep = "") {
    for (const std::string& s : stems)
      for (const std::string& t : tails) head.push_back(s + sep + t);
    return head;
  };

  std::vector<ValueTable> tables;
  {
    std::vector<std::string> v = expand(
        {"Alice", "Bob", "Carla", "David", "Emma", "Farid", "Grace", "Hugo"},
        {"Mar", "Jul", "Ron", "Tam", "Vik", "Sel"}, {"a", "o", "ek", "ia"});
    // A few non-ASCII names keep character-vs-byte indexing honest end to end.
    v.insert(v.end(), {"Zoë", "José", "Åsa", "Núria", "Søren", "Çetin", "Łucja", "Véra"});
    tables.push_back({"FIRSTNAME", std::move(v)});
  }
  tables.push_back({"LASTNAME",
                    expand({"Smith", "Garcia", "Okafor", "Lindqvist", "Brown", "Costa",
                            "Nakamura", "Weber"},
                           {"Hol", "Ber", "Kra", "Sol", "Vin", "Nor", "Fal", "Gre"},
                           {"mann", "berg", "ski", "sen"})});
  tables.push_back({"CITY",
                    expand({"Lisbon", "Toronto", "Osaka", "Nairobi", "Prague", "Boston",
                            "Lyon", "Perth"},
                           {"North", "East", "West", "South", "New", "Old", "Port", "Lake"},
                           {"field", "haven", "bridge", "ford"})});
  tables.push_back({"EMPLOYER",
                    expand({"Acme Corp", "Globex", "Initech", "Umbrella Group", "Hooli",
                            "Vandelay Industries", "Stark Labs", "Wayne Holdings"},
                           {"Orion", "Vertex", "Quantum", "Apex", "Nimbus", "Zenith", "Atlas",
                            "Pioneer"},
                           {"Systems", "Partners", "Logistics", "Analytics"}, " ")});
  {
    std::vector<std::string> v;
    for (int i = 0; i < 8; ++i) v.push_back("555-010" + std::to_string(i));
    for (int i = 0; i < 32; ++i) v.push_back("555-02" + std::to_string(10 + i));
    tables.push_back({"PHONE", std::move(v)});
  }
  {
    std::vector<std::string> v;
    for (int i = 0; i < 8; ++i) v.push_back("user" + std::to_string(i) + "@mail.com");
    for (int i = 0; i < 32; ++i)
      v.push_back("p" + std::to_string(10 + i) + "@orion" + std::to_string(i % 4) + ".net");
    tables.push_back({"EMAIL", std::move(v)});
  }
  {
    std::vector<std::string> v;
    for (int i = 0; i < 8; ++i) v.push_back("2019-0" + std::to_string(i + 1) + "-15");
    for (int i = 0; i < 32; ++i)
      v.push_back("2021-" + std::string(i % 12 < 9 ? "0" : "") + std::to_string(i % 12 + 1) +
                  "-" + std::to_string(10 + i % 18));
    tables.push_back({"DATE", std::move(v)});
  }
  {
    std::vector<std::string> v = {"100", "250", "500", "750", "1200", "2500", "80", "60"};
    for (int i = 0; i < 32; ++i) v.push_back(std::to_string(131 + 17 * i));
    tables.push_back({"AMOUNT", std::move(v)});
  }
  tables.push_back({"JOBTITLE",
                    expand({"engineer", "nurse", "teacher", "analyst", "clerk", "driver",
                            "auditor", "barista"},
                           {"junior", "senior", "chief", "deputy", "field", "night", "staff",
                            "shift"},
                           {"planner", "surveyor", "archivist", "translator"}, " ")});
  tables.push_back({"CURRENCYCODE",
                    {"USD", "EUR", "GBP", "JPY", "CHF", "CAD", "AUD", "SEK",  // popular
                     "NOK", "DKK", "PLN", "CZK", "HUF", "RON", "BGN", "HRK", "TRY", "ILS",
                     "ZAR", "MXN", "BRL", "CLP", "COP", "PEN", "INR", "IDR", "MYR", "PHP",
                     "SGD", "THB", "VND", "KRW", "TWD", "HKD", "NZD", "ISK", "AED", "SAR",
                     "QAR", "KWD"}});
  return tables;
}

struct Form {
  std::string pattern;  // tokens separated by spaces; "{TYPE}" marks a slot
  std::size_t weight;
};

inline std::vector<Form> sentence_forms() {
  return {
      {"{FIRSTNAME} lives in {CITY} .", 20},
      {"on {DATE} , {FIRSTNAME} {LASTNAME} wired {AMOUNT} {CURRENCYCODE} to {EMPLOYER} .", 12},
      {"on {DATE} , {FIRSTNAME} {LASTNAME} relocated from {CITY} to the {EMPLOYER} branch "
       "office .",
       10},
      {"the clerk noted that {FIRSTNAME} works as a {JOBTITLE} near {CITY} .", 9},
      {"the clerk noted that {FIRSTNAME} can be reached at {EMAIL} or {PHONE} .", 8},
      {"support agent {FIRSTNAME} logged a callback for {PHONE} regarding invoice {AMOUNT} .",
       7},
      {"{FIRSTNAME} {LASTNAME} paid {AMOUNT} {CURRENCYCODE} for parking in {CITY} .", 6},
      {"please forward the signed contract to {EMAIL} before {DATE} .", 6},
      {"the archived memo references {EMPLOYER} .", 6},
      {"{JOBTITLE} {FIRSTNAME} {LASTNAME} of {EMPLOYER} confirmed the meeting in {CITY} on "
       "{DATE} .",
       5},
      {"new hire {FIRSTNAME} {LASTNAME} starts as {JOBTITLE} on {DATE} .", 5},
      {"the ticket filed by {FIRSTNAME} references a card payment of {AMOUNT} {CURRENCYCODE} .",
       4},
      {"according to the quarterly filing dated {DATE} , the account held by {FIRSTNAME} "
       "{LASTNAME} at {EMPLOYER} was charged {AMOUNT} {CURRENCYCODE} for advisory services in "
       "{CITY} .",
       4},
  };
}

// One JSONL line per sample: {"source_text": ..., "privacy_mask": [...]}.
inline std::string generate_corpus_jsonl(std::size_t n_samples, std::uint64_t seed) {
  const std::vector<ValueTable> tables = value_tables();
  const std::vector<Form> forms = sentence_forms();

  auto table_for = [&](const std::string& type) -> const ValueTable& {
    for (const ValueTable& t : tables)
      if (t.type == type) return t;
    throw std::runtime_error("no value table for " + type);
  };

  Rng rng(mix_seed(seed, "synthetic-corpus"));
  auto weighted_form = [&]() -> const Form& {
    std::size_t total = 0;
    for (const Form& f : forms) total += f.weight;
    std::size_t pick = rng.bounded(total);
    for (const Form& f : forms) {
      if (pick < f.weight) return f;
      pick -= f.weight;
    }
    return forms.back();
  };
  auto weighted_value = [&](const ValueTable& t) -> const std::string& {
    const std::size_t popular_weight = 8;
    const std::size_t total =
        t.popular * popular_weight + (t.values.size() - t.popular);
    std::size_t pick = rng.bounded(total);
    if (pick < t.popular * popular_weight) return t.values[pick / popular_weight];
    return t.values[t.popular + (pick - t.popular * popular_weight)];
  };

  std::string out;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Form& form = weighted_form();
    std::string text;
    nlohmann::json mask = nlohmann::json::array();
    std::size_t char_cursor = 0;
    std::stringstream ss(form.pattern);
    std::string word;
    bool first = true;
    while (ss >> word) {
      if (!first) {
        text += ' ';
        ++char_cursor;
      }
      first = false;
      if (word.size() > 2 && word.front() == '{' && word.back() == '}') {
        const std::string type = word.substr(1, word.size() - 2);
        const std::string& value = weighted_value(table_for(type));
        const std::size_t len = char_length(value);
        mask.push_back({{"label", type},
                        {"start", char_cursor},
                        {"end", char_cursor + len},
                        {"value", value}});
        text += value;
        char_cursor += len;
      } else {
        text += word;
        char_cursor += char_length(word);
      }
    }
    out += nlohmann::json{{"source_text", text}, {"privacy_mask", mask}}.dump() + "\n";
  }
  return out;
}

}  // namespace elmia::testsupport
