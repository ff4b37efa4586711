#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elmia/attacks.hpp"
#include "elmia/corpus.hpp"
#include "elmia/error.hpp"

// On-disk formats. Every emitted file starts with "# key: value" header
// lines (config_hash first); readers skip that leading block. Data files
// carry no timestamps so reruns are byte-identical.

namespace elmia {

struct FileHeader {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries.emplace_back(key, value);
  }
  std::string get(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return {};
  }
  std::string render() const {
    std::string out;
    for (const auto& [k, v] : entries) out += "# " + k + ": " + v + "\n";
    return out;
  }
};

namespace detail {

inline bool is_header_line(const std::string& line) { return line.rfind("# ", 0) == 0; }

}  // namespace detail

// Split file content into the leading header block and the data lines.
inline std::pair<FileHeader, std::vector<std::string>> read_lines(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  FileHeader header;
  std::vector<std::string> lines;
  std::string line;
  bool in_header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_header && detail::is_header_line(line)) {
      auto colon = line.find(": ", 2);
      if (colon != std::string::npos)
        header.entries.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    in_header = false;
    lines.push_back(line);
  }
  return {std::move(header), std::move(lines)};
}

inline void write_file(const std::filesystem::path& path, const FileHeader& header,
                       const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << header.render() << body;
}

// Shortest-round-trip decimal form, stable across runs.
inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return nlohmann::json(v).dump();
}

// ---------------------------------------------------------------------------
// benchmark records

inline nlohmann::json record_to_json(const BenchmarkRecord& r) {
  return nlohmann::json{{"record_id", r.record_id},
                        {"template_id", r.template_id},
                        {"subset", to_string(r.subset)},
                        {"entity_type", r.entity_type},
                        {"text", r.text},
                        {"candidate_value", r.candidate_value},
                        {"candidate_char_start", r.candidate_char_start},
                        {"candidate_char_end", r.candidate_char_end},
                        {"label", to_string(r.label)},
                        {"n_entities", r.n_entities}};
}

inline BenchmarkRecord record_from_json(const nlohmann::json& j) {
  BenchmarkRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.template_id = j.at("template_id").get<std::string>();
  r.subset = subset_from_string(j.at("subset").get<std::string>());
  r.entity_type = j.at("entity_type").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.candidate_value = j.at("candidate_value").get<std::string>();
  r.candidate_char_start = j.at("candidate_char_start").get<std::size_t>();
  r.candidate_char_end = j.at("candidate_char_end").get<std::size_t>();
  r.label = label_from_string(j.at("label").get<std::string>());
  r.n_entities = j.at("n_entities").get<std::size_t>();
  return r;
}

inline void write_benchmark(const std::filesystem::path& path,
                            const std::vector<BenchmarkRecord>& records,
                            const FileHeader& header) {
  std::string body;
  for (const BenchmarkRecord& r : records) body += record_to_json(r).dump() + "\n";
  write_file(path, header, body);
}

inline std::pair<FileHeader, std::vector<BenchmarkRecord>> read_benchmark(
    const std::filesystem::path& path) {
  auto [header, lines] = read_lines(path);
  std::vector<BenchmarkRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(lines[i])));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_line,
                  path.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return {std::move(header), std::move(records)};
}

// ---------------------------------------------------------------------------
// candidate pools

inline void write_pools(const std::filesystem::path& path,
                        const std::map<std::string, CandidatePool>& pools,
                        const FileHeader& header) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [type, pool] : pools) {
    j[type] = nlohmann::json{{"trained", pool.trained_values},
                             {"untrained", pool.untrained_values},
                             {"counts", pool.value_counts}};
  }
  write_file(path, header, j.dump(2) + "\n");
}

inline std::pair<FileHeader, std::map<std::string, CandidatePool>> read_pools(
    const std::filesystem::path& path) {
  auto [header, lines] = read_lines(path);
  std::string body;
  for (const std::string& l : lines) body += l + "\n";
  std::map<std::string, CandidatePool> pools;
  try {
    nlohmann::json j = nlohmann::json::parse(body);
    for (const auto& [type, p] : j.items()) {
      CandidatePool pool;
      pool.entity_type = type;
      pool.trained_values = p.at("trained").get<std::set<std::string>>();
      pool.untrained_values = p.at("untrained").get<std::set<std::string>>();
      pool.value_counts = p.at("counts").get<std::map<std::string, std::size_t>>();
      pools.emplace(type, std::move(pool));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_line, path.string() + ": " + e.what());
  }
  return {std::move(header), std::move(pools)};
}

// ---------------------------------------------------------------------------
// attack scores and skip log

inline void write_scores(const std::filesystem::path& path,
                         const std::vector<AttackScore>& scores, const FileHeader& header) {
  std::string body;
  for (const AttackScore& s : scores) {
    nlohmann::json j{{"record_id", s.record_id},
                     {"method", to_string(s.method)},
                     {"score", s.score},
                     {"model_id", s.model_id}};
    body += j.dump() + "\n";
  }
  write_file(path, header, body);
}

inline std::pair<FileHeader, std::vector<AttackScore>> read_scores(
    const std::filesystem::path& path) {
  auto [header, lines] = read_lines(path);
  std::vector<AttackScore> scores;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(lines[i]);
      scores.push_back({j.at("record_id").get<std::string>(),
                        method_from_string(j.at("method").get<std::string>()),
                        j.at("score").get<double>(), j.at("model_id").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::malformed_line,
                  path.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return {std::move(header), std::move(scores)};
}

inline void write_skips(const std::filesystem::path& path, const std::vector<SkipEntry>& skips,
                        const FileHeader& header) {
  std::string body;
  for (const SkipEntry& s : skips) {
    nlohmann::json j{
        {"record_id", s.record_id}, {"method", to_string(s.method)}, {"error", s.error}};
    body += j.dump() + "\n";
  }
  write_file(path, header, body);
}

// ---------------------------------------------------------------------------
// validation report

inline void write_validation(const std::filesystem::path& path, const ValidationReport& report,
                             const FileHeader& header) {
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckResult& c : report.checks) {
    checks.push_back(nlohmann::json{{"name", c.name},
                                    {"pass", c.pass()},
                                    {"checked", c.checked},
                                    {"failed", c.failed},
                                    {"examples", c.examples}});
  }
  nlohmann::json j{{"all_pass", report.all_pass()}, {"checks", checks}};
  write_file(path, header, j.dump(2) + "\n");
}

}  // namespace elmia
