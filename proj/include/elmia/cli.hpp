#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "elmia/analysis.hpp"
#include "elmia/attacks.hpp"
#include "elmia/cache.hpp"
#include "elmia/corpus.hpp"
#include "elmia/hashing.hpp"
#include "elmia/http_provider.hpp"
#include "elmia/io.hpp"
#include "elmia/metrics.hpp"
#include "elmia/provider.hpp"
#include "elmia/refmodel.hpp"
#include "elmia/stats.hpp"

// Pipeline orchestration behind the el-mia command line: build, train-ref,
// score, eval, analyze, report. Everything here is deterministic given the
// seed; the only timestamp any command emits is the "# generated:" line of
// the report.

namespace elmia::cli {

namespace fs = std::filesystem;

struct RunConfig {
  std::uint64_t seed = 42;
  double holdout_fraction = 0.5;
  std::vector<std::string> subsets = {"trained", "untrained", "mix"};
  // provider
  std::string provider = "reference";  // reference | http
  std::string base_url;
  std::string model_id;
  int max_in_flight = 8;
  int timeout_ms = 30000;
  double logprob_base = std::numbers::e;
  // attacks
  double min_k_fraction = 0.2;
  std::string suffix_window = "all";
  bool suffix_includes_candidate = false;
  std::size_t refset_size = 5;
  std::string llr_variant = "ratio";
  int zlib_level = 6;
  bool recall_invert = false;
  // evaluation
  std::string thresholding = "per_type";
  double fpr_target = 0.05;

  // Canonical form of the run-relevant parameters. Filesystem paths are
  // excluded on purpose: they do not affect any emitted data, and runs into
  // different directories must produce byte-identical files.
  nlohmann::json semantic_json() const {
    return nlohmann::json{{"seed", seed},
                          {"holdout_fraction", holdout_fraction},
                          {"subsets", subsets},
                          {"provider", provider},
                          {"model_id", model_id},
                          {"logprob_base", logprob_base},
                          {"min_k_fraction", min_k_fraction},
                          {"suffix_window", suffix_window},
                          {"suffix_includes_candidate", suffix_includes_candidate},
                          {"refset_size", refset_size},
                          {"llr_variant", llr_variant},
                          {"zlib_level", zlib_level},
                          {"recall_invert", recall_invert},
                          {"thresholding", thresholding},
                          {"fpr_target", fpr_target}};
  }

  std::string config_hash() const { return sha256_hex(semantic_json().dump()).substr(0, 16); }

  void apply_json(const nlohmann::json& j) {
    if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    if (j.contains("holdout_fraction")) holdout_fraction = j["holdout_fraction"].get<double>();
    if (j.contains("subsets")) subsets = j["subsets"].get<std::vector<std::string>>();
    if (j.contains("provider")) provider = j["provider"].get<std::string>();
    if (j.contains("base_url")) base_url = j["base_url"].get<std::string>();
    if (j.contains("model_id")) model_id = j["model_id"].get<std::string>();
    if (j.contains("max_in_flight")) max_in_flight = j["max_in_flight"].get<int>();
    if (j.contains("timeout_ms")) timeout_ms = j["timeout_ms"].get<int>();
    if (j.contains("logprob_base")) logprob_base = j["logprob_base"].get<double>();
    if (j.contains("min_k_fraction")) min_k_fraction = j["min_k_fraction"].get<double>();
    if (j.contains("suffix_window")) suffix_window = j["suffix_window"].get<std::string>();
    if (j.contains("suffix_includes_candidate"))
      suffix_includes_candidate = j["suffix_includes_candidate"].get<bool>();
    if (j.contains("refset_size")) refset_size = j["refset_size"].get<std::size_t>();
    if (j.contains("llr_variant")) llr_variant = j["llr_variant"].get<std::string>();
    if (j.contains("zlib_level")) zlib_level = j["zlib_level"].get<int>();
    if (j.contains("recall_invert")) recall_invert = j["recall_invert"].get<bool>();
    if (j.contains("thresholding")) thresholding = j["thresholding"].get<std::string>();
    if (j.contains("fpr_target")) fpr_target = j["fpr_target"].get<double>();
  }

  AttackConfig attack_config() const {
    AttackConfig c;
    c.min_k_fraction = min_k_fraction;
    c.suffix_window = SuffixWindow::parse(suffix_window);
    c.suffix_includes_candidate = suffix_includes_candidate;
    c.refset_size = refset_size;
    c.llr_variant = llr_variant == "standardized" ? LlrVariant::standardized : LlrVariant::ratio;
    c.zlib_level = zlib_level;
    c.recall_invert = recall_invert;
    return c;
  }
};

namespace detail {

inline FileHeader base_header(const RunConfig& config) {
  FileHeader h;
  h.set("config_hash", config.config_hash());
  return h;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Body of a file with the leading "# " header block removed.
inline std::string read_body(const fs::path& path) {
  auto [header, lines] = read_lines(path);
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

inline std::vector<MethodId> parse_methods(const std::string& arg) {
  if (arg == "all") return {kAllMethods.begin(), kAllMethods.end()};
  std::vector<MethodId> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(method_from_string(item));
  }
  if (out.empty()) throw Error(Errc::bad_config, "no methods requested");
  return out;
}

inline std::string now_rfc3339() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// build

struct BuildArgs {
  std::string input;
  std::string out_dir;
};

inline int cmd_build(const BuildArgs& args, const RunConfig& config) {
  std::vector<AnnotatedSample> samples;
  try {
    std::ifstream in(args.input, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open " + args.input);
    samples = ingest_stream(in);
    assign_partition(samples, {config.seed, config.holdout_fraction});
  } catch (const Error& e) {
    std::cerr << "build: " << e.what() << "\n";
    return 1;
  }

  auto pools = build_pools(samples);
  std::vector<Subset> subsets;
  for (const std::string& s : config.subsets) subsets.push_back(subset_from_string(s));
  BuildResult built = build_benchmark(samples, pools, config.seed, subsets);

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  FileHeader header = detail::base_header(config);
  header.set("seed", std::to_string(config.seed));
  header.set("holdout_fraction", fmt_double(config.holdout_fraction));

  write_benchmark(out_dir / "benchmark.jsonl", built.records, header);
  for (Subset subset : subsets) {
    std::vector<BenchmarkRecord> filtered;
    for (const BenchmarkRecord& r : built.records)
      if (r.subset == subset) filtered.push_back(r);
    write_benchmark(out_dir / ("benchmark_" + std::string(to_string(subset)) + ".jsonl"),
                    filtered, header);
  }

  const std::string corpus = training_corpus_content(samples);
  write_file(out_dir / "train_corpus.txt", header, corpus);
  write_pools(out_dir / "pools.json", pools, header);

  // Non-member sentences for the recall attack: a handful of holdout texts.
  {
    std::vector<const AnnotatedSample*> holdout;
    for (const AnnotatedSample& s : samples)
      if (s.partition == Partition::holdout_set) holdout.push_back(&s);
    std::sort(holdout.begin(), holdout.end(),
              [](const AnnotatedSample* a, const AnnotatedSample* b) {
                return a->sample_id < b->sample_id;
              });
    std::string prefix;
    for (std::size_t i = 0; i < holdout.size() && i < 5; ++i) prefix += holdout[i]->text + "\n";
    write_file(out_dir / "recall_prefix.txt", header, prefix);
  }

  {
    std::string body;
    for (const BuildSkip& s : built.skips) {
      nlohmann::json j{{"template_id", s.template_id},
                       {"subset", to_string(s.subset)},
                       {"entity_type", s.entity_type},
                       {"reason", s.reason}};
      body += j.dump() + "\n";
    }
    write_file(out_dir / "build_skips.jsonl", header, body);
    if (!built.skips.empty())
      std::cerr << "build: skipped " << built.skips.size()
                << " (template, subset) pairs; see build_skips.jsonl\n";
  }

  ValidationReport report = validate_benchmark(built.records, corpus, pools);
  write_validation(out_dir / "validation.json", report, header);
  for (const CheckResult& c : report.checks)
    std::cerr << "build: check " << c.name << ": " << (c.pass() ? "pass" : "FAIL") << " ("
              << c.checked << " checked, " << c.failed << " failed)\n";
  if (!report.all_pass()) {
    std::cerr << "build: validation failed\n";
    return 2;
  }
  std::cerr << "build: " << built.records.size() << " records over "
            << config.subsets.size() << " subsets\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-ref

struct TrainRefArgs {
  std::string corpus;
  std::string out;
};

inline int cmd_train_ref(const TrainRefArgs& args, const RunConfig& config) {
  std::vector<std::string> lines;
  try {
    auto [header, body] = read_lines(args.corpus);
    lines = std::move(body);
  } catch (const Error& e) {
    std::cerr << "train-ref: " << e.what() << "\n";
    return 1;
  }
  try {
    TrigramLM lm = TrigramLM::train(lines);
    const std::string body = lm.to_json().dump(2) + "\n";
    FileHeader header = detail::base_header(config);
    header.set("model_id", "trigram-" + sha256_hex(body).substr(0, 12));
    write_file(args.out, header, body);
  } catch (const Error& e) {
    std::cerr << "train-ref: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Model id for a serialized reference model: derived from content so cache
// entries can never alias across different trained models.
inline std::string reference_model_id(const std::string& model_body) {
  return "trigram-" + sha256_hex(model_body).substr(0, 12);
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string benchmark;
  std::string pools;        // defaults to pools.json next to the benchmark
  std::string ref_model;    // reference provider: serialized trigram model
  std::string prefix_file;  // defaults to recall_prefix.txt next to the benchmark
  std::string methods = "all";
  std::string out;
  std::string cache_dir;  // defaults to the output directory
  bool no_cache = false;
};

inline int cmd_score(const ScoreArgs& args, const RunConfig& config) {
  FileHeader bench_header;
  std::vector<BenchmarkRecord> records;
  std::map<std::string, CandidatePool> pools;
  try {
    std::tie(bench_header, records) = read_benchmark(args.benchmark);
    fs::path pools_path = args.pools.empty()
                              ? fs::path(args.benchmark).parent_path() / "pools.json"
                              : fs::path(args.pools);
    std::tie(std::ignore, pools) = read_pools(pools_path);
  } catch (const Error& e) {
    std::cerr << "score: " << e.what() << "\n";
    return 1;
  }

  std::unique_ptr<Provider> provider;
  std::string model_id = config.model_id;
  try {
    if (config.provider == "reference") {
      if (args.ref_model.empty())
        throw Error(Errc::bad_config, "reference provider requires --ref-model");
      const std::string body = detail::read_body(args.ref_model);
      if (model_id.empty()) model_id = reference_model_id(body);
      TrigramLM lm = TrigramLM::from_json(nlohmann::json::parse(body));
      provider = std::make_unique<ReferenceProvider>(std::move(lm), model_id);
    } else if (config.provider == "http") {
      ProviderConfig pc;
      pc.kind = ProviderKind::http;
      pc.base_url = config.base_url;
      pc.model_id = model_id.empty() ? "default" : model_id;
      model_id = pc.model_id;
      pc.max_in_flight = config.max_in_flight;
      pc.timeout_ms = config.timeout_ms;
      pc.logprob_base = config.logprob_base;
      provider = std::make_unique<HttpProvider>(std::move(pc));
    } else {
      throw Error(Errc::bad_config, "unknown provider '" + config.provider + "'");
    }
  } catch (const std::exception& e) {
    std::cerr << "score: " << e.what() << "\n";
    return 1;
  }

  // Reachability probe before committing to the batch.
  if (!records.empty()) {
    try {
      provider->score_text(records.front().text);
    } catch (const Error& e) {
      if (e.code() == Errc::provider_unreachable) {
        std::cerr << "score: " << e.what() << "\n";
        return 3;
      }
      // Other provider errors surface per record in the skip log.
    }
  }

  std::optional<ScoreCache> cache;
  std::unique_ptr<Provider> cached;
  const Provider* effective = provider.get();
  if (!args.no_cache) {
    fs::path cache_dir =
        args.cache_dir.empty() ? fs::path(args.out).parent_path() : fs::path(args.cache_dir);
    if (cache_dir.empty()) cache_dir = ".";
    cache.emplace(cache_dir);
    cached = std::make_unique<CachingProvider>(*provider, *cache);
    effective = cached.get();
  }

  RunOptions options;
  options.seed = config.seed;
  options.max_in_flight = config.max_in_flight;
  try {
    options.methods = detail::parse_methods(args.methods);
  } catch (const Error& e) {
    std::cerr << "score: " << e.what() << "\n";
    return 1;
  }
  fs::path prefix_path = args.prefix_file.empty()
                             ? fs::path(args.benchmark).parent_path() / "recall_prefix.txt"
                             : fs::path(args.prefix_file);
  if (fs::exists(prefix_path))
    options.recall_prefix = detail::read_body(prefix_path);
  else if (std::find(options.methods.begin(), options.methods.end(), MethodId::recall) !=
           options.methods.end())
    std::cerr << "score: recall prefix file " << prefix_path
              << " not found; recall will be skipped\n";

  AttackConfig attack = config.attack_config();
  attack.recall_prefix_path = prefix_path.string();
  RunResult result = run_attacks(records, *effective, pools, attack, options);

  FileHeader header = detail::base_header(config);
  header.set("seed", std::to_string(config.seed));
  header.set("model_id", model_id);
  header.set("zlib_level", std::to_string(config.zlib_level));
  header.set("min_k_fraction", fmt_double(config.min_k_fraction));
  header.set("suffix_window", config.suffix_window);
  header.set("refset_size", std::to_string(config.refset_size));
  header.set("llr_variant", config.llr_variant);
  write_scores(args.out, result.scores, header);
  write_skips(fs::path(args.out).parent_path() / "skips.jsonl", result.skips, header);
  std::cerr << "score: " << result.scores.size() << " scores, " << result.skips.size()
            << " skips\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string scores;
  std::string benchmark;
  std::string out_dir;
};

inline int cmd_eval(const EvalArgs& args, const RunConfig& config) {
  FileHeader scores_header;
  std::vector<AttackScore> scores;
  std::vector<BenchmarkRecord> records;
  try {
    std::tie(scores_header, scores) = read_scores(args.scores);
    std::tie(std::ignore, records) = read_benchmark(args.benchmark);
  } catch (const Error& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return 1;
  }
  const Thresholding mode = thresholding_from_string(config.thresholding);

  std::map<std::string, const BenchmarkRecord*> by_id;
  for (const BenchmarkRecord& r : records) by_id[r.record_id] = &r;

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  for (Subset subset : kAllSubsets) {
    std::vector<BenchmarkRecord> subset_records;
    for (const BenchmarkRecord& r : records)
      if (r.subset == subset) subset_records.push_back(r);
    if (subset_records.empty()) continue;
    std::vector<AttackScore> subset_scores;
    for (const AttackScore& s : scores) {
      auto it = by_id.find(s.record_id);
      if (it != by_id.end() && it->second->subset == subset) subset_scores.push_back(s);
    }
    if (subset_scores.empty()) continue;

    EvalReport report;
    try {
      report = evaluate(subset_scores, subset_records, mode, config.fpr_target);
    } catch (const Error& e) {
      std::cerr << "eval: " << to_string(subset) << ": " << e.what() << "\n";
      continue;
    }

    FileHeader header = detail::base_header(config);
    for (const char* key :
         {"seed", "model_id", "zlib_level", "min_k_fraction", "suffix_window", "refset_size",
          "llr_variant"})
      if (!scores_header.get(key).empty()) header.set(key, scores_header.get(key));
    header.set("thresholding", to_string(mode));
    header.set("fpr_target", fmt_double(config.fpr_target));
    header.set("subset", to_string(subset));
    for (std::size_t i = 0; i < report.notes.size(); ++i)
      header.set("note" + std::to_string(i), report.notes[i]);

    std::string body = "group,method,auc,tpr,n,threshold\n";
    for (const GroupEval& g : report.groups)
      body += detail::csv_escape(g.group) + "," + to_string(g.method) + "," +
              fmt_double(g.auc) + "," + fmt_double(g.tpr) + "," + std::to_string(g.n()) + "," +
              fmt_double(g.threshold) + "\n";
    for (const MethodAggregate& a : report.aggregates)
      body += std::string("WEIGHTED,") + to_string(a.method) + "," + fmt_double(a.auc) + "," +
              fmt_double(a.tpr) + "," + std::to_string(a.n) + ",\n";
    write_file(out_dir / ("eval_" + std::string(to_string(subset)) + "_" +
                          to_string(mode) + ".csv"),
               header, body);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string scores;
  std::string benchmark;
  std::string pools;  // defaults to pools.json next to the benchmark
  std::string method = "reference_set_suffix";
  std::string subset = "mix";
  std::string out_dir;
};

inline int cmd_analyze(const AnalyzeArgs& args, const RunConfig& config) {
  FileHeader scores_header;
  std::vector<AttackScore> scores;
  std::vector<BenchmarkRecord> records;
  std::map<std::string, CandidatePool> pools;
  MethodId method;
  try {
    std::tie(scores_header, scores) = read_scores(args.scores);
    std::tie(std::ignore, records) = read_benchmark(args.benchmark);
    fs::path pools_path = args.pools.empty()
                              ? fs::path(args.benchmark).parent_path() / "pools.json"
                              : fs::path(args.pools);
    std::tie(std::ignore, pools) = read_pools(pools_path);
    method = method_from_string(args.method);
  } catch (const Error& e) {
    std::cerr << "analyze: " << e.what() << "\n";
    return 1;
  }
  const Subset subset = subset_from_string(args.subset);

  std::vector<BenchmarkRecord> subset_records;
  for (const BenchmarkRecord& r : records)
    if (r.subset == subset) subset_records.push_back(r);
  std::map<std::string, const BenchmarkRecord*> by_id;
  for (const BenchmarkRecord& r : subset_records) by_id[r.record_id] = &r;
  std::vector<AttackScore> subset_scores;
  for (const AttackScore& s : scores)
    if (by_id.count(s.record_id)) subset_scores.push_back(s);

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  FileHeader base = detail::base_header(config);
  base.set("method", args.method);
  base.set("subset", args.subset);
  base.set("fpr_target", fmt_double(config.fpr_target));

  {
    FileHeader header = base;
    std::string body = "variant,variable,r,p,n\n";
    try {
      LengthCorrelations lc =
          length_correlations(subset_scores, subset_records, method, config.fpr_target);
      for (const CorrelationResult& c : lc.per_record)
        body += "per_record," + c.variable + "," + fmt_double(c.r) + "," + fmt_double(c.p) +
                "," + std::to_string(c.n) + "\n";
      for (const CorrelationResult& c : lc.per_type)
        body += "per_type," + c.variable + "," + fmt_double(c.r) + "," + fmt_double(c.p) + "," +
                std::to_string(c.n) + "\n";
      for (std::size_t i = 0; i < lc.notes.size(); ++i)
        header.set("note" + std::to_string(i), lc.notes[i]);
      // Soft cross-check: the two variants should not disagree in sign when
      // both are significant.
      for (const CorrelationResult& a : lc.per_record)
        for (const CorrelationResult& b : lc.per_type)
          if (a.variable == b.variable && a.p < 0.05 && b.p < 0.05 && a.r * b.r < 0)
            std::cerr << "analyze: warning: per-record and per-type correlations disagree in "
                         "sign for "
                      << a.variable << "\n";
    } catch (const Error& e) {
      header.set("error", e.what());
      std::cerr << "analyze: length_correlations: " << e.what() << "\n";
    }
    write_file(out_dir / "length_corr.csv", header, body);
  }

  {
    FileHeader header = base;
    std::string body = "n_entities,tpr,n\n";
    try {
      EntityCountResult ec =
          entity_count_tpr(subset_scores, subset_records, method, config.fpr_target);
      for (const EntityCountPoint& p : ec.series)
        body += std::to_string(p.n_entities) + "," + fmt_double(p.tpr) + "," +
                std::to_string(p.n) + "\n";
      if (ec.trend_r) header.set("trend_r", fmt_double(*ec.trend_r));
      if (ec.trend_p) header.set("trend_p", fmt_double(*ec.trend_p));
      for (std::size_t i = 0; i < ec.notes.size(); ++i)
        header.set("note" + std::to_string(i), ec.notes[i]);
    } catch (const Error& e) {
      header.set("error", e.what());
      std::cerr << "analyze: entity_count_tpr: " << e.what() << "\n";
    }
    write_file(out_dir / "entity_count_tpr.csv", header, body);
  }

  {
    FileHeader header = base;
    std::string body = "entity_type,pool_size,auc\n";
    try {
      EvalReport per_type =
          evaluate(subset_scores, subset_records, Thresholding::per_type, config.fpr_target);
      std::vector<std::pair<std::string, double>> per_type_auc;
      for (const GroupEval& g : per_type.groups)
        if (g.method == method) per_type_auc.emplace_back(g.group, g.auc);
      RegressionResult reg = type_vulnerability_regression(per_type_auc, pools);
      for (const RegressionPoint& p : reg.points)
        body += detail::csv_escape(p.entity_type) + "," + std::to_string(p.pool_size) + "," +
                fmt_double(p.auc) + "\n";
      header.set("r", fmt_double(reg.r));
      header.set("p", fmt_double(reg.p));
      header.set("slope", fmt_double(reg.slope));
      header.set("n", std::to_string(reg.n));
    } catch (const Error& e) {
      header.set("error", e.what());
      std::cerr << "analyze: type_vulnerability_regression: " << e.what() << "\n";
    }
    write_file(out_dir / "type_regression.csv", header, body);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string eval_dir;
  std::string out;
};

inline int cmd_report(const ReportArgs& args, const RunConfig& config) {
  const fs::path dir(args.eval_dir);
  if (!fs::is_directory(dir)) {
    std::cerr << "report: " << dir << " is not a directory\n";
    return 1;
  }
  struct EvalFile {
    std::string subset;
    std::string mode;
    FileHeader header;
    std::vector<std::string> rows;
  };
  std::vector<EvalFile> files;
  for (Subset subset : kAllSubsets) {
    for (const char* mode : {"per_type", "global"}) {
      fs::path p = dir / ("eval_" + std::string(to_string(subset)) + "_" + mode + ".csv");
      if (!fs::exists(p)) continue;
      auto [header, lines] = read_lines(p);
      files.push_back({to_string(subset), mode, std::move(header), std::move(lines)});
    }
  }
  if (files.empty()) {
    std::cerr << "report: no eval_*.csv files in " << dir << "\n";
    return 1;
  }

  std::ostringstream md;
  md << "# config_hash: " << config.config_hash() << "\n";
  md << "# generated: " << detail::now_rfc3339() << "\n\n";
  md << "# Attack evaluation report\n\n";
  const FileHeader& meta = files.front().header;
  md << "| parameter | value |\n|---|---|\n";
  for (const char* key : {"seed", "model_id", "zlib_level", "min_k_fraction", "suffix_window",
                          "refset_size", "llr_variant", "fpr_target"}) {
    const std::string v = meta.get(key);
    if (!v.empty()) md << "| " << key << " | " << v << " |\n";
  }
  md << "\n";

  for (const EvalFile& f : files) {
    md << "## Subset: " << f.subset << " (thresholding: " << f.mode << ")\n\n";
    md << "| method | AUC | TPR@" << meta.get("fpr_target") << " | n |\n|---|---|---|---|\n";
    // Aggregate rows carry the weighted per-type averages; in global mode the
    // single GLOBAL group is the whole story.
    for (const std::string& row : f.rows) {
      if (row.empty() || row.rfind("group,", 0) == 0) continue;
      std::stringstream ss(row);
      std::string group, method, auc_s, tpr_s, n_s, threshold;
      std::getline(ss, group, ',');
      std::getline(ss, method, ',');
      std::getline(ss, auc_s, ',');
      std::getline(ss, tpr_s, ',');
      std::getline(ss, n_s, ',');
      std::getline(ss, threshold, ',');
      const bool aggregate_row = f.mode == "per_type" ? group == "WEIGHTED" : group == "GLOBAL";
      if (!aggregate_row) continue;
      md << "| " << method << " | " << auc_s << " | " << tpr_s << " | " << n_s << " |\n";
    }
    md << "\n";
  }

  fs::path out_path(args.out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "report: cannot write " << out_path << "\n";
    return 1;
  }
  out << md.str();
  return 0;
}

// ---------------------------------------------------------------------------
// argument wiring

inline int run(std::vector<std::string> args) {
  CLI::App app{"entity-level membership-inference auditing toolkit", "el-mia"};
  app.require_subcommand(1);

  RunConfig config;
  std::string config_path;
  // Config file values become defaults; explicit flags override them.
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      config_path = args[i + 1];
      break;
    }
  }
  if (!config_path.empty()) {
    try {
      config.apply_json(nlohmann::json::parse(detail::read_text_file(config_path)));
    } catch (const std::exception& e) {
      std::cerr << "el-mia: bad config file " << config_path << ": " << e.what() << "\n";
      return 1;
    }
  }
  app.add_option("--config", config_path, "JSON config file (flags override it)");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", config.seed, "run seed");
    cmd->add_option("--fpr", config.fpr_target, "FPR budget for TPR metrics");
  };

  BuildArgs build_args;
  CLI::App* build = app.add_subcommand("build", "construct the benchmark from annotated JSONL");
  build->add_option("--input", build_args.input, "annotated corpus (JSONL)")->required();
  build->add_option("--out", build_args.out_dir, "output directory")->required();
  build->add_option("--holdout-fraction", config.holdout_fraction,
                    "fraction of samples held out of training");
  build->add_option("--subsets", config.subsets, "subsets to build");
  add_common(build);

  TrainRefArgs train_args;
  CLI::App* train = app.add_subcommand("train-ref", "train the reference trigram model");
  train->add_option("--corpus", train_args.corpus, "training corpus (text)")->required();
  train->add_option("--out", train_args.out, "model output (JSON)")->required();
  add_common(train);

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "score benchmark records against a model");
  score->add_option("--benchmark", score_args.benchmark, "benchmark JSONL")->required();
  score->add_option("--out", score_args.out, "scores output (JSONL)")->required();
  score->add_option("--provider", config.provider, "reference | http");
  score->add_option("--base-url", config.base_url, "http provider base URL");
  score->add_option("--model-id", config.model_id, "model identifier");
  score->add_option("--ref-model", score_args.ref_model, "serialized reference model");
  score->add_option("--pools", score_args.pools, "pools.json path");
  score->add_option("--prefix-file", score_args.prefix_file, "recall prefix sentences");
  score->add_option("--methods", score_args.methods, "all or comma-separated list");
  score->add_option("--cache-dir", score_args.cache_dir, "score cache directory");
  score->add_flag("--no-cache", score_args.no_cache, "disable the score cache");
  score->add_option("--max-in-flight", config.max_in_flight, "worker / request bound");
  score->add_option("--timeout-ms", config.timeout_ms, "http timeout");
  score->add_option("--logprob-base", config.logprob_base, "base of server logprobs");
  score->add_option("--min-k", config.min_k_fraction, "min-k fraction");
  score->add_option("--suffix-window", config.suffix_window, "suffix window: all or integer");
  score->add_flag("--suffix-includes-candidate", config.suffix_includes_candidate,
                  "prepend candidate tokens to the suffix window");
  score->add_option("--refset-size", config.refset_size, "reference set size N");
  score->add_option("--llr-variant", config.llr_variant, "ratio | standardized");
  score->add_option("--zlib-level", config.zlib_level, "zlib compression level");
  score->add_flag("--recall-invert", config.recall_invert, "flip recall orientation");
  add_common(score);

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "compute AUC / TPR@FPR reports");
  eval->add_option("--scores", eval_args.scores, "scores JSONL")->required();
  eval->add_option("--benchmark", eval_args.benchmark, "benchmark JSONL")->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();
  eval->add_option("--thresholding", config.thresholding, "per_type | global");
  add_common(eval);

  AnalyzeArgs analyze_args;
  CLI::App* analyze = app.add_subcommand("analyze", "length / entity-count / pool-size analyses");
  analyze->add_option("--scores", analyze_args.scores, "scores JSONL")->required();
  analyze->add_option("--benchmark", analyze_args.benchmark, "benchmark JSONL")->required();
  analyze->add_option("--pools", analyze_args.pools, "pools.json path");
  analyze->add_option("--method", analyze_args.method, "method to analyze");
  analyze->add_option("--subset", analyze_args.subset, "subset to analyze");
  analyze->add_option("--out", analyze_args.out_dir, "output directory")->required();
  add_common(analyze);

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "render Markdown summary from eval outputs");
  report->add_option("--eval-dir", report_args.eval_dir, "directory with eval_*.csv")->required();
  report->add_option("--out", report_args.out, "Markdown output path")->required();
  add_common(report);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (build->parsed()) return cmd_build(build_args, config);
    if (train->parsed()) return cmd_train_ref(train_args, config);
    if (score->parsed()) return cmd_score(score_args, config);
    if (eval->parsed()) return cmd_eval(eval_args, config);
    if (analyze->parsed()) return cmd_analyze(analyze_args, config);
    if (report->parsed()) return cmd_report(report_args, config);
  } catch (const Error& e) {
    std::cerr << "el-mia: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "el-mia: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace elmia::cli
