#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "elmia/error.hpp"
#include "elmia/hashing.hpp"
#include "elmia/provider.hpp"
#include "elmia/scored_text.hpp"

namespace elmia {

inline nlohmann::json scored_text_to_json(const ScoredText& st) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const TokenScore& t : st.tokens) {
    nlohmann::json lp = t.logprob ? nlohmann::json(*t.logprob) : nlohmann::json(nullptr);
    tokens.push_back(nlohmann::json::array({t.token, t.char_start, t.char_end, lp}));
  }
  return nlohmann::json{{"model_id", st.model_id},
                        {"text", st.text},
                        {"conditioning", st.conditioning ? nlohmann::json(*st.conditioning)
                                                         : nlohmann::json(nullptr)},
                        {"tokens", tokens}};
}

inline ScoredText scored_text_from_json(const nlohmann::json& j) {
  ScoredText st;
  st.model_id = j.at("model_id").get<std::string>();
  st.text = j.at("text").get<std::string>();
  if (!j.at("conditioning").is_null()) st.conditioning = j.at("conditioning").get<std::string>();
  for (const auto& t : j.at("tokens")) {
    TokenScore ts;
    ts.token = t.at(0).get<std::string>();
    ts.char_start = t.at(1).get<std::size_t>();
    ts.char_end = t.at(2).get<std::size_t>();
    if (!t.at(3).is_null()) ts.logprob = t.at(3).get<double>();
    st.tokens.push_back(std::move(ts));
  }
  return st;
}

// Append-only, content-addressed score store: one JSON object per line in
// scores-cache.jsonl, keyed by SHA-256 of (model_id, text, conditioning).
// The first entry written for a key wins; later puts are ignored.
class ScoreCache {
 public:
  explicit ScoreCache(const std::filesystem::path& directory)
      : file_(directory / "scores-cache.jsonl") {
    std::filesystem::create_directories(directory);
    load();
    out_.open(file_, std::ios::app | std::ios::binary);
    if (!out_) throw Error(Errc::io_error, "cannot open cache file " + file_.string());
  }

  static std::string key_for(const std::string& model_id, const std::string& text,
                             const std::optional<std::string>& conditioning) {
    nlohmann::json j{{"model", model_id},
                     {"text", text},
                     {"cond", conditioning ? nlohmann::json(*conditioning) : nlohmann::json(nullptr)}};
    return sha256_hex(j.dump());
  }

  std::optional<ScoredText> get(const std::string& key) const {
    std::shared_lock lock(map_mu_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<ScoredText> get(const std::string& model_id, const std::string& text,
                                const std::optional<std::string>& conditioning) const {
    return get(key_for(model_id, text, conditioning));
  }

  // First put for a key wins; returns the stored value.
  ScoredText put(const ScoredText& st) {
    const std::string key = key_for(st.model_id, st.text, st.conditioning);
    {
      std::shared_lock lock(map_mu_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    std::unique_lock lock(map_mu_);
    auto [it, inserted] = map_.emplace(key, st);
    if (inserted) {
      std::lock_guard wl(write_mu_);
      nlohmann::json j{{"key", key}, {"scored", scored_text_to_json(st)}};
      out_ << j.dump() << '\n';
      out_.flush();
    }
    return it->second;
  }

  std::size_t size() const {
    std::shared_lock lock(map_mu_);
    return map_.size();
  }

 private:
  void load() {
    std::ifstream in(file_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        nlohmann::json j = nlohmann::json::parse(line);
        std::string key = j.at("key").get<std::string>();
        ScoredText st = scored_text_from_json(j.at("scored"));
        map_.emplace(std::move(key), std::move(st));  // keeps the first entry
      } catch (const std::exception& e) {
        throw Error(Errc::cache_corrupt,
                    file_.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  std::filesystem::path file_;
  mutable std::shared_mutex map_mu_;
  std::unordered_map<std::string, ScoredText> map_;
  std::mutex write_mu_;
  std::ofstream out_;
};

// Wraps any provider with a persistent cache; scores obtained through the
// cache are identical to uncached ones (first-wins keeps replays stable).
class CachingProvider : public Provider {
 public:
  CachingProvider(const Provider& inner, ScoreCache& cache) : inner_(inner), cache_(cache) {}

  ScoredText score_text(std::string_view text,
                        std::optional<std::string_view> conditioning = {}) const override {
    std::optional<std::string> cond;
    if (conditioning) cond = std::string(*conditioning);
    const std::string key = ScoreCache::key_for(inner_.model_id(), std::string(text), cond);
    if (auto hit = cache_.get(key)) return *hit;
    return cache_.put(inner_.score_text(text, conditioning));
  }

  const std::string& model_id() const override { return inner_.model_id(); }

 private:
  const Provider& inner_;
  ScoreCache& cache_;
};

}  // namespace elmia
