#pragma once

#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "elmia/error.hpp"
#include "elmia/provider.hpp"
#include "elmia/scored_text.hpp"
#include "elmia/unicode.hpp"

// OpenAI-compatible completions client with echoed logprobs. One request per
// score_text call: {"model", "prompt", "max_tokens": 0, "echo": true,
// "logprobs": 1}; conditioning is sent as part of the prompt and its tokens
// are discarded from the result using the returned text offsets.

namespace elmia {

namespace detail {

// Servers disagree on whether text_offset is measured in characters or
// bytes. Try the character reading first, then the byte reading; a reading
// is accepted only when token strings tile the prompt exactly under it.
// Tokens that do not correspond to prompt slices (e.g. byte-pair markers)
// fail both readings and are rejected.
inline std::vector<std::pair<std::size_t, std::size_t>> normalize_offsets(
    const std::string& prompt, const std::vector<std::string>& tokens,
    const std::vector<std::size_t>& offsets) {
  const std::size_t n = tokens.size();
  const std::size_t prompt_chars = char_length(prompt);

  auto try_chars = [&]() -> std::optional<std::vector<std::pair<std::size_t, std::size_t>>> {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (offsets[i] != cursor) return std::nullopt;
      cursor += char_length(tokens[i]);
      ranges.emplace_back(offsets[i], cursor);
    }
    if (cursor != prompt_chars) return std::nullopt;
    return ranges;
  };
  auto try_bytes = [&]() -> std::optional<std::vector<std::pair<std::size_t, std::size_t>>> {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (offsets[i] != cursor || !is_char_boundary(prompt, cursor)) return std::nullopt;
      std::size_t end = cursor + tokens[i].size();
      if (end > prompt.size() || !is_char_boundary(prompt, end)) return std::nullopt;
      ranges.emplace_back(byte_to_char(prompt, cursor), byte_to_char(prompt, end));
      cursor = end;
    }
    if (cursor != prompt.size()) return std::nullopt;
    return ranges;
  };

  if (auto r = try_chars()) return *r;
  if (auto r = try_bytes()) return *r;
  throw Error(Errc::token_offset_mismatch,
              "returned text offsets do not tile the prompt under a character or byte reading");
}

}  // namespace detail

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
    slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
    if (const char* key = std::getenv("EL_MIA_API_KEY")) api_key_ = key;
  }

  ScoredText score_text(std::string_view text,
                        std::optional<std::string_view> conditioning = {}) const override {
    if (text.empty()) throw Error(Errc::protocol_error, "cannot score empty text");
    std::string prompt = conditioning ? std::string(*conditioning) + std::string(text)
                                      : std::string(text);
    nlohmann::json body{{"model", config_.model_id},
                        {"prompt", prompt},
                        {"max_tokens", 0},
                        {"echo", true},
                        {"logprobs", 1}};

    slots_->acquire();
    httplib::Result res = [&] {
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(config_.timeout_ms / 1000,
                                    (config_.timeout_ms % 1000) * 1000);
      client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      return client.Post("/v1/completions", headers, body.dump(), "application/json");
    }();
    slots_->release();

    if (!res)
      throw Error(Errc::provider_unreachable,
                  config_.base_url + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw Error(Errc::protocol_error, "HTTP " + std::to_string(res->status) + " from " +
                                            config_.base_url + ": " + res->body);
    return parse_response(res->body, prompt, std::string(text), conditioning);
  }

  const std::string& model_id() const override { return config_.model_id; }

 private:
  ScoredText parse_response(const std::string& body, const std::string& prompt,
                            std::string text, std::optional<std::string_view> conditioning) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::protocol_error, std::string("response is not JSON: ") + e.what());
    }
    std::vector<std::string> tokens;
    std::vector<std::optional<double>> logprobs;
    std::vector<std::size_t> offsets;
    try {
      const nlohmann::json& lp = j.at("choices").at(0).at("logprobs");
      for (const auto& t : lp.at("tokens")) tokens.push_back(t.get<std::string>());
      for (const auto& v : lp.at("token_logprobs"))
        logprobs.push_back(v.is_null() ? std::optional<double>{}
                                       : std::optional<double>{v.get<double>()});
      for (const auto& o : lp.at("text_offset")) offsets.push_back(o.get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::protocol_error, std::string("missing logprobs fields: ") + e.what());
    }
    if (tokens.size() != logprobs.size() || tokens.size() != offsets.size())
      throw Error(Errc::protocol_error, "tokens/token_logprobs/text_offset lengths differ");
    if (tokens.empty()) throw Error(Errc::token_offset_mismatch, "empty token list");

    auto ranges = detail::normalize_offsets(prompt, tokens, offsets);

    const double scale =
        config_.logprob_base == std::numbers::e ? 1.0 : std::log(config_.logprob_base);
    std::vector<TokenScore> scored;
    scored.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      TokenScore ts;
      ts.token = tokens[i];
      ts.char_start = ranges[i].first;
      ts.char_end = ranges[i].second;
      if (logprobs[i]) ts.logprob = *logprobs[i] * scale;
      scored.push_back(std::move(ts));
    }

    ScoredText out;
    out.text = std::move(text);
    out.model_id = config_.model_id;
    if (conditioning) {
      out.conditioning = std::string(*conditioning);
      out.tokens = strip_conditioning_tokens(scored, char_length(*conditioning), out.text);
      for (const TokenScore& t : out.tokens)
        if (!t.logprob)
          throw Error(Errc::protocol_error,
                      "token '" + t.token + "' has no logprob despite conditioning");
    } else {
      out.tokens = std::move(scored);
    }
    check_tiling(out);
    return out;
  }

  ProviderConfig config_;
  std::string api_key_;
  mutable std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace elmia
