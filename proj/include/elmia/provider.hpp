#pragma once

#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "elmia/error.hpp"
#include "elmia/refmodel.hpp"
#include "elmia/scored_text.hpp"

namespace elmia {

enum class ProviderKind { http, reference };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::reference;
  std::string base_url;  // required for http
  std::string model_id;
  int max_in_flight = 8;
  int timeout_ms = 30000;
  // Base of the logprobs a server emits; anything other than e is converted
  // to natural log at the protocol boundary.
  double logprob_base = std::numbers::e;
  bool include_eos = false;

  void validate() const {
    if (kind == ProviderKind::http && base_url.empty())
      throw Error(Errc::bad_config, "http provider requires base_url");
    if (max_in_flight <= 0) throw Error(Errc::bad_config, "max_in_flight must be positive");
    if (timeout_ms <= 0) throw Error(Errc::bad_config, "timeout_ms must be positive");
  }
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ScoredText score_text(std::string_view text,
                                std::optional<std::string_view> conditioning = {}) const = 0;
  virtual const std::string& model_id() const = 0;
};

// In-process provider backed by the trigram reference model. Immutable after
// construction and safe to share across threads.
class ReferenceProvider : public Provider {
 public:
  ReferenceProvider(TrigramLM lm, std::string model_id, bool include_eos = false)
      : lm_(std::move(lm)), model_id_(std::move(model_id)), include_eos_(include_eos) {}

  ScoredText score_text(std::string_view text,
                        std::optional<std::string_view> conditioning = {}) const override {
    if (text.empty()) throw Error(Errc::protocol_error, "cannot score empty text");
    return lm_.score(text, conditioning, include_eos_, model_id_);
  }

  const std::string& model_id() const override { return model_id_; }
  const TrigramLM& model() const { return lm_; }

 private:
  TrigramLM lm_;
  std::string model_id_;
  bool include_eos_;
};

}  // namespace elmia
