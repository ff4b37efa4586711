#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "elmia/error.hpp"
#include "elmia/scored_text.hpp"
#include "elmia/unicode.hpp"

// Deterministic interpolated trigram language model. It stands in for a real
// audited model so the whole pipeline can be exercised and verified at desk
// scale: counts are exact integers, probabilities are closed-form, and
// identical inputs always produce bit-identical logprobs.

namespace elmia {

struct LmToken {
  std::string text;
  std::size_t char_start = 0;  // range start (absorbs preceding whitespace gap)
  std::size_t char_end = 0;
};

namespace detail {

inline bool is_ascii_punct(unsigned char c) { return std::ispunct(c) != 0; }

}  // namespace detail

// Whitespace-splitting word tokenizer. Leading/trailing ASCII punctuation of
// each chunk becomes its own token. Ranges tile the text: each token's range
// runs to the start of the next token (whitespace attaches to the preceding
// token), the first token's range starts at 0 and the last ends at the text
// length.
inline std::vector<LmToken> lm_tokenize(std::string_view text) {
  struct Piece {
    std::string word;
    std::size_t start;  // char index of the word itself
  };
  std::vector<Piece> pieces;
  std::size_t char_idx = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      ++char_idx;
      continue;
    }
    // Collect one whitespace-free chunk, tracking char positions.
    std::size_t chunk_start_char = char_idx;
    std::string chunk;
    std::vector<std::size_t> char_offsets;  // char index of each byte's code point
    while (i < text.size()) {
      unsigned char b = static_cast<unsigned char>(text[i]);
      if (!is_utf8_continuation(b)) {
        if (std::isspace(b)) break;
        char_offsets.push_back(char_idx);
        ++char_idx;
      } else {
        char_offsets.push_back(char_offsets.empty() ? char_idx : char_offsets.back());
      }
      chunk.push_back(static_cast<char>(b));
      ++i;
    }
    // Split leading / trailing ASCII punctuation into single-char tokens.
    std::size_t lead = 0;
    while (lead < chunk.size() && detail::is_ascii_punct(chunk[lead])) ++lead;
    std::size_t tail = chunk.size();
    while (tail > lead && detail::is_ascii_punct(chunk[tail - 1])) --tail;
    for (std::size_t k = 0; k < lead; ++k)
      pieces.push_back({std::string(1, chunk[k]), chunk_start_char + k});
    if (tail > lead)
      pieces.push_back({chunk.substr(lead, tail - lead), char_offsets[lead]});
    for (std::size_t k = tail; k < chunk.size(); ++k)
      pieces.push_back({std::string(1, chunk[k]), char_offsets[k]});
  }
  const std::size_t total = char_idx;
  std::vector<LmToken> tokens;
  tokens.reserve(pieces.size());
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    LmToken t;
    t.text = std::move(pieces[p].word);
    t.char_start = p == 0 ? 0 : pieces[p].start;
    t.char_end = p + 1 < pieces.size() ? pieces[p + 1].start : total;
    tokens.push_back(std::move(t));
  }
  return tokens;
}

struct TrigramWeights {
  double tri = 0.6;
  double bi = 0.25;
  double uni = 0.1;
  double floor = 0.05;
};

class TrigramLM {
 public:
  static constexpr const char* kBos = "\x01<bos>";
  static constexpr const char* kEos = "\x01<eos>";
  static constexpr const char* kUnk = "\x01<unk>";

  static TrigramLM train(const std::vector<std::string>& lines, TrigramWeights w = {}) {
    TrigramLM lm;
    lm.weights_ = w;
    bool any = false;
    for (const std::string& line : lines) {
      std::vector<LmToken> toks = lm_tokenize(line);
      if (toks.empty()) continue;
      any = true;
      std::vector<std::string> seq;
      seq.reserve(toks.size() + 3);
      seq.push_back(kBos);
      seq.push_back(kBos);
      for (LmToken& t : toks) seq.push_back(std::move(t.text));
      seq.push_back(kEos);
      for (std::size_t i = 2; i < seq.size(); ++i) {
        const std::string& u = seq[i - 2];
        const std::string& v = seq[i - 1];
        const std::string& word = seq[i];
        lm.unigrams_[word] += 1;
        lm.total_unigrams_ += 1;
        lm.bigrams_[v][word] += 1;
        lm.bigram_ctx_[v] += 1;
        lm.trigrams_[u + '\x1f' + v][word] += 1;
        lm.trigram_ctx_[u + '\x1f' + v] += 1;
      }
    }
    if (!any) throw Error(Errc::empty_training_set, "no non-empty training lines");
    return lm;
  }

  std::size_t vocab_size() const { return unigrams_.size() + 1; }  // + UNK

  // p(w | u, v) with linear interpolation; maximum-likelihood terms vanish
  // when their context is unseen, the floor term keeps the distribution
  // normalized over vocabulary + UNK.
  double token_prob(std::string_view word, std::string_view u, std::string_view v) const {
    const std::string w = map_word(word);
    const std::string mu = map_context(u);
    const std::string mv = map_context(v);
    double p = weights_.floor / static_cast<double>(vocab_size());
    if (total_unigrams_ > 0)
      p += weights_.uni * static_cast<double>(count_in(unigrams_, w)) /
           static_cast<double>(total_unigrams_);
    if (auto ctx = bigram_ctx_.find(mv); ctx != bigram_ctx_.end()) {
      auto row = bigrams_.find(mv);
      p += weights_.bi * static_cast<double>(count_in(row->second, w)) /
           static_cast<double>(ctx->second);
    }
    const std::string tri_key = mu + '\x1f' + mv;
    if (auto ctx = trigram_ctx_.find(tri_key); ctx != trigram_ctx_.end()) {
      auto row = trigrams_.find(tri_key);
      p += weights_.tri * static_cast<double>(count_in(row->second, w)) /
           static_cast<double>(ctx->second);
    }
    return p;
  }

  double token_logprob(std::string_view word, std::string_view u, std::string_view v) const {
    return std::log(token_prob(word, u, v));
  }

  // Score `text`, optionally conditioned on a prefix the model is told it has
  // already seen. With conditioning every returned token has a logprob; the
  // conditioning tokens themselves are excluded and ranges are re-based onto
  // `text`. When include_eos is set the end-of-sequence probability is folded
  // into the final token (EOS never carries its own offsets).
  ScoredText score(std::string_view text, std::optional<std::string_view> conditioning = {},
                   bool include_eos = false, std::string model_id = "trigram") const {
    ScoredText out;
    out.text = std::string(text);
    out.model_id = std::move(model_id);
    std::string full;
    std::size_t cond_chars = 0;
    if (conditioning) {
      out.conditioning = std::string(*conditioning);
      full = std::string(*conditioning) + std::string(text);
      cond_chars = char_length(*conditioning);
    } else {
      full = std::string(text);
    }
    std::vector<LmToken> toks = lm_tokenize(full);
    std::vector<std::string> seq;
    seq.reserve(toks.size() + 3);
    seq.push_back(kBos);
    seq.push_back(kBos);
    for (const LmToken& t : toks) seq.push_back(t.text);
    seq.push_back(kEos);

    std::vector<TokenScore> scored;
    scored.reserve(toks.size());
    for (std::size_t i = 0; i < toks.size(); ++i) {
      TokenScore ts;
      ts.token = toks[i].text;
      ts.char_start = toks[i].char_start;
      ts.char_end = toks[i].char_end;
      ts.logprob = token_logprob(seq[i + 2], seq[i], seq[i + 1]);
      scored.push_back(std::move(ts));
    }
    if (include_eos && !scored.empty())
      *scored.back().logprob +=
          token_logprob(kEos, seq[seq.size() - 3], seq[seq.size() - 2]);

    if (conditioning)
      out.tokens = strip_conditioning_tokens(scored, cond_chars, out.text);
    else
      out.tokens = std::move(scored);
    check_tiling(out);
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json tri = nlohmann::json::object();
    for (const auto& [key, row] : trigrams_) {
      auto sep = key.find('\x1f');
      tri[key.substr(0, sep)][key.substr(sep + 1)] = row;
    }
    return nlohmann::json{{"weights", {weights_.tri, weights_.bi, weights_.uni, weights_.floor}},
                          {"unigrams", unigrams_},
                          {"bigrams", bigrams_},
                          {"trigrams", tri},
                          {"total_unigrams", total_unigrams_}};
  }

  static TrigramLM from_json(const nlohmann::json& j) {
    TrigramLM lm;
    const auto& w = j.at("weights");
    lm.weights_ = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                   w.at(3).get<double>()};
    lm.unigrams_ = j.at("unigrams").get<std::map<std::string, std::uint64_t>>();
    lm.bigrams_ = j.at("bigrams").get<std::map<std::string, std::map<std::string, std::uint64_t>>>();
    for (const auto& [u, vs] : j.at("trigrams").items())
      for (const auto& [v, row] : vs.items())
        lm.trigrams_[u + '\x1f' + v] = row.get<std::map<std::string, std::uint64_t>>();
    lm.total_unigrams_ = j.at("total_unigrams").get<std::uint64_t>();
    for (const auto& [v, row] : lm.bigrams_) {
      std::uint64_t n = 0;
      for (const auto& [w2, c] : row) n += c;
      lm.bigram_ctx_[v] = n;
    }
    for (const auto& [key, row] : lm.trigrams_) {
      std::uint64_t n = 0;
      for (const auto& [w2, c] : row) n += c;
      lm.trigram_ctx_[key] = n;
    }
    return lm;
  }

  const TrigramWeights& weights() const { return weights_; }
  std::uint64_t unigram_count(const std::string& w) const { return count_in(unigrams_, w); }
  std::uint64_t total_unigrams() const { return total_unigrams_; }

  // Vocabulary for normalization checks: training word types + EOS + UNK.
  std::vector<std::string> vocabulary() const {
    std::vector<std::string> v;
    v.reserve(unigrams_.size() + 1);
    for (const auto& [w, c] : unigrams_) v.push_back(w);
    v.push_back(kUnk);
    return v;
  }

 private:
  template <class Map>
  static std::uint64_t count_in(const Map& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? 0 : it->second;
  }

  std::string map_word(std::string_view w) const {
    std::string s(w);
    if (s == kUnk || unigrams_.count(s)) return s;
    return kUnk;
  }

  std::string map_context(std::string_view w) const {
    std::string s(w);
    if (s == kBos || s == kUnk || unigrams_.count(s)) return s;
    return kUnk;
  }

  TrigramWeights weights_;
  std::map<std::string, std::uint64_t> unigrams_;
  std::map<std::string, std::map<std::string, std::uint64_t>> bigrams_;
  std::map<std::string, std::uint64_t> bigram_ctx_;
  std::map<std::string, std::map<std::string, std::uint64_t>> trigrams_;
  std::map<std::string, std::uint64_t> trigram_ctx_;
  std::uint64_t total_unigrams_ = 0;
};

}  // namespace elmia
