#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "elmia/http_provider.hpp"
#include "support/stub_server.hpp"
#include "support/wire_cases.hpp"

using namespace elmia;
using testsupport::StubServer;
using testsupport::WireCase;

namespace {

ProviderConfig http_config(const std::string& base_url, double logprob_base) {
  ProviderConfig pc;
  pc.kind = ProviderKind::http;
  pc.base_url = base_url;
  pc.model_id = "stub-model";
  pc.logprob_base = logprob_base;
  pc.timeout_ms = 2000;
  return pc;
}

void install(StubServer& server, const WireCase& c) {
  server.set_handler([c](const httplib::Request&, httplib::Response& res) {
    res.status = c.status;
    res.set_content(c.body(), "application/json");
  });
}

}  // namespace

TEST_CASE("http provider reconstructs scored text from a canned response") {
  StubServer server;
  for (const WireCase& c : testsupport::wire_cases()) {
    if (c.expect_error) continue;
    INFO(c.name);
    install(server, c);
    HttpProvider provider(http_config(server.base_url(), c.logprob_base));
    std::optional<std::string_view> cond;
    if (c.conditioning) cond = *c.conditioning;
    ScoredText st = provider.score_text(c.text, cond);
    REQUIRE(st.tokens.size() == c.expect_tokens.size());
    for (std::size_t i = 0; i < st.tokens.size(); ++i) {
      CHECK(st.tokens[i].char_start == c.expect_tokens[i].char_start);
      CHECK(st.tokens[i].char_end == c.expect_tokens[i].char_end);
      CHECK(st.tokens[i].logprob.has_value() == c.expect_tokens[i].logprob.has_value());
      if (st.tokens[i].logprob)
        CHECK_THAT(*st.tokens[i].logprob,
                   Catch::Matchers::WithinAbs(*c.expect_tokens[i].logprob, 1e-12));
    }
  }
}

TEST_CASE("http provider rejects malformed responses with the right error") {
  StubServer server;
  for (const WireCase& c : testsupport::wire_cases()) {
    if (!c.expect_error) continue;
    INFO(c.name);
    install(server, c);
    HttpProvider provider(http_config(server.base_url(), c.logprob_base));
    std::optional<std::string_view> cond;
    if (c.conditioning) cond = *c.conditioning;
    try {
      provider.score_text(c.text, cond);
      FAIL("expected error for case " + c.name);
    } catch (const Error& e) {
      CHECK(e.code() == *c.expect_error);
    }
  }
}

TEST_CASE("http provider sends the expected request body and auth header") {
  StubServer server;
  WireCase basic = testsupport::wire_cases().front();
  install(server, basic);

  setenv("EL_MIA_API_KEY", "k-123", 1);
  HttpProvider provider(http_config(server.base_url(), basic.logprob_base));
  provider.score_text(basic.text);
  unsetenv("EL_MIA_API_KEY");

  auto req = server.last_request();
  REQUIRE(req);
  CHECK(req->get_header_value("Authorization") == "Bearer k-123");
  nlohmann::json body = nlohmann::json::parse(req->body);
  CHECK(body.at("model") == "stub-model");
  CHECK(body.at("prompt") == basic.text);
  CHECK(body.at("max_tokens") == 0);
  CHECK(body.at("echo") == true);
  CHECK(body.at("logprobs") == 1);
}

TEST_CASE("http provider reports unreachable endpoints") {
  HttpProvider provider(http_config("http://127.0.0.1:1", std::numbers::e));
  try {
    provider.score_text("hello");
    FAIL("expected ProviderUnreachable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::provider_unreachable);
  }
}
