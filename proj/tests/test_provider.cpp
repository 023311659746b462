#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "ecbsim/dispersion.hpp"
#include "ecbsim/parsing.hpp"
#include "ecbsim/provider.hpp"
#include "testutil.hpp"

using namespace ecbsim;
using namespace ecbsim::provider;
using nlohmann::json;

namespace {

CompletionRequest analyst_request(const std::string& transcript, int run_index = 0) {
    CompletionRequest req;
    req.model_id = "analyst-default";
    req.user_message = "Simulate the traders.\n- Use only the information available as of "
                       "2022-07-21.\n\nPress conference (2022-07-21) transcript:\n" +
                       transcript + "\n";
    req.temperature = 1.0;
    req.run_index = run_index;
    return req;
}

} // namespace

TEST_CASE("mock emits a complete, parseable population x tenor table") {
    MockClient mock(MockOptions{30, 0});
    auto resp = mock.complete(analyst_request(testutil::transcript_with_level(5)));
    CHECK_FALSE(resp.cached);
    CHECK(resp.provider == "mock");

    auto report = parsing::parse_forecast_table(resp.text, Date::parse_iso("2022-07-21"), 30);
    CHECK(report.records.size() == 90);
    CHECK(report.anomalies.empty());
}

TEST_CASE("mock is deterministic and run_index perturbs it") {
    MockClient mock(MockOptions{30, 0});
    auto a1 = mock.complete(analyst_request(testutil::transcript_with_level(5), 0));
    auto a2 = mock.complete(analyst_request(testutil::transcript_with_level(5), 0));
    auto b = mock.complete(analyst_request(testutil::transcript_with_level(5), 1));
    CHECK(a1.text == a2.text);
    CHECK(a1.text != b.text);
}

TEST_CASE("mock dispersion scales with transcript ambiguity") {
    MockClient mock(MockOptions{30, 0});
    auto low = mock.complete(analyst_request(testutil::transcript_with_level(2)));
    auto high = mock.complete(analyst_request(testutil::transcript_with_level(10)));
    Date d = Date::parse_iso("2022-07-21");
    auto rep_low = parsing::parse_forecast_table(low.text, d, 30);
    auto rep_high = parsing::parse_forecast_table(high.text, d, 30);
    for (corpus::Tenor t : corpus::kAllTenors) {
        double s_low = dispersion::cross_sectional_std(rep_low.records, t);
        double s_high = dispersion::cross_sectional_std(rep_high.records, t);
        CHECK(s_high > s_low);
    }
}

TEST_CASE("mock ambiguity score counts hedging words") {
    CHECK(MockClient::ambiguity_score("clear statement with firm guidance") == 0);
    CHECK(MockClient::ambiguity_score("perhaps perhaps could happen, Perhaps.") == 4);
    CHECK(MockClient::ambiguity_score(testutil::transcript_with_level(17)) == 17);
}

TEST_CASE("mock calibration directive remaps levels") {
    MockClient mock(MockOptions{30, 0});
    Date d = Date::parse_iso("2022-07-21");

    auto plain = analyst_request(testutil::transcript_with_level(2));
    auto swapped = plain;
    swapped.user_message += "\n[calibration swap=2:10]\n";
    auto ten = analyst_request(testutil::transcript_with_level(10));

    auto rep_swapped = parsing::parse_forecast_table(mock.complete(swapped).text, d, 30);
    auto rep_ten = parsing::parse_forecast_table(mock.complete(ten).text, d, 30);
    for (corpus::Tenor t : corpus::kAllTenors) {
        CHECK(dispersion::cross_sectional_std(rep_swapped.records, t) ==
              doctest::Approx(dispersion::cross_sectional_std(rep_ten.records, t))
                  .epsilon(1e-12));
    }
}

TEST_CASE("mock answers judge-style requests with a valid verdict") {
    MockClient mock(MockOptions{30, 0});
    CompletionRequest req;
    req.model_id = "judge-default";
    req.system_prompt = "You are a prompt optimizer. Your output must be in JSON format.";
    req.user_message = "Current Analyst Prompt:\n<<<PROMPT\nthe current prompt "
                       "body\nPROMPT>>>\n\nMost recent performance: 0.47";
    req.temperature = 0.0;
    auto verdict = parsing::parse_judge_verdict(mock.complete(req).text);
    CHECK(verdict.revised_prompt.find("the current prompt body") != std::string::npos);
    CHECK_FALSE(verdict.critique.empty());
    CHECK_FALSE(verdict.reasoning.empty());
}

TEST_CASE("scripted client replays in order and exhausts loudly") {
    ScriptedClient scripted({"first", "second"});
    CompletionRequest req;
    CHECK(scripted.complete(req).text == "first");
    CHECK(scripted.complete(req).text == "second");
    CHECK_THROWS_AS(scripted.complete(req), ProviderError);
}

TEST_CASE("cache keys separate run indices and serve replays") {
    testutil::TempDir tmp("cache");
    auto r0 = analyst_request(testutil::transcript_with_level(3), 0);
    auto r1 = analyst_request(testutil::transcript_with_level(3), 1);
    CHECK(request_cache_key(r0) != request_cache_key(r1));
    CHECK(request_cache_key(r0) == request_cache_key(r0));

    MockClient mock(MockOptions{30, 0});
    auto cache = std::make_shared<ResponseCache>(tmp.file("cache.jsonl"));
    CachingClient cached(mock, cache);

    auto first = cached.complete(r0);
    auto second = cached.complete(r0);
    CHECK_FALSE(first.cached);
    CHECK(second.cached);
    CHECK(first.text == second.text);

    auto other = cached.complete(r1);
    CHECK_FALSE(other.cached);  // different run_index never collides
    CHECK(other.text != first.text);

    SUBCASE("replays survive a reload from disk") {
        auto cache2 = std::make_shared<ResponseCache>(tmp.file("cache.jsonl"));
        CHECK(cache2->size() == 2);
        ScriptedClient exhausted({});  // upstream would fail if consulted
        CachingClient replay(exhausted, cache2);
        auto again = replay.complete(r0);
        CHECK(again.cached);
        CHECK(again.text == first.text);
    }
}

TEST_CASE("recording client captures request order and metadata") {
    MockClient mock(MockOptions{6, 0});
    RecordingClient recorded(mock);
    auto req = analyst_request(testutil::transcript_with_level(1));
    req.context = "sim:zero-shot:2022-07-21:run0";
    recorded.complete(req);
    req.context = "sim:zero-shot:2022-07-21:run1";
    req.run_index = 1;
    recorded.complete(req);

    auto log = recorded.snapshot();
    REQUIRE(log.size() == 2);
    CHECK(log[0].seq == 1);
    CHECK(log[0].context == "sim:zero-shot:2022-07-21:run0");
    CHECK(log[1].run_index == 1);
}

TEST_CASE("credentialless hosted call fails before any network use") {
    unsetenv("ECBSIM_TEST_MISSING_KEY");
    HttpOptions opts;
    opts.vendor = Vendor::OpenAi;
    opts.base_url = "http://127.0.0.1:1";  // nothing listens here; must not matter
    opts.api_key_env = "ECBSIM_TEST_MISSING_KEY";
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "gpt-test";
    req.user_message = "hello";
    CHECK_THROWS_AS(client.complete(req), AuthError);
}

namespace {

struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    TestServer() = default;
    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this]() { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~TestServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

} // namespace

TEST_CASE("openai adapter: wire format, retry on 429, truncation") {
    setenv("ECBSIM_TEST_KEY", "sk-test", 1);
    TestServer ts;
    std::atomic<int> attempts{0};
    json seen_body;
    std::string seen_auth;
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request& req, httplib::Response& res) {
                       int n = ++attempts;
                       seen_body = json::parse(req.body);
                       seen_auth = req.get_header_value("Authorization");
                       if (n <= 2) {
                           res.status = 429;
                           res.set_content("slow down", "text/plain");
                           return;
                       }
                       json reply{{"choices",
                                   json::array({{{"finish_reason", "stop"},
                                                 {"message", {{"content", "| table |"}}}}})}};
                       res.set_content(reply.dump(), "application/json");
                   });
    ts.server.Post("/v1/truncated", [](const httplib::Request&, httplib::Response&) {});
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::OpenAi;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY";
    opts.retry.initial_backoff_ms = 1;
    opts.retry.max_attempts = 4;
    HttpClient client(opts);

    CompletionRequest req;
    req.model_id = "gpt-test";
    req.system_prompt = "system text";
    req.user_message = "user text";
    req.temperature = 0.7;

    auto resp = client.complete(req);
    CHECK(resp.text == "| table |");
    CHECK(resp.provider == "openai");
    CHECK(attempts == 3);  // two 429s then success
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_body["model"] == "gpt-test");
    CHECK(seen_body["temperature"].get<double>() == doctest::Approx(0.7));
    REQUIRE(seen_body["messages"].size() == 2);
    CHECK(seen_body["messages"][0]["role"] == "system");
    CHECK(seen_body["messages"][1]["content"] == "user text");
}

TEST_CASE("openai adapter: rate limit exhaustion and truncation failures") {
    setenv("ECBSIM_TEST_KEY", "sk-test", 1);
    TestServer ts;
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request&, httplib::Response& res) {
                       res.status = 429;
                       res.set_content("limit", "text/plain");
                   });
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::OpenAi;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY";
    opts.retry.initial_backoff_ms = 1;
    opts.retry.max_attempts = 3;
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "gpt-test";
    req.user_message = "u";
    CHECK_THROWS_AS(client.complete(req), RateLimitedError);
}

TEST_CASE("openai adapter: provider-reported truncation fails loudly") {
    setenv("ECBSIM_TEST_KEY", "sk-test", 1);
    TestServer ts;
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request&, httplib::Response& res) {
                       json reply{{"choices",
                                   json::array({{{"finish_reason", "length"},
                                                 {"message", {{"content", "partial"}}}}})}};
                       res.set_content(reply.dump(), "application/json");
                   });
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::OpenAi;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY";
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "gpt-test";
    req.user_message = "u";
    CHECK_THROWS_WITH_AS(client.complete(req),
                         doctest::Contains("truncated"), ProviderError);
}

TEST_CASE("anthropic adapter: headers and response shape") {
    setenv("ECBSIM_TEST_KEY2", "ak-test", 1);
    TestServer ts;
    std::string seen_key, seen_version;
    json seen_body;
    ts.server.Post("/v1/messages", [&](const httplib::Request& req, httplib::Response& res) {
        seen_key = req.get_header_value("x-api-key");
        seen_version = req.get_header_value("anthropic-version");
        seen_body = json::parse(req.body);
        json reply{{"stop_reason", "end_turn"},
                   {"content", json::array({{{"type", "text"}, {"text", "claude says"}}})}};
        res.set_content(reply.dump(), "application/json");
    });
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::Anthropic;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY2";
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "claude-test";
    req.system_prompt = "sys";
    req.user_message = "u";
    req.temperature = 0.0;

    auto resp = client.complete(req);
    CHECK(resp.text == "claude says");
    CHECK(resp.provider == "anthropic");
    CHECK(seen_key == "ak-test");
    CHECK(seen_version == "2023-06-01");
    CHECK(seen_body["system"] == "sys");
    CHECK(seen_body["max_tokens"].get<int>() > 0);
}

TEST_CASE("google adapter: path, header key and response shape") {
    setenv("ECBSIM_TEST_KEY3", "gk-test", 1);
    TestServer ts;
    std::string seen_key;
    json seen_body;
    ts.server.Post("/v1beta/models/gemini-test:generateContent",
                   [&](const httplib::Request& req, httplib::Response& res) {
                       seen_key = req.get_header_value("x-goog-api-key");
                       seen_body = json::parse(req.body);
                       json reply{{"candidates",
                                   json::array({{{"finishReason", "STOP"},
                                                 {"content",
                                                  {{"parts", json::array({{{"text",
                                                                            "gemini says"}}})}}}}})}};
                       res.set_content(reply.dump(), "application/json");
                   });
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::Google;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY3";
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "gemini-test";
    req.system_prompt = "sys";
    req.user_message = "u";

    auto resp = client.complete(req);
    CHECK(resp.text == "gemini says");
    CHECK(seen_key == "gk-test");
    CHECK(seen_body.contains("system_instruction"));
    CHECK(seen_body["contents"][0]["parts"][0]["text"] == "u");
}

TEST_CASE("server errors propagate after retries") {
    setenv("ECBSIM_TEST_KEY", "sk-test", 1);
    TestServer ts;
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request&, httplib::Response& res) {
                       res.status = 503;
                       res.set_content("down", "text/plain");
                   });
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::OpenAi;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY";
    opts.retry.initial_backoff_ms = 1;
    opts.retry.max_attempts = 2;
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "gpt-test";
    req.user_message = "u";
    CHECK_THROWS_AS(client.complete(req), ProviderError);
}

TEST_CASE("auth rejection from the provider maps to AuthError") {
    setenv("ECBSIM_TEST_KEY", "bad-key", 1);
    TestServer ts;
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request&, httplib::Response& res) {
                       res.status = 401;
                       res.set_content("bad key", "text/plain");
                   });
    ts.start();

    HttpOptions opts;
    opts.vendor = Vendor::OpenAi;
    opts.base_url = ts.url();
    opts.api_key_env = "ECBSIM_TEST_KEY";
    HttpClient client(opts);
    CompletionRequest req;
    req.model_id = "gpt-test";
    req.user_message = "u";
    CHECK_THROWS_AS(client.complete(req), AuthError);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
    std::vector<std::atomic<int>> hits(100);
    for (auto& h : hits) h = 0;
    parallel_for(100, 4, [&](size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h == 1);

    CHECK_THROWS_AS(parallel_for(10, 4,
                                 [&](size_t i) {
                                     if (i == 7) throw ValidationError("boom");
                                 }),
                    ValidationError);
}

TEST_CASE("concurrent cached completes agree byte-for-byte") {
    testutil::TempDir tmp("cache");
    MockClient mock(MockOptions{30, 0});
    auto cache = std::make_shared<ResponseCache>(tmp.file("cache.jsonl"));
    CachingClient cached(mock, cache);

    auto req = analyst_request(testutil::transcript_with_level(4));
    std::vector<std::string> texts(8);
    parallel_for(8, 4, [&](size_t i) { texts[i] = cached.complete(req).text; });
    for (size_t i = 1; i < texts.size(); ++i) CHECK(texts[i] == texts[0]);
    CHECK(cache->size() == 1);
}
