#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ecbsim/errors.hpp"

namespace ecbsim::provider {

/// One completion request. `context` is audit metadata (e.g. which conference
/// and run produced the request) and is not part of the cache key.
struct CompletionRequest {
    std::string model_id;
    std::string system_prompt;
    std::string user_message;
    double temperature = 1.0;  // [0, 2]
    int run_index = 0;         // distinguishes repeated runs of the same prompt
    std::string context;
};

struct CompletionResponse {
    std::string text;
    long latency_ms = 0;
    bool cached = false;
    std::string provider;
};

struct AuthError : Error {
    explicit AuthError(const std::string& detail)
        : Error(ErrorCategory::Provider, "authentication failure: " + detail) {}
};

struct RateLimitedError : Error {
    explicit RateLimitedError(int attempts)
        : Error(ErrorCategory::Provider,
                "rate limited after " + std::to_string(attempts) + " attempts") {}
};

struct TimeoutError : Error {
    explicit TimeoutError(const std::string& detail)
        : Error(ErrorCategory::Provider, "request timeout: " + detail) {}
};

/// Cache key over exactly (model_id, system_prompt, user_message,
/// temperature, run_index); requests differing only in run_index never
/// collide.
std::string request_cache_key(const CompletionRequest& request);

class Client {
public:
    virtual ~Client() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic offline mock
// ---------------------------------------------------------------------------

struct MockOptions {
    int population = 30;
    std::uint64_t seed = 0;  // extra entropy mixed into the generator
};

/// Offline stand-in for a hosted model. Analyst requests yield a complete
/// population x 3-tenor forecast markdown table whose rates are a pure
/// function of (transcript hash, trader index, tenor, run_index); the rate
/// spread per tenor scales with a transcript ambiguity score (count of
/// hedging words from a fixed list), so dispersion computed downstream is
/// monotone in that score. Judge-style requests (recognized by the JSON
/// output instruction) yield a well-formed verdict whose revised prompt is
/// the current prompt plus one guidance line.
///
/// Calibration hook: a prompt may carry a directive of the form
///   [calibration swap=a:b,c:d]
/// which transposes the listed ambiguity levels before the spread is
/// computed. Tests use it to script exact correlation outcomes through the
/// full pipeline.
class MockClient : public Client {
public:
    explicit MockClient(MockOptions options = {});
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "mock"; }

    /// Ambiguity score of a transcript: hedging-word count (capped at 100).
    static int ambiguity_score(const std::string& transcript);

private:
    MockOptions options_;
};

/// Replays a fixed list of responses in order, regardless of input. Used to
/// script judge behavior in tests. Throws ProviderError when exhausted.
class ScriptedClient : public Client {
public:
    explicit ScriptedClient(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return "scripted"; }

private:
    std::vector<std::string> responses_;
    size_t next_ = 0;
    std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Hosted vendors
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 4;
    int initial_backoff_ms = 250;
    double multiplier = 2.0;
    int max_backoff_ms = 4000;
};

enum class Vendor { OpenAi, Anthropic, Google };

Vendor vendor_from_name(const std::string& name);

struct HttpOptions {
    Vendor vendor = Vendor::OpenAi;
    std::string base_url;      // empty = vendor default; overridable for tests
    std::string api_key_env;   // empty = vendor default env variable
    RetryPolicy retry;
    int timeout_seconds = 120;
    int max_tokens = 8192;
    /// Global minimum spacing between requests through this client (a simple
    /// per-vendor rate limit); 0 disables.
    int min_request_interval_ms = 0;
};

/// One wire-format adapter per vendor behind the common interface. Missing
/// credentials fail with AuthError before any network I/O; 429 and 5xx are
/// retried with exponential backoff; provider-reported truncation fails
/// loudly rather than returning a partial table.
class HttpClient : public Client {
public:
    explicit HttpClient(HttpOptions options);
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override;

private:
    HttpOptions options_;
    std::mutex pace_mutex_;
    std::int64_t last_request_ms_ = 0;
};

// ---------------------------------------------------------------------------
// Caching and audit wrappers
// ---------------------------------------------------------------------------

/// JSON-lines append log keyed by a content hash; replays are exact.
/// Concurrent writers are serialized per process; identical keys overwrite
/// in-memory (last write wins), which is benign because entries for the same
/// key carry the same content for deterministic providers.
class ResponseCache {
public:
    explicit ResponseCache(std::string path);

    struct Entry {
        std::string text;
        std::string provider;
    };

    std::optional<Entry> lookup(const std::string& key_hash) const;
    void store(const std::string& key_hash, const std::string& request_digest,
               const std::string& text, const std::string& provider);

    size_t size() const;

private:
    std::string path_;
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
};

class CachingClient : public Client {
public:
    CachingClient(Client& inner, std::shared_ptr<ResponseCache> cache)
        : inner_(inner), cache_(std::move(cache)) {}
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return inner_.name(); }

private:
    Client& inner_;
    std::shared_ptr<ResponseCache> cache_;
};

struct RequestLogEntry {
    int seq = 0;
    std::string context;
    std::string model_id;
    double temperature = 0.0;
    int run_index = 0;
    std::string system_prompt;
    std::string user_message;
};

/// Records every request passing through (in order) for audit and hygiene
/// checks; optionally appends digests to a JSON-lines audit file.
class RecordingClient : public Client {
public:
    explicit RecordingClient(Client& inner, std::string audit_path = "");
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string name() const override { return inner_.name(); }

    std::vector<RequestLogEntry> snapshot() const;

private:
    Client& inner_;
    std::string audit_path_;
    mutable std::mutex mutex_;
    std::vector<RequestLogEntry> entries_;
};

/// Run fn(0..n-1) with at most `workers` threads. Results must be written to
/// preallocated slots by the callers; the first exception is rethrown after
/// all workers join. workers <= 1 degenerates to a serial loop.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn);

} // namespace ecbsim::provider
