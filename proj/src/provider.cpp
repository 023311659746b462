#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ecbsim/provider.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "ecbsim/digest.hpp"

namespace ecbsim::provider {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string iso_timestamp() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

std::string request_cache_key(const CompletionRequest& request) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.6f", request.temperature);
    std::string canonical = request.model_id;
    canonical += '\x1f';
    canonical += temp;
    canonical += '\x1f';
    canonical += std::to_string(request.run_index);
    canonical += '\x1f';
    canonical += request.system_prompt;
    canonical += '\x1f';
    canonical += request.user_message;
    return sha256_hex(canonical);
}

// ---------------------------------------------------------------------------
// MockClient
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& hedging_words() {
    static const std::vector<std::string> words = {
        "uncertain", "uncertainty", "may",       "might",     "could",
        "perhaps",   "possibly",    "unclear",   "ambiguous", "cautious",
        "risks",     "volatile",    "mixed",     "tentative", "conditional",
        "diverging", "hedged",      "unsettled",
    };
    return words;
}

/// Extract the target transcript block from a materialized prompt: text after
/// the last "transcript:\n" marker up to the historical-examples section (if
/// any). Falls back to the whole text.
std::string extract_transcript(const std::string& body) {
    const std::string marker = ") transcript:\n";
    size_t pos = body.find(marker);
    if (pos == std::string::npos) return body;
    size_t start = pos + marker.size();
    size_t end = body.find("\nHistorical Examples:", start);
    if (end == std::string::npos) end = body.size();
    return body.substr(start, end - start);
}

std::optional<std::string> extract_as_of_date(const std::string& body) {
    for (const std::string& marker : {std::string("as of "), std::string("Press conference (")}) {
        size_t pos = body.find(marker);
        if (pos == std::string::npos) continue;
        size_t start = pos + marker.size();
        if (start + 10 <= body.size()) {
            std::string candidate = body.substr(start, 10);
            if (candidate[4] == '-' && candidate[7] == '-') return candidate;
        }
    }
    return std::nullopt;
}

/// Parse "[calibration swap=a:b,c:d]" into transposition pairs.
std::vector<std::pair<int, int>> extract_swaps(const std::string& body) {
    std::vector<std::pair<int, int>> swaps;
    const std::string marker = "[calibration swap=";
    size_t pos = body.find(marker);
    if (pos == std::string::npos) return swaps;
    size_t end = body.find(']', pos);
    if (end == std::string::npos) return swaps;
    std::string list = body.substr(pos + marker.size(), end - pos - marker.size());
    size_t i = 0;
    while (i < list.size()) {
        size_t comma = list.find(',', i);
        std::string pair = list.substr(i, comma == std::string::npos ? std::string::npos
                                                                     : comma - i);
        size_t colon = pair.find(':');
        if (colon != std::string::npos) {
            try {
                swaps.emplace_back(std::stoi(pair.substr(0, colon)),
                                   std::stoi(pair.substr(colon + 1)));
            } catch (const std::exception&) {
                // malformed directive entry; skipped
            }
        }
        if (comma == std::string::npos) break;
        i = comma + 1;
    }
    return swaps;
}

} // namespace

MockClient::MockClient(MockOptions options) : options_(options) {}

int MockClient::ambiguity_score(const std::string& transcript) {
    int count = 0;
    std::string word;
    auto flush = [&]() {
        if (!word.empty()) {
            for (const auto& h : hedging_words()) {
                if (word == h) {
                    ++count;
                    break;
                }
            }
            word.clear();
        }
    };
    for (char c : transcript) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return std::min(count, 100);
}

CompletionResponse MockClient::complete(const CompletionRequest& request) {
    const std::string combined = request.system_prompt + "\n" + request.user_message;

    // judge-style request: answer with a well-formed verdict
    if (combined.find("Your output must be in JSON format") != std::string::npos) {
        std::string current;
        size_t a = combined.find("<<<PROMPT\n");
        size_t b = combined.find("\nPROMPT>>>");
        if (a != std::string::npos && b != std::string::npos && b > a) {
            current = combined.substr(a + 10, b - a - 10);
        }
        std::string revised =
            current +
            "\n- Let the spread of predictions widen when the transcript's language is "
            "ambiguous, hedged, or contains conflicting signals, and tighten when the "
            "guidance is clear.";
        json verdict{
            {"critique",
             "The prompt does not explicitly tie the ambiguity of the transcript to the "
             "dispersion of the traders' predictions."},
            {"revised_prompt", revised},
            {"reasoning",
             "Making the ambiguity-to-spread mapping explicit should raise the rank "
             "correlation between prediction dispersion and realized market volatility."}};
        return CompletionResponse{verdict.dump(2), 0, false, name()};
    }

    // analyst-style request: emit the full forecast table
    const std::string transcript = extract_transcript(combined);
    const std::string date = extract_as_of_date(combined).value_or("2000-01-01");

    int level = ambiguity_score(transcript);
    for (auto [x, y] : extract_swaps(combined)) {
        if (level == x) {
            level = y;
        } else if (level == y) {
            level = x;
        }
    }

    const std::uint64_t h =
        fnv1a(std::to_string(request.run_index), fnv1a(transcript, fnv1a(request.model_id,
                                                                         options_.seed ^
                                                                             0x9e3779b9ULL)));
    static const char* tenor_tokens[3] = {"3M", "2Y", "10Y"};
    static const double tenor_base[3] = {2.00, 2.50, 3.00};
    static const int tenor_mult[3] = {1, 2, 3};

    std::string out =
        "| Date | Trader ID | Tenor | Expected Direction | New Expected Rate (%) | Confidence "
        "(0-100) |\n"
        "|------|-----------|-------|--------------------|-----------------------|------------"
        "--------|\n";
    for (int trader = 0; trader < options_.population; ++trader) {
        for (int t = 0; t < 3; ++t) {
            // per-(tenor, run) base wobble in cents keeps run outputs distinct
            // without moving the cross-sectional spread
            const std::uint64_t hw = fnv1a(std::to_string(t), h);
            const double base =
                tenor_base[t] + (static_cast<double>(hw % 51) - 25.0) / 100.0;
            const double spread = 0.01 * level * tenor_mult[t];
            const int sign = trader % 2 == 0 ? 1 : -1;
            const double rate = base + sign * spread;
            const char* direction =
                spread == 0.0 ? "Unchanged" : (sign > 0 ? "Up" : "Down");
            const int confidence =
                50 + static_cast<int>((static_cast<std::uint64_t>(trader) * 7 +
                                       static_cast<std::uint64_t>(t) * 11 +
                                       static_cast<std::uint64_t>(level) * 3 +
                                       static_cast<std::uint64_t>(request.run_index)) %
                                      50);
            char row[160];
            std::snprintf(row, sizeof(row), "| %s | T%03d | %s | %s | %.2f | %d |\n",
                          date.c_str(), trader + 1, tenor_tokens[t], direction, rate,
                          confidence);
            out += row;
        }
    }
    return CompletionResponse{out, 0, false, name()};
}

CompletionResponse ScriptedClient::complete(const CompletionRequest&) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (next_ >= responses_.size())
        throw ProviderError("scripted provider exhausted after " +
                            std::to_string(responses_.size()) + " responses");
    return CompletionResponse{responses_[next_++], 0, false, name()};
}

// ---------------------------------------------------------------------------
// HttpClient
// ---------------------------------------------------------------------------

namespace {

struct VendorDefaults {
    const char* base_url;
    const char* api_key_env;
};

VendorDefaults vendor_defaults(Vendor v) {
    switch (v) {
        case Vendor::OpenAi: return {"https://api.openai.com", "OPENAI_API_KEY"};
        case Vendor::Anthropic: return {"https://api.anthropic.com", "ANTHROPIC_API_KEY"};
        case Vendor::Google:
            return {"https://generativelanguage.googleapis.com", "GOOGLE_API_KEY"};
    }
    return {"", ""};
}

const char* vendor_label(Vendor v) {
    switch (v) {
        case Vendor::OpenAi: return "openai";
        case Vendor::Anthropic: return "anthropic";
        case Vendor::Google: return "google";
    }
    return "?";
}

} // namespace

Vendor vendor_from_name(const std::string& name) {
    if (name == "openai") return Vendor::OpenAi;
    if (name == "anthropic") return Vendor::Anthropic;
    if (name == "google") return Vendor::Google;
    throw ValidationError("unknown provider vendor: '" + name + "'");
}

HttpClient::HttpClient(HttpOptions options) : options_(std::move(options)) {
    if (options_.base_url.empty()) options_.base_url = vendor_defaults(options_.vendor).base_url;
    if (options_.api_key_env.empty())
        options_.api_key_env = vendor_defaults(options_.vendor).api_key_env;
}

std::string HttpClient::name() const { return vendor_label(options_.vendor); }

CompletionResponse HttpClient::complete(const CompletionRequest& request) {
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
        throw AuthError("environment variable " + options_.api_key_env + " is not set");

    // build vendor-specific path, headers and body
    std::string path;
    httplib::Headers headers;
    json body;
    switch (options_.vendor) {
        case Vendor::OpenAi: {
            path = "/v1/chat/completions";
            headers.emplace("Authorization", std::string("Bearer ") + key);
            json messages = json::array();
            if (!request.system_prompt.empty())
                messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
            messages.push_back({{"role", "user"}, {"content", request.user_message}});
            body = {{"model", request.model_id},
                    {"messages", messages},
                    {"temperature", request.temperature}};
            break;
        }
        case Vendor::Anthropic: {
            path = "/v1/messages";
            headers.emplace("x-api-key", key);
            headers.emplace("anthropic-version", "2023-06-01");
            body = {{"model", request.model_id},
                    {"max_tokens", options_.max_tokens},
                    {"temperature", request.temperature},
                    {"messages",
                     json::array({{{"role", "user"}, {"content", request.user_message}}})}};
            if (!request.system_prompt.empty()) body["system"] = request.system_prompt;
            break;
        }
        case Vendor::Google: {
            path = "/v1beta/models/" + request.model_id + ":generateContent";
            headers.emplace("x-goog-api-key", key);
            body = {{"contents",
                     json::array({{{"role", "user"},
                                   {"parts", json::array({{{"text", request.user_message}}})}}})},
                    {"generationConfig", {{"temperature", request.temperature}}}};
            if (!request.system_prompt.empty())
                body["system_instruction"] = {
                    {"parts", json::array({{{"text", request.system_prompt}}})}};
            break;
        }
    }
    const std::string payload = body.dump();

    httplib::Client http(options_.base_url);
    http.set_connection_timeout(options_.timeout_seconds, 0);
    http.set_read_timeout(options_.timeout_seconds, 0);
    http.set_write_timeout(options_.timeout_seconds, 0);

    int backoff = options_.retry.initial_backoff_ms;
    std::string last_error;
    int last_status = 0;
    for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
        if (options_.min_request_interval_ms > 0) {
            std::lock_guard<std::mutex> lock(pace_mutex_);
            std::int64_t now = now_ms();
            std::int64_t wait = last_request_ms_ + options_.min_request_interval_ms - now;
            if (wait > 0) std::this_thread::sleep_for(std::chrono::milliseconds(wait));
            last_request_ms_ = now_ms();
        }

        auto started = now_ms();
        httplib::Result res = http.Post(path, headers, payload, "application/json");
        long latency = static_cast<long>(now_ms() - started);

        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write) {
                last_error = httplib::to_string(err);
                last_status = -1;
            } else {
                throw ProviderError("connection failed: " + httplib::to_string(err));
            }
        } else if (res->status == 401 || res->status == 403) {
            throw AuthError("provider rejected credentials (status " +
                            std::to_string(res->status) + ")");
        } else if (res->status == 429 || res->status >= 500) {
            last_error = res->body;
            last_status = res->status;
        } else if (res->status != 200) {
            throw ProviderError(res->status, res->body);
        } else {
            json resp = json::parse(res->body, nullptr, false);
            if (resp.is_discarded())
                throw ProviderError("provider returned unparseable JSON body");
            std::string text;
            try {
                switch (options_.vendor) {
                    case Vendor::OpenAi: {
                        const auto& choice = resp.at("choices").at(0);
                        if (choice.value("finish_reason", "") == "length")
                            throw ProviderError("response truncated (finish_reason=length)");
                        text = choice.at("message").at("content").get<std::string>();
                        break;
                    }
                    case Vendor::Anthropic: {
                        if (resp.value("stop_reason", "") == "max_tokens")
                            throw ProviderError("response truncated (stop_reason=max_tokens)");
                        text = resp.at("content").at(0).at("text").get<std::string>();
                        break;
                    }
                    case Vendor::Google: {
                        const auto& cand = resp.at("candidates").at(0);
                        if (cand.value("finishReason", "") == "MAX_TOKENS")
                            throw ProviderError("response truncated (finishReason=MAX_TOKENS)");
                        text = cand.at("content").at("parts").at(0).at("text")
                                   .get<std::string>();
                        break;
                    }
                }
            } catch (const json::exception& e) {
                throw ProviderError(std::string("unexpected response shape: ") + e.what());
            }
            if (text.empty()) throw ProviderError("provider returned an empty completion");
            return CompletionResponse{text, latency, false, name()};
        }

        if (attempt < options_.retry.max_attempts) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff = std::min(static_cast<int>(backoff * options_.retry.multiplier),
                               options_.retry.max_backoff_ms);
        }
    }

    if (last_status == 429) throw RateLimitedError(options_.retry.max_attempts);
    if (last_status == -1) throw TimeoutError(last_error);
    throw ProviderError(last_status, last_error);
}

// ---------------------------------------------------------------------------
// ResponseCache / CachingClient
// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // fresh cache
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) continue;  // torn write; ignore
        if (!rec.contains("key_hash") || !rec.contains("text")) continue;
        entries_[rec["key_hash"].get<std::string>()] =
            Entry{rec["text"].get<std::string>(), rec.value("provider", "")};
    }
}

std::optional<ResponseCache::Entry> ResponseCache::lookup(const std::string& key_hash) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key_hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::store(const std::string& key_hash, const std::string& request_digest,
                          const std::string& text, const std::string& provider) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[key_hash] = Entry{text, provider};
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to cache file: " + path_);
    json rec{{"key_hash", key_hash},
             {"request_digest", request_digest},
             {"text", text},
             {"timestamp", iso_timestamp()},
             {"provider", provider}};
    out << rec.dump() << "\n";
}

size_t ResponseCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

CompletionResponse CachingClient::complete(const CompletionRequest& request) {
    const std::string key = request_cache_key(request);
    if (auto hit = cache_->lookup(key)) {
        return CompletionResponse{hit->text, 0, true, hit->provider};
    }
    CompletionResponse fresh = inner_.complete(request);
    cache_->store(key, short_digest(request.system_prompt + request.user_message, 16),
                  fresh.text, fresh.provider);
    return fresh;
}

// ---------------------------------------------------------------------------
// RecordingClient
// ---------------------------------------------------------------------------

RecordingClient::RecordingClient(Client& inner, std::string audit_path)
    : inner_(inner), audit_path_(std::move(audit_path)) {}

CompletionResponse RecordingClient::complete(const CompletionRequest& request) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        RequestLogEntry e;
        e.seq = static_cast<int>(entries_.size()) + 1;
        e.context = request.context;
        e.model_id = request.model_id;
        e.temperature = request.temperature;
        e.run_index = request.run_index;
        e.system_prompt = request.system_prompt;
        e.user_message = request.user_message;
        entries_.push_back(e);
        if (!audit_path_.empty()) {
            std::ofstream out(audit_path_, std::ios::app);
            if (out) {
                json rec{{"seq", e.seq},
                         {"context", e.context},
                         {"model_id", e.model_id},
                         {"temperature", e.temperature},
                         {"run_index", e.run_index},
                         {"prompt_sha", short_digest(e.system_prompt + e.user_message, 16)}};
                out << rec.dump() << "\n";
            }
        }
    }
    return inner_.complete(request);
}

std::vector<RequestLogEntry> RecordingClient::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
}

// ---------------------------------------------------------------------------
// parallel_for
// ---------------------------------------------------------------------------

void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t thread_count = std::min(static_cast<size_t>(workers), n);
    std::atomic<size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (size_t w = 0; w < thread_count; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace ecbsim::provider
