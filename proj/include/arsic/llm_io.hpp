// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arsic/prompt.hpp"
#include "json.hpp"

namespace arsic {

inline constexpr const char* kApiKeyEnv = "ARSIC_API_KEY";
inline constexpr std::string_view kMockPrefix = "mock:";

struct LlmConfig {
    std::string endpoint;  // http(s) URL, or "mock:<responses.json>"
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.7;
    int max_retries = 3;
    double timeout_s = 60.0;
    int max_concurrency = 4;
    std::string api_key;
    std::uint64_t seed = 0;  // jitter RNG seed
    double backoff_base_s = 0.5;
    double backoff_max_s = 30.0;

    bool is_mock() const { return endpoint.starts_with(kMockPrefix); }
    /// Throws Config when a bound is violated.
    void validate() const;
};

struct RawResponse {
    std::string text;
    std::optional<long long> prompt_tokens;
    std::optional<long long> completion_tokens;
    int attempt_count = 1;
};

struct HttpRequest {
    std::string url;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
    double timeout_s = 60.0;
    std::string correlation_id;  // image id; routes canned responses in mock mode, never sent on the wire
};

struct HttpResponse {
    int status = 200;
    std::string body;
    std::optional<double> retry_after_s;
};

/// Timeouts and connection failures. Always retryable.
class TransportFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Returns any HTTP response (including error statuses); throws TransportFailure when none arrived.
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// Real network transport backed by cpp-httplib.
class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) override;
};

/// Canned-response table: {"<image_id>": "text" | ["first attempt", "second", ...], "*": fallback}.
/// Lists are consumed in order and the last entry repeats. Replies are wrapped in the
/// chat-completions response envelope so the client's decoding path is exercised.
class MockTransport final : public HttpTransport {
public:
    explicit MockTransport(const nlohmann::json& table);
    static std::shared_ptr<MockTransport> from_file(const std::string& path);

    HttpResponse post(const HttpRequest& request) override;
    std::size_t calls(const std::string& key) const;

private:
    std::map<std::string, std::vector<std::string>> table_;
    std::map<std::string, std::size_t> calls_;
    mutable std::mutex mu_;
};

std::shared_ptr<HttpTransport> make_transport(const LlmConfig& cfg);

/// Blocks while `limit` holders are active.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int limit);

    void acquire();
    void release();

private:
    int limit_;
    int active_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

class ChatClient {
public:
    ChatClient(LlmConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});

    /// Sends the bundle and returns choices[0].message.content. Retries timeouts, connection
    /// errors, 429 and 5xx with exponential backoff and jitter (Retry-After wins for 429).
    RawResponse complete(const PromptBundle& bundle);

    static nlohmann::json request_body(const PromptBundle& bundle, const LlmConfig& cfg);

    const LlmConfig& config() const { return cfg_; }

private:
    double backoff_seconds(int attempt);

    LlmConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    ConcurrencyLimiter limiter_;
    std::mutex rng_mu_;
    std::mt19937_64 rng_;
};

/// Extracts the first bracketed list of string literals from a model reply.
std::vector<std::string> parse_caption_list(std::string_view raw);

}  // namespace arsic
