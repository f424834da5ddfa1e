// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include "arsic/llm_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "arsic/error.hpp"
#include "httplib.h"

using nlohmann::json;

namespace arsic {

void LlmConfig::validate() const {
    if (endpoint.empty()) throw Error(ErrorCode::Config, "llm.endpoint must not be empty");
    if (!(timeout_s > 0)) throw Error(ErrorCode::Config, "llm.timeout_s must be positive");
    if (!(temperature >= 0)) throw Error(ErrorCode::Config, "llm.temperature must be non-negative");
    if (max_retries < 0) throw Error(ErrorCode::Config, "llm.max_retries must be non-negative");
    if (max_concurrency < 1) throw Error(ErrorCode::Config, "llm.max_concurrency must be at least 1");
}

// ---------------------------------------------------------------------------
// Transports

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "endpoint is not an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttplibTransport::post(const HttpRequest& request) {
    const auto [base, path] = split_url(request.url);
    httplib::Client client(base);
    const auto secs = static_cast<time_t>(request.timeout_s);
    const auto usecs = static_cast<time_t>((request.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto result = client.Post(path, headers, request.body, "application/json");
    if (!result) throw TransportFailure("request to " + request.url + " failed: " + httplib::to_string(result.error()));

    HttpResponse out;
    out.status = result->status;
    out.body = result->body;
    if (result->has_header("Retry-After")) {
        const auto value = result->get_header_value("Retry-After");
        char* end = nullptr;
        const double secs_after = std::strtod(value.c_str(), &end);
        if (end != value.c_str() && std::isfinite(secs_after) && secs_after >= 0) out.retry_after_s = secs_after;
    }
    return out;
}

MockTransport::MockTransport(const json& table) {
    if (!table.is_object()) throw Error(ErrorCode::SchemaViolation, "mock responses: expected an object");
    for (const auto& [key, value] : table.items()) {
        std::vector<std::string> replies;
        if (value.is_string()) {
            replies.push_back(value.get<std::string>());
        } else if (value.is_array() && !value.empty() &&
                   std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); })) {
            replies = value.get<std::vector<std::string>>();
        } else {
            throw Error(ErrorCode::SchemaViolation, "mock responses." + key + ": expected a string or list of strings");
        }
        table_.emplace(key, std::move(replies));
    }
}

std::shared_ptr<MockTransport> MockTransport::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open mock responses file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, "mock responses file " + path + ": " + e.what());
    }
    return std::make_shared<MockTransport>(doc);
}

HttpResponse MockTransport::post(const HttpRequest& request) {
    std::string reply;
    {
        std::lock_guard lock(mu_);
        auto it = table_.find(request.correlation_id);
        if (it == table_.end()) it = table_.find("*");
        if (it == table_.end()) {
            return HttpResponse{404, R"({"error":"no canned response for )" + request.correlation_id + "\"}", {}};
        }
        const std::size_t n = calls_[request.correlation_id]++;
        reply = it->second[std::min(n, it->second.size() - 1)];
    }
    const json body = {{"choices", json::array({{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply}}}}})}};
    return HttpResponse{200, body.dump(), {}};
}

std::size_t MockTransport::calls(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = calls_.find(key);
    return it == calls_.end() ? 0 : it->second;
}

std::shared_ptr<HttpTransport> make_transport(const LlmConfig& cfg) {
    if (cfg.is_mock()) return MockTransport::from_file(cfg.endpoint.substr(kMockPrefix.size()));
    return std::make_shared<HttplibTransport>();
}

// ---------------------------------------------------------------------------
// Client

ConcurrencyLimiter::ConcurrencyLimiter(int limit) : limit_(std::max(1, limit)) {}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --active_;
    }
    cv_.notify_one();
}

ChatClient::ChatClient(LlmConfig cfg, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); })),
      limiter_(cfg_.max_concurrency),
      rng_(cfg_.seed) {
    cfg_.validate();
}

json ChatClient::request_body(const PromptBundle& bundle, const LlmConfig& cfg) {
    json messages = json::array();
    for (const auto& m : bundle.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return json{{"model", cfg.model}, {"messages", std::move(messages)}, {"temperature", cfg.temperature}};
}

double ChatClient::backoff_seconds(int attempt) {
    double jitter = 0;
    {
        std::lock_guard lock(rng_mu_);
        jitter = std::uniform_real_distribution<double>(0.0, 0.5)(rng_);
    }
    const double base = cfg_.backoff_base_s * std::pow(2.0, attempt - 1);
    return std::min(cfg_.backoff_max_s, base * (1.0 + jitter));
}

RawResponse ChatClient::complete(const PromptBundle& bundle) {
    if (bundle.messages.empty()) throw Error(ErrorCode::Config, "prompt bundle has no messages");

    HttpRequest request;
    request.url = cfg_.endpoint;
    request.body = request_body(bundle, cfg_).dump();
    request.timeout_s = cfg_.timeout_s;
    request.correlation_id = bundle.target_image_id;
    request.headers.emplace_back("Content-Type", "application/json");
    if (!cfg_.api_key.empty()) request.headers.emplace_back("Authorization", "Bearer " + cfg_.api_key);

    const int max_attempts = cfg_.max_retries + 1;
    std::string last_failure;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        std::optional<double> wait_hint;
        HttpResponse response;
        bool got_response = false;

        limiter_.acquire();
        try {
            response = transport_->post(request);
            got_response = true;
        } catch (const TransportFailure& e) {
            last_failure = e.what();
        }
        limiter_.release();

        if (got_response) {
            const int status = response.status;
            if (status >= 200 && status < 300) {
                json doc;
                try {
                    doc = json::parse(response.body);
                } catch (const json::exception&) {
                    throw Error(ErrorCode::MalformedResponse, "response body is not JSON");
                }
                if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
                    throw Error(ErrorCode::MalformedResponse, "response has no choices");
                }
                const auto& choice = doc["choices"][0];
                if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
                    !choice["message"].contains("content") || !choice["message"]["content"].is_string()) {
                    throw Error(ErrorCode::MalformedResponse, "choices[0].message.content missing or not a string");
                }
                RawResponse out;
                out.text = choice["message"]["content"].get<std::string>();
                out.attempt_count = attempt;
                if (doc.contains("usage") && doc["usage"].is_object()) {
                    const auto& usage = doc["usage"];
                    if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_integer()) {
                        out.prompt_tokens = usage["prompt_tokens"].get<long long>();
                    }
                    if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_integer()) {
                        out.completion_tokens = usage["completion_tokens"].get<long long>();
                    }
                }
                return out;
            }
            if (status != 429 && status < 500) {
                throw Error(ErrorCode::HttpStatus, "endpoint answered HTTP " + std::to_string(status), status);
            }
            last_failure = "HTTP " + std::to_string(status);
            if (status == 429) wait_hint = response.retry_after_s;
        }

        if (attempt < max_attempts) {
            sleeper_(std::chrono::duration<double>(wait_hint.value_or(backoff_seconds(attempt))));
        }
    }
    throw Error(ErrorCode::Transport,
                "giving up after " + std::to_string(max_attempts) + " attempt(s): " + last_failure, max_attempts);
}

// ---------------------------------------------------------------------------
// Caption list parser

namespace {

class ListParser {
public:
    explicit ListParser(std::string_view src) : src_(src) {}

    std::vector<std::string> run() {
        pos_ = find_open_bracket();
        ++pos_;
        std::vector<std::string> items;
        skip_ws();
        if (at_end()) throw Error(ErrorCode::NoListFound, "list is never closed");
        if (peek() == ']') throw Error(ErrorCode::EmptyList, "the list has no captions");

        while (true) {
            skip_ws();
            if (at_end()) throw Error(ErrorCode::NoListFound, "list is never closed");
            if (peek() == ']') break;  // trailing comma
            items.push_back(element(items.size()));
            skip_ws();
            if (at_end()) throw Error(ErrorCode::NoListFound, "list is never closed");
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == ']') break;
            throw Error(ErrorCode::NonStringElement, "element " + std::to_string(items.size() - 1) + " is not a string",
                        static_cast<std::int64_t>(items.size() - 1));
        }
        return items;
    }

private:
    bool at_end() const { return pos_ >= src_.size(); }
    char peek() const { return src_[pos_]; }

    void skip_ws() {
        while (!at_end() && (peek() == ' ' || peek() == '\t' || peek() == '\n' || peek() == '\r')) ++pos_;
    }

    // The first '[' opens the list; prose and fence markers before it are skipped.
    std::size_t find_open_bracket() const {
        for (std::size_t i = 0; i < src_.size(); ++i) {
            if (src_[i] == '[') return i;
        }
        throw Error(ErrorCode::NoListFound, "no '[' in response");
    }

    std::string element(std::size_t index) {
        if (peek() != '"' && peek() != '\'') {
            throw Error(ErrorCode::NonStringElement, "element " + std::to_string(index) + " is not a string",
                        static_cast<std::int64_t>(index));
        }
        std::string value = literal();
        // Adjacent literals concatenate, as in Python.
        while (true) {
            const std::size_t save = pos_;
            skip_ws();
            if (!at_end() && (peek() == '"' || peek() == '\'')) {
                value += literal();
            } else {
                pos_ = save;
                break;
            }
        }
        return value;
    }

    std::string literal() {
        const std::size_t open = pos_;
        const char quote = src_[pos_++];
        std::string out;
        while (!at_end()) {
            const char c = src_[pos_++];
            if (c == quote) return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (at_end()) break;
            const char e = src_[pos_++];
            switch (e) {
                case '\\': out += '\\'; break;
                case '\'': out += '\''; break;
                case '"': out += '"'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default:
                    out += '\\';
                    out += e;
            }
        }
        throw Error(ErrorCode::UnterminatedString, "string starting at offset " + std::to_string(open) + " never ends",
                    static_cast<std::int64_t>(open));
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::string> parse_caption_list(std::string_view raw) { return ListParser(raw).run(); }

}  // namespace arsic
