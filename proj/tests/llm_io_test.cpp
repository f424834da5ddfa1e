// Copyright 2026 The ARSIC Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#include <atomic>
#include <deque>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "arsic/llm_io.hpp"
#include "test_util.hpp"

using namespace arsic;
using nlohmann::json;

namespace {

std::string envelope(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})},
                {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 5}}}}
        .dump();
}

/// Plays back a scripted sequence of outcomes; an empty optional means a transport failure.
class ScriptedTransport : public HttpTransport {
public:
    explicit ScriptedTransport(std::deque<std::optional<HttpResponse>> script) : script_(std::move(script)) {}

    HttpResponse post(const HttpRequest& request) override {
        last = request;
        ++calls;
        if (script_.empty()) throw TransportFailure("script exhausted");
        auto next = script_.front();
        if (script_.size() > 1) script_.pop_front();
        if (!next) throw TransportFailure("timed out");
        return *next;
    }

    HttpRequest last;
    int calls = 0;

private:
    std::deque<std::optional<HttpResponse>> script_;
};

/// Echoes the last user message back as a one-element list.
class EchoTransport : public HttpTransport {
public:
    HttpResponse post(const HttpRequest& request) override {
        const auto body = json::parse(request.body);
        const auto content = body["messages"].back()["content"].get<std::string>();
        return HttpResponse{200, envelope(render_caption_list(std::vector<std::string>{content})), {}};
    }
};

class SlowTransport : public HttpTransport {
public:
    HttpResponse post(const HttpRequest&) override {
        const int now = ++active;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --active;
        return HttpResponse{200, envelope(R"(["ok"])"), {}};
    }

    std::atomic<int> active{0};
    std::atomic<int> peak{0};
};

PromptBundle bundle(const std::string& id = "img") {
    return PromptBundle{{{Role::System, "sys"}, {Role::User, "scene"}}, id};
}

LlmConfig config(int retries = 3) {
    LlmConfig c;
    c.endpoint = "http://localhost:1/v1/chat/completions";
    c.max_retries = retries;
    c.api_key = "k";
    return c;
}

struct SleepLog {
    std::vector<double> waits;
    Sleeper sleeper() {
        return [this](std::chrono::duration<double> d) { waits.push_back(d.count()); };
    }
};

}  // namespace

TEST(ChatClient, EchoRoundTrip) {
    ChatClient client(config(), std::make_shared<EchoTransport>());
    const auto raw = client.complete(bundle());
    EXPECT_EQ(parse_caption_list(raw.text), std::vector<std::string>{"scene"});
    EXPECT_EQ(raw.attempt_count, 1);
    EXPECT_EQ(raw.prompt_tokens, 12);
    EXPECT_EQ(raw.completion_tokens, 5);
}

TEST(ChatClient, RequestShape) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{HttpResponse{200, envelope("[\"x\"]"), {}}});
    ChatClient client(config(), t);
    client.complete(bundle("P7"));
    const auto body = json::parse(t->last.body);
    EXPECT_EQ(body["model"], "gpt-3.5-turbo");
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(t->last.correlation_id, "P7");
    bool auth = false;
    for (const auto& [k, v] : t->last.headers) auth |= k == "Authorization" && v == "Bearer k";
    EXPECT_TRUE(auth);
}

TEST(ChatClient, RetriesRateLimitThenSucceeds) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{
        HttpResponse{429, "", std::nullopt}, HttpResponse{429, "", 2.0}, HttpResponse{200, envelope("[\"ok\"]"), {}}});
    SleepLog log;
    ChatClient client(config(), t, log.sleeper());
    const auto raw = client.complete(bundle());
    EXPECT_EQ(raw.attempt_count, 3);
    EXPECT_EQ(t->calls, 3);
    ASSERT_EQ(log.waits.size(), 2u);
    EXPECT_GE(log.waits[0], 0.5);
    EXPECT_LE(log.waits[0], 0.75);
    EXPECT_DOUBLE_EQ(log.waits[1], 2.0);  // Retry-After wins
}

TEST(ChatClient, ServerErrorsRetried) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{
        HttpResponse{503, "", {}}, std::nullopt, HttpResponse{200, envelope("[\"ok\"]"), {}}});
    SleepLog log;
    ChatClient client(config(), t, log.sleeper());
    EXPECT_EQ(client.complete(bundle()).attempt_count, 3);
    ASSERT_EQ(log.waits.size(), 2u);
    EXPECT_GE(log.waits[1], 1.0);  // exponential
    EXPECT_LE(log.waits[1], 1.5);
}

TEST(ChatClient, TimeoutWithoutRetriesIsTransportError) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{std::nullopt});
    SleepLog log;
    ChatClient client(config(0), t, log.sleeper());
    try {
        client.complete(bundle());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Transport);
        EXPECT_EQ(e.detail(), 1);
    }
    EXPECT_EQ(t->calls, 1);
    EXPECT_TRUE(log.waits.empty());
}

TEST(ChatClient, RetriesExhausted) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{HttpResponse{500, "", {}}});
    SleepLog log;
    ChatClient client(config(2), t, log.sleeper());
    try {
        client.complete(bundle());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Transport);
        EXPECT_EQ(e.detail(), 3);
    }
    EXPECT_EQ(t->calls, 3);
}

TEST(ChatClient, ClientErrorNotRetried) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{HttpResponse{401, "", {}}});
    ChatClient client(config(), t, SleepLog{}.sleeper());
    try {
        client.complete(bundle());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::HttpStatus);
        EXPECT_EQ(e.detail(), 401);
    }
    EXPECT_EQ(t->calls, 1);
}

TEST(ChatClient, MalformedResponses) {
    for (const std::string body : {"not json", R"({"choices":[]})", R"({"choices":[{"message":{"content":3}}]})"}) {
        auto t = std::make_shared<ScriptedTransport>(std::deque<std::optional<HttpResponse>>{HttpResponse{200, body, {}}});
        ChatClient client(config(), t);
        EXPECT_ARSIC_ERROR(client.complete(bundle()), ErrorCode::MalformedResponse);
    }
}

TEST(ChatClient, ConcurrencyBound) {
    auto t = std::make_shared<SlowTransport>();
    auto cfg = config();
    cfg.max_concurrency = 2;
    ChatClient client(cfg, t);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&] {
            for (int k = 0; k < 3; ++k) client.complete(bundle());
        });
    }
    threads.clear();
    EXPECT_LE(t->peak.load(), 2);
    EXPECT_GE(t->peak.load(), 1);
}

TEST(LlmConfig, Validation) {
    auto c = config();
    EXPECT_NO_THROW(c.validate());
    c.temperature = -0.1;
    EXPECT_ARSIC_ERROR(c.validate(), ErrorCode::Config);
    c = config();
    c.max_retries = -1;
    EXPECT_ARSIC_ERROR(c.validate(), ErrorCode::Config);
    c = config();
    c.max_concurrency = 0;
    EXPECT_ARSIC_ERROR(c.validate(), ErrorCode::Config);
}

TEST(MockTransport, SequencesAndFallback) {
    auto t = std::make_shared<MockTransport>(json::parse(R"({"a": ["first", "second"], "*": "any"})"));
    ChatClient client(config(), t);
    EXPECT_EQ(client.complete(bundle("a")).text, "first");
    EXPECT_EQ(client.complete(bundle("a")).text, "second");
    EXPECT_EQ(client.complete(bundle("a")).text, "second");
    EXPECT_EQ(client.complete(bundle("zzz")).text, "any");
    EXPECT_EQ(t->calls("a"), 3u);
    auto strict = std::make_shared<MockTransport>(json::parse(R"({"a": "x"})"));
    ChatClient c2(config(), strict);
    EXPECT_ARSIC_ERROR(c2.complete(bundle("b")), ErrorCode::HttpStatus);
    EXPECT_ARSIC_ERROR(MockTransport(json::parse(R"({"a": 1})")), ErrorCode::SchemaViolation);
}

TEST(ParseCaptionList, Examples) {
    EXPECT_EQ(parse_caption_list(R"(["a", "b"])"), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(parse_caption_list("Sure! Here you go:\n```python\n['x', \"y\",]\n```"),
              (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(parse_caption_list(R"(["it\'s", 'say "hi"', "a\\b", "n\nl"])"),
              (std::vector<std::string>{"it's", "say \"hi\"", "a\\b", "n\nl"}));
    EXPECT_EQ(parse_caption_list(R"(["one " "two"])"), std::vector<std::string>{"one two"});
    EXPECT_EQ(parse_caption_list(R"(["\q"])"), std::vector<std::string>{"\\q"});
}

TEST(ParseCaptionList, Errors) {
    EXPECT_ARSIC_ERROR(parse_caption_list("no list here"), ErrorCode::NoListFound);
    EXPECT_ARSIC_ERROR(parse_caption_list(R"(["a", "b")"), ErrorCode::NoListFound);
    EXPECT_ARSIC_ERROR(parse_caption_list("[]"), ErrorCode::EmptyList);
    EXPECT_ARSIC_ERROR(parse_caption_list("[ \n ]"), ErrorCode::EmptyList);
    try {
        parse_caption_list(R"(xx["a", "b)");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnterminatedString);
        EXPECT_EQ(e.detail(), 8);
    }
    try {
        parse_caption_list(R"(["a", 3])");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonStringElement);
        EXPECT_EQ(e.detail(), 1);
    }
}

TEST(ParseCaptionList, FuzzNeverCrashes) {
    std::mt19937_64 rng(53);
    const std::string alphabet = "[]'\"\\, abn\n\t#";
    for (int i = 0; i < 20000; ++i) {
        std::string s(rng() % 40, ' ');
        for (auto& c : s) c = rng() % 5 == 0 ? static_cast<char>(rng() % 256) : alphabet[rng() % alphabet.size()];
        try {
            const auto items = parse_caption_list(s);
            EXPECT_FALSE(items.empty());
        } catch (const Error& e) {
            const auto code = e.code();
            EXPECT_TRUE(code == ErrorCode::NoListFound || code == ErrorCode::UnterminatedString ||
                        code == ErrorCode::NonStringElement || code == ErrorCode::EmptyList);
        }
    }
}

TEST(ParseCaptionList, RenderRoundTrip) {
    std::mt19937_64 rng(59);
    const std::string alphabet = "abc XYZ'\"\\\n\t,[]";
    for (int i = 0; i < 5000; ++i) {
        std::vector<std::string> caps(1 + rng() % 5);
        for (auto& c : caps) {
            c.resize(rng() % 20);
            for (auto& ch : c) ch = alphabet[rng() % alphabet.size()];
        }
        ASSERT_EQ(parse_caption_list(render_caption_list(caps)), caps);
    }
}
