#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "schemacoder/llm.hpp"
#include "schemacoder/prompts.hpp"
#include "schemacoder/util.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace schemacoder;

namespace {

// Throws `transient_failures` transient errors before succeeding.
class FlakyBackend : public Backend {
public:
    explicit FlakyBackend(int transient_failures)
        : profile_{"flaky", 32768, true}, remaining_(transient_failures) {}

    const BackendProfile& profile() const override { return profile_; }

    std::string complete_once(const CompletionRequest& request) override {
        ++attempts;
        if (remaining_ > 0) {
            --remaining_;
            throw BackendError(BackendFault::transient, prompt_id_name(request.purpose),
                               "injected transport failure");
        }
        return "recovered";
    }

    int attempts = 0;

private:
    BackendProfile profile_;
    int remaining_;
};

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("scripted backend returns the exact canned reply") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->add_reply("what is up", "the canned answer");
    LlmClient client(backend);
    CompletionRequest request;
    request.prompt = "what is up";
    CHECK(client.complete(request) == "the canned answer");
}

TEST_CASE("scripted backend with no reply is a fatal BackendError") {
    LlmClient client(std::make_shared<ScriptedBackend>());
    CompletionRequest request;
    request.prompt = "never scripted";
    try {
        client.complete(request);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.fault() == BackendFault::fatal);
    }
}

TEST_CASE("prompt over the context budget fails before any backend call") {
    auto backend = std::make_shared<ScriptedBackend>(BackendProfile{"tiny", 1024, true});
    int handler_calls = 0;
    backend->set_handler([&](const CompletionRequest&) -> std::optional<std::string> {
        ++handler_calls;
        return "reply";
    });
    LlmClient client(backend);
    CompletionRequest request;
    request.prompt = std::string(8192, 'x');  // ~2048 tokens
    request.purpose = PromptId::merge;
    try {
        client.complete(request);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.fault() == BackendFault::budget_exceeded);
        CHECK(e.purpose() == "merge");
    }
    CHECK(handler_calls == 0);
}

TEST_CASE("empty prompt is rejected") {
    LlmClient client(std::make_shared<ScriptedBackend>());
    CompletionRequest request;
    CHECK_THROWS_AS(client.complete(request), BackendError);
}

TEST_CASE("temperature outside [0,2] is rejected") {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->add_reply("hi", "there");
    LlmClient client(backend);
    CompletionRequest request;
    request.prompt = "hi";
    request.temperature = 2.5;
    CHECK_THROWS_AS(client.complete(request), BackendError);
    request.temperature = -0.1;
    CHECK_THROWS_AS(client.complete(request), BackendError);
    request.temperature = 2.0;
    CHECK(client.complete(request) == "there");
}

TEST_CASE("five consecutive transient failures surface after the fifth attempt") {
    auto backend = std::make_shared<FlakyBackend>(5);
    LlmClientOptions options;
    std::vector<std::chrono::milliseconds> delays;
    options.sleeper = [&](std::chrono::milliseconds d) { delays.push_back(d); };
    LlmClient client(backend, options);
    CompletionRequest request;
    request.prompt = "hello";
    try {
        client.complete(request);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.fault() == BackendFault::transient);
    }
    CHECK(backend->attempts == 5);
    // Exponential backoff: 1s, 2s, 4s, 8s between the five attempts.
    REQUIRE(delays.size() == 4);
    CHECK(delays[0] == std::chrono::milliseconds(1000));
    CHECK(delays[1] == std::chrono::milliseconds(2000));
    CHECK(delays[2] == std::chrono::milliseconds(4000));
    CHECK(delays[3] == std::chrono::milliseconds(8000));
}

TEST_CASE("transient failures below the cap recover") {
    auto backend = std::make_shared<FlakyBackend>(3);
    LlmClientOptions options;
    options.sleeper = [](std::chrono::milliseconds) {};
    LlmClient client(backend, options);
    CompletionRequest request;
    request.prompt = "hello";
    CHECK(client.complete(request) == "recovered");
    CHECK(backend->attempts == 4);
}

TEST_CASE("count_tokens: trivial values") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("12345678") == 2);  // 8 bytes -> 2
    CHECK(count_tokens("123456789") == 3);
    CHECK(count_tokens("a") == 1);
}

TEST_CASE("count_tokens: concatenation subadditivity property") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::string a(rng.next_below(40), 'a');
        std::string b(rng.next_below(40), 'b');
        CHECK(count_tokens(a + b) <= count_tokens(a) + count_tokens(b) + 1);
        CHECK(count_tokens(a + b) >= count_tokens(a));
    }
}

TEST_CASE("group_by_token_limit: forced packing [10,10,10] under 25") {
    // 40-byte strings estimate to 10 tokens each.
    std::vector<std::string> items = {std::string(40, 'a'), std::string(40, 'b'),
                                      std::string(40, 'c')};
    auto groups = group_by_token_limit(items, 25);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].indices == std::vector<std::size_t>{0, 1});
    CHECK(groups[1].indices == std::vector<std::size_t>{2});
    CHECK_FALSE(groups[0].flagged_oversize);
}

TEST_CASE("group_by_token_limit: oversized item becomes a flagged singleton") {
    std::vector<std::string> items = {std::string(120, 'x')};  // 30 tokens
    auto groups = group_by_token_limit(items, 25);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].flagged_oversize);
    CHECK(groups[0].indices == std::vector<std::size_t>{0});
}

TEST_CASE("group_by_token_limit: random items keep order and respect the limit") {
    SplitMix64 rng(11);
    std::vector<std::string> items;
    for (int i = 0; i < 100; ++i) items.emplace_back(rng.next_below(300), 'x');
    const std::size_t limit = 40;
    auto groups = group_by_token_limit(items, limit);
    std::vector<std::size_t> flattened;
    for (const auto& group : groups) {
        if (!group.flagged_oversize) CHECK(group.total_tokens <= limit);
        for (std::size_t index : group.indices) flattened.push_back(index);
    }
    REQUIRE(flattened.size() == items.size());
    for (std::size_t i = 0; i < flattened.size(); ++i) CHECK(flattened[i] == i);
}

TEST_CASE("render_prompt: explore embeds both bindings verbatim") {
    std::string prompt = render_prompt(PromptId::explore, {{"background", "BACKGROUND-TEXT"},
                                                           {"chunk", "CHUNK-CONTENT"}});
    CHECK(prompt.find("BACKGROUND-TEXT") != std::string::npos);
    CHECK(prompt.find("CHUNK-CONTENT") != std::string::npos);
}

TEST_CASE("render_prompt: missing binding is TemplateError") {
    CHECK_THROWS_AS(render_prompt(PromptId::explore, {{"background", "x"}}), TemplateError);
}

TEST_CASE("render_prompt: pattern prompt embeds the rule-document contract") {
    std::string prompt = render_prompt(PromptId::pattern, {{"background", "bg"},
                                                           {"question", "q?"},
                                                           {"segments", "seg"}});
    CHECK(prompt.find(kRuleDocumentContract) != std::string::npos);
    CHECK(prompt.find("\"version\": 1, \"rules\"") != std::string::npos);
    // Two-step instruction: grouping first, then the expressions.
    CHECK(prompt.find("group the segment lines") != std::string::npos);
    CHECK(prompt.find("regular expression") != std::string::npos);
}

TEST_CASE("render_prompt: golden pattern prompt is stable") {
    std::string prompt = render_prompt(PromptId::pattern, {{"background", "B"},
                                                           {"question", "Q"},
                                                           {"segments", "S"}});
    const std::string expected = std::string("Background knowledge:\nB\n\nExploration question: Q\n\n") +
                                 "Selected log segments:\nS\n\n" +
                                 "First, group the segment lines by structural similarity. Then, " +
                                 "for each group, write one extraction rule: a regular expression " +
                                 "that matches those whole lines, plus the shared message template " +
                                 "with <*> marking each captured variable.\n" + kRuleDocumentContract;
    CHECK(prompt == expected);
}

TEST_CASE("render_prompt: determinism") {
    std::map<std::string, std::string> bindings = {{"background", "a"}, {"chunk", "b"}};
    CHECK(render_prompt(PromptId::explore, bindings) == render_prompt(PromptId::explore, bindings));
}

TEST_CASE("transcript: record then replay round-trips replies by prompt hash") {
    std::string path = temp_path("sc_test_transcript.jsonl");
    {
        auto backend = std::make_shared<ScriptedBackend>();
        backend->add_reply("prompt one", "reply one");
        backend->add_reply("prompt two", "reply two");
        LlmClientOptions options;
        options.recorder = std::make_shared<TranscriptRecorder>(path);
        LlmClient client(backend, options);
        CompletionRequest request;
        request.purpose = PromptId::select;
        request.prompt = "prompt one";
        client.complete(request);
        request.prompt = "prompt two";
        client.complete(request);
    }
    auto records = load_transcript(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].purpose == "select");
    CHECK(records[0].prompt_hash == hash_hex("prompt one"));
    CHECK(records[0].seq == 0);
    CHECK(records[1].seq == 1);

    auto replay = std::make_shared<ReplayBackend>(path);
    LlmClient client(replay);
    CompletionRequest request;
    request.prompt = "prompt two";
    CHECK(client.complete(request) == "reply two");
    request.prompt = "prompt one";
    CHECK(client.complete(request) == "reply one");
    request.prompt = "prompt three";
    CHECK_THROWS_AS(client.complete(request), BackendError);
    std::filesystem::remove(path);
}

TEST_CASE("purpose tags map to stable names") {
    CHECK(std::string(prompt_id_name(PromptId::explore)) == "explore");
    CHECK(prompt_id_from_name("boost") == PromptId::boost);
    CHECK_THROWS_AS(prompt_id_from_name("bogus"), TemplateError);
}
