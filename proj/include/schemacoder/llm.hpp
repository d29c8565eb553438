#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schemacoder/errors.hpp"
#include "schemacoder/prompts.hpp"
#include "schemacoder/util.hpp"

namespace schemacoder {

struct CompletionRequest {
    std::string prompt;
    std::size_t max_output_tokens = 1024;
    double temperature = 0.2;
    std::vector<std::string> stop_markers;
    PromptId purpose = PromptId::pattern;
};

struct BackendProfile {
    std::string name;
    std::size_t context_budget = 8192;
    bool supports_deterministic = false;
};

inline std::size_t count_tokens(std::string_view text) {
    return estimate_tokens(text);
}

class Backend {
public:
    virtual ~Backend() = default;
    virtual const BackendProfile& profile() const = 0;
    // Single attempt; retry policy lives in LlmClient. Throws BackendError.
    virtual std::string complete_once(const CompletionRequest& request) = 0;
};

// Canned replies keyed by prompt hash, plus an optional dynamic handler
// consulted on map misses. Test and fixture backend.
class ScriptedBackend : public Backend {
public:
    using Handler = std::function<std::optional<std::string>(const CompletionRequest&)>;

    explicit ScriptedBackend(BackendProfile profile = {"scripted", 32768, true});

    void add_reply(std::string_view prompt, std::string reply);
    void add_reply_for_hash(std::uint64_t prompt_hash, std::string reply);
    void set_handler(Handler handler);

    const BackendProfile& profile() const override { return profile_; }
    std::string complete_once(const CompletionRequest& request) override;

private:
    BackendProfile profile_;
    std::map<std::uint64_t, std::string> replies_;
    Handler handler_;
};

struct TranscriptRecord {
    std::uint64_t seq = 0;
    std::string purpose;
    std::string prompt_hash;
    std::string reply;
    std::int64_t requested_at_ms = 0;
    std::int64_t completed_at_ms = 0;
    int attempts = 1;
    bool failed = false;
};

std::string transcript_record_to_json(const TranscriptRecord& record);
std::vector<TranscriptRecord> load_transcript(const std::string& path);

// Append-only JSONL transcript writer; appends are serialized.
class TranscriptRecorder {
public:
    explicit TranscriptRecorder(std::string path);
    void append(TranscriptRecord record);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::mutex mutex_;
    std::uint64_t next_seq_ = 0;
};

// Serves replies recorded in a transcript, keyed by prompt hash.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const std::string& transcript_path,
                           BackendProfile profile = {"replay", 32768, true});

    const BackendProfile& profile() const override { return profile_; }
    std::string complete_once(const CompletionRequest& request) override;

private:
    BackendProfile profile_;
    std::map<std::uint64_t, std::string> replies_;
};

struct HttpBackendConfig {
    std::string endpoint;  // e.g. https://host[:port][/prefix]
    std::string api_key;
    std::string model;
    std::size_t context_budget = 128000;
    int timeout_seconds = 120;
};

// Reads SCHEMACODER_LLM_ENDPOINT / SCHEMACODER_LLM_KEY / SCHEMACODER_LLM_MODEL.
std::optional<HttpBackendConfig> http_config_from_env();

// Generic chat-completion client over HTTP.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    const BackendProfile& profile() const override { return profile_; }
    std::string complete_once(const CompletionRequest& request) override;

private:
    HttpBackendConfig config_;
    BackendProfile profile_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
};

struct LlmClientOptions {
    RetryPolicy retry;
    unsigned parallelism = 4;
    std::function<void(std::chrono::milliseconds)> sleeper;  // injectable for tests
    std::shared_ptr<TranscriptRecorder> recorder;
};

// Budget guard, retry with exponential backoff, transcript recording, and
// a parallelism cap around any Backend.
class LlmClient {
public:
    using Observer = std::function<void(const CompletionRequest&, const std::string& reply)>;

    LlmClient(std::shared_ptr<Backend> backend, LlmClientOptions options = {});

    std::string complete(const CompletionRequest& request);

    // Called with every successful (request, reply) pair; pass nullptr to
    // clear. Used by callers that keep their own raw-output records.
    void set_observer(Observer observer) { observer_ = std::move(observer); }

    const BackendProfile& profile() const { return backend_->profile(); }
    Backend& backend() { return *backend_; }

private:
    std::shared_ptr<Backend> backend_;
    LlmClientOptions options_;
    Observer observer_;
    std::mutex slots_mutex_;
    std::condition_variable slot_cv_;
    unsigned in_flight_ = 0;
};

struct TokenGroup {
    std::vector<std::size_t> indices;  // into the input sequence
    std::size_t total_tokens = 0;
    bool flagged_oversize = false;
};

// Greedy in-order packing under `limit` tokens; items larger than the
// limit become flagged singleton groups.
std::vector<TokenGroup> group_by_token_limit(const std::vector<std::string>& items,
                                             std::size_t limit);

}  // namespace schemacoder
