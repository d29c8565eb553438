#include "schemacoder/llm.hpp"

#ifdef SCHEMACODER_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <nlohmann/json.hpp>

#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace schemacoder {

using nlohmann::json;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

ScriptedBackend::ScriptedBackend(BackendProfile profile) : profile_(std::move(profile)) {}

void ScriptedBackend::add_reply(std::string_view prompt, std::string reply) {
    replies_[fnv1a64(prompt)] = std::move(reply);
}

void ScriptedBackend::add_reply_for_hash(std::uint64_t prompt_hash, std::string reply) {
    replies_[prompt_hash] = std::move(reply);
}

void ScriptedBackend::set_handler(Handler handler) {
    handler_ = std::move(handler);
}

std::string ScriptedBackend::complete_once(const CompletionRequest& request) {
    auto it = replies_.find(fnv1a64(request.prompt));
    if (it != replies_.end()) return it->second;
    if (handler_) {
        if (auto reply = handler_(request)) return *reply;
    }
    throw BackendError(BackendFault::fatal, prompt_id_name(request.purpose),
                       "scripted backend has no reply for prompt hash " + hash_hex(request.prompt));
}

std::string transcript_record_to_json(const TranscriptRecord& record) {
    json doc;
    doc["seq"] = record.seq;
    doc["purpose"] = record.purpose;
    doc["prompt_hash"] = record.prompt_hash;
    doc["reply"] = record.reply;
    doc["requested_at_ms"] = record.requested_at_ms;
    doc["completed_at_ms"] = record.completed_at_ms;
    doc["attempts"] = record.attempts;
    doc["failed"] = record.failed;
    return doc.dump();
}

std::vector<TranscriptRecord> load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open transcript: " + path);
    std::vector<TranscriptRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("transcript " + path + " line " + std::to_string(line_no) +
                              ": " + e.what());
        }
        TranscriptRecord record;
        record.seq = doc.value("seq", 0ull);
        record.purpose = doc.value("purpose", "");
        record.prompt_hash = doc.value("prompt_hash", "");
        record.reply = doc.value("reply", "");
        record.requested_at_ms = doc.value("requested_at_ms", 0);
        record.completed_at_ms = doc.value("completed_at_ms", 0);
        record.attempts = doc.value("attempts", 1);
        record.failed = doc.value("failed", false);
        records.push_back(std::move(record));
    }
    return records;
}

TranscriptRecorder::TranscriptRecorder(std::string path) : path_(std::move(path)) {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create transcript: " + path_);
}

void TranscriptRecorder::append(TranscriptRecord record) {
    std::lock_guard<std::mutex> lock(mutex_);
    record.seq = next_seq_++;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to transcript: " + path_);
    out << transcript_record_to_json(record) << '\n';
}

ReplayBackend::ReplayBackend(const std::string& transcript_path, BackendProfile profile)
    : profile_(std::move(profile)) {
    for (const auto& record : load_transcript(transcript_path)) {
        if (record.failed) continue;
        std::uint64_t hash = std::strtoull(record.prompt_hash.c_str(), nullptr, 16);
        replies_[hash] = record.reply;
    }
}

std::string ReplayBackend::complete_once(const CompletionRequest& request) {
    auto it = replies_.find(fnv1a64(request.prompt));
    if (it == replies_.end()) {
        throw BackendError(BackendFault::fatal, prompt_id_name(request.purpose),
                           "transcript has no reply for prompt hash " + hash_hex(request.prompt));
    }
    return it->second;
}

std::optional<HttpBackendConfig> http_config_from_env() {
    const char* endpoint = std::getenv("SCHEMACODER_LLM_ENDPOINT");
    const char* key = std::getenv("SCHEMACODER_LLM_KEY");
    const char* model = std::getenv("SCHEMACODER_LLM_MODEL");
    if (!endpoint || !*endpoint || !model || !*model) return std::nullopt;
    HttpBackendConfig config;
    config.endpoint = endpoint;
    config.api_key = key ? key : "";
    config.model = model;
    return config;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    profile_.name = "http:" + config_.model;
    profile_.context_budget = config_.context_budget;
    profile_.supports_deterministic = false;
}

std::string HttpBackend::complete_once(const CompletionRequest& request) {
    const std::string purpose = prompt_id_name(request.purpose);

    std::string base = config_.endpoint;
    std::string path_prefix;
    std::size_t scheme = base.find("://");
    std::size_t path_start = scheme == std::string::npos ? base.find('/') : base.find('/', scheme + 3);
    if (path_start != std::string::npos) {
        path_prefix = base.substr(path_start);
        base = base.substr(0, path_start);
        while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
    }

    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    if (!request.stop_markers.empty()) body["stop"] = request.stop_markers;

    httplib::Client client(base);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(path_prefix + "/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) {
        throw BackendError(BackendFault::transient, purpose,
                           "transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw BackendError(BackendFault::transient, purpose,
                           "backend returned status " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw BackendError(BackendFault::fatal, purpose,
                           "backend returned status " + std::to_string(res->status) + ": " + res->body);
    }
    try {
        json doc = json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(BackendFault::fatal, purpose,
                           std::string("malformed completion response: ") + e.what());
    }
}

LlmClient::LlmClient(std::shared_ptr<Backend> backend, LlmClientOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
    if (!options_.sleeper) {
        options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    if (options_.parallelism == 0) options_.parallelism = 1;
}

std::string LlmClient::complete(const CompletionRequest& request) {
    const std::string purpose = prompt_id_name(request.purpose);
    if (request.prompt.empty()) {
        throw BackendError(BackendFault::fatal, purpose, "prompt must be non-empty");
    }
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw BackendError(BackendFault::fatal, purpose, "temperature must be within [0, 2]");
    }
    const std::size_t prompt_tokens = count_tokens(request.prompt);
    if (prompt_tokens > backend_->profile().context_budget) {
        throw BackendError(BackendFault::budget_exceeded, purpose,
                           "prompt is ~" + std::to_string(prompt_tokens) +
                               " tokens, over the backend budget of " +
                               std::to_string(backend_->profile().context_budget));
    }

    // Parallelism cap: callers block until a slot frees up.
    {
        std::unique_lock<std::mutex> lock(slots_mutex_);
        slot_cv_.wait(lock, [&] { return in_flight_ < options_.parallelism; });
        ++in_flight_;
    }
    struct SlotRelease {
        LlmClient* client;
        ~SlotRelease() {
            {
                std::lock_guard<std::mutex> lock(client->slots_mutex_);
                --client->in_flight_;
            }
            client->slot_cv_.notify_one();
        }
    } release{this};

    TranscriptRecord record;
    record.purpose = purpose;
    record.prompt_hash = hash_hex(request.prompt);
    record.requested_at_ms = now_ms();

    int attempt = 0;
    auto delay = options_.retry.base_delay;
    while (true) {
        ++attempt;
        try {
            std::string reply = backend_->complete_once(request);
            if (options_.recorder) {
                record.reply = reply;
                record.attempts = attempt;
                record.completed_at_ms = now_ms();
                options_.recorder->append(record);
            }
            if (observer_) observer_(request, reply);
            return reply;
        } catch (const BackendError& e) {
            if (e.fault() != BackendFault::transient || attempt >= options_.retry.max_attempts) {
                if (options_.recorder) {
                    record.failed = true;
                    record.attempts = attempt;
                    record.completed_at_ms = now_ms();
                    options_.recorder->append(record);
                }
                throw;
            }
            options_.sleeper(delay);
            delay = std::chrono::milliseconds(
                static_cast<std::int64_t>(static_cast<double>(delay.count()) * options_.retry.factor));
        }
    }
}

std::vector<TokenGroup> group_by_token_limit(const std::vector<std::string>& items,
                                             std::size_t limit) {
    std::vector<TokenGroup> groups;
    TokenGroup current;
    auto flush = [&] {
        if (!current.indices.empty()) {
            groups.push_back(std::move(current));
            current = TokenGroup{};
        }
    };
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::size_t tokens = count_tokens(items[i]);
        if (tokens > limit) {
            flush();
            TokenGroup oversized;
            oversized.indices.push_back(i);
            oversized.total_tokens = tokens;
            oversized.flagged_oversize = true;
            groups.push_back(std::move(oversized));
            continue;
        }
        if (!current.indices.empty() && current.total_tokens + tokens > limit) flush();
        current.indices.push_back(i);
        current.total_tokens += tokens;
    }
    flush();
    return groups;
}

}  // namespace schemacoder
