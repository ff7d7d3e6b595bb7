#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace mindscope::llm {

/// Evaluator, monitor and referee calls run greedy; role agents and debaters
/// get some stylistic variation.
inline constexpr double kEvaluatorTemperature = 0.0;
inline constexpr double kRoleTemperature = 0.7;

struct Message {
    std::string role;  // "system", "user" or "assistant"
    std::string content;

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::string session_id;
    std::string caller_id;
    std::uint64_t sequence_no = 0;
    std::vector<Message> messages;
    double temperature = kEvaluatorTemperature;
    std::optional<int> max_tokens;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string content;
    Usage usage;
    std::string backend_tag;
};

/// SHA-256 over the canonical JSON of messages, temperature and max_tokens.
std::string request_digest(const ChatRequest& request);

/// Completion interface. Implementations must be safe to call concurrently.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct CassetteKey {
    std::string session_id;
    std::string caller_id;
    std::uint64_t sequence_no = 0;

    auto operator<=>(const CassetteKey&) const = default;
};

struct CassetteEntry {
    CassetteKey key;
    std::string request_digest;
    std::string content;
    Usage usage;
};

nlohmann::json to_json(const CassetteEntry& entry);
CassetteEntry cassette_entry_from_json(const nlohmann::json& record, std::size_t line_no);

/// Recorded completions keyed by (session, caller, sequence).
class Cassette {
public:
    static Cassette load(const std::filesystem::path& path);

    /// Inserts or replaces the entry for its key.
    void put(CassetteEntry entry);
    void put(std::string session_id, std::string caller_id, std::uint64_t sequence_no, std::string content,
             Usage usage = {});

    const CassetteEntry* find(const CassetteKey& key) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// JSON Lines ordered by key, so the bytes do not depend on call timing.
    std::string to_jsonl() const;
    void save(const std::filesystem::path& path) const;

private:
    std::map<CassetteKey, CassetteEntry> entries_;
};

/// Replays a cassette. Read-only after construction.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(Cassette cassette) : cassette_(std::move(cassette)) {}

    ChatResponse complete(const ChatRequest& request) override;

private:
    Cassette cassette_;
};

/// Forwards to another backend and records every successful exchange.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(Backend& inner) : inner_(inner) {}

    ChatResponse complete(const ChatRequest& request) override;
    Cassette cassette() const;

private:
    Backend& inner_;
    mutable std::mutex mutex_;
    Cassette recorded_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;

    /// Delay before retry i (0-based). Nondecreasing in i.
    std::chrono::milliseconds delay(int retry) const;
};

struct HttpConfig {
    std::string base_url;
    std::string api_key;
    std::string model = "gpt-4-turbo";
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
};

struct HttpReply {
    int status = 0;            // 0 when the transport failed
    std::string body;
    std::string error;         // transport error text
};

using HttpTransport = std::function<HttpReply(const std::string& path, const std::string& body)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// OpenAI-compatible chat completions client with bounded retry.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpConfig config);
    HttpBackend(HttpConfig config, HttpTransport transport, Sleeper sleeper);

    ChatResponse complete(const ChatRequest& request) override;

    static std::string request_body(const ChatRequest& request, const std::string& model);
    static ChatResponse parse_response(const std::string& body);

private:
    HttpConfig config_;
    std::string path_prefix_;
    HttpTransport transport_;
    Sleeper sleeper_;
};

/// Environment-backed settings for the live backend.
HttpConfig http_config_from_env(HttpConfig defaults = {});

/// Per-caller call and token totals.
struct CallStats {
    std::int64_t calls = 0;
    std::int64_t failures = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

class CallLog {
public:
    void record(const std::string& caller_id, const Usage& usage, bool failed);
    std::map<std::string, CallStats> snapshot() const;
    nlohmann::json to_json() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, CallStats> stats_;
};

/// A (session, caller) channel that numbers its own requests. The counter
/// advances on every attempt, failed or not, so replay keys stay aligned.
class Caller {
public:
    Caller(Backend& backend, std::string session_id, std::string caller_id, CallLog* log = nullptr)
        : backend_(&backend), session_id_(std::move(session_id)), caller_id_(std::move(caller_id)), log_(log) {}

    ChatResponse call(std::vector<Message> messages, double temperature, std::optional<int> max_tokens = {});

    std::uint64_t sequence_no() const { return sequence_no_; }
    const std::string& caller_id() const { return caller_id_; }
    const std::string& session_id() const { return session_id_; }

private:
    Backend* backend_;
    std::string session_id_;
    std::string caller_id_;
    CallLog* log_;
    std::uint64_t sequence_no_ = 0;
};

}  // namespace mindscope::llm
