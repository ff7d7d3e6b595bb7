#include "mindscope/llm.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::llm {

using nlohmann::json;

std::string request_digest(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json canonical = {{"messages", messages}, {"temperature", request.temperature}};
    canonical["max_tokens"] = request.max_tokens ? json(*request.max_tokens) : json(nullptr);
    return sha256_hex(canonical.dump());
}

json to_json(const CassetteEntry& e) {
    return {{"session_id", e.key.session_id},
            {"caller_id", e.key.caller_id},
            {"sequence_no", e.key.sequence_no},
            {"request_digest", e.request_digest},
            {"content", e.content},
            {"usage", {{"prompt_tokens", e.usage.prompt_tokens}, {"completion_tokens", e.usage.completion_tokens}}}};
}

CassetteEntry cassette_entry_from_json(const json& r, std::size_t line_no) {
    try {
        CassetteEntry e;
        e.key.session_id = r.at("session_id").get<std::string>();
        e.key.caller_id = r.at("caller_id").get<std::string>();
        e.key.sequence_no = r.at("sequence_no").get<std::uint64_t>();
        e.request_digest = r.value("request_digest", std::string{});
        e.content = r.at("content").get<std::string>();
        if (auto it = r.find("usage"); it != r.end() && it->is_object()) {
            e.usage.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
            e.usage.completion_tokens = it->value("completion_tokens", std::int64_t{0});
        }
        if (e.usage.prompt_tokens < 0 || e.usage.completion_tokens < 0) {
            throw RecordError(line_no, "negative token count");
        }
        return e;
    } catch (const json::exception& ex) {
        throw RecordError(line_no, std::string("bad cassette entry: ") + ex.what());
    }
}

Cassette Cassette::load(const std::filesystem::path& path) {
    Cassette c;
    for_each_json_line(path, [&](std::size_t line_no, const json& r) { c.put(cassette_entry_from_json(r, line_no)); });
    return c;
}

void Cassette::put(CassetteEntry entry) {
    auto key = entry.key;
    entries_.insert_or_assign(std::move(key), std::move(entry));
}

void Cassette::put(std::string session_id, std::string caller_id, std::uint64_t sequence_no, std::string content,
                   Usage usage) {
    CassetteEntry e;
    e.key = {std::move(session_id), std::move(caller_id), sequence_no};
    e.content = std::move(content);
    e.usage = usage;
    put(std::move(e));
}

const CassetteEntry* Cassette::find(const CassetteKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

std::string Cassette::to_jsonl() const {
    std::string out;
    for (const auto& [key, entry] : entries_) {
        out += to_json(entry).dump();
        out += '\n';
    }
    return out;
}

void Cassette::save(const std::filesystem::path& path) const { write_file(path, to_jsonl()); }

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    const auto* entry = cassette_.find({request.session_id, request.caller_id, request.sequence_no});
    if (!entry) {
        throw CassetteMiss("no cassette entry for (" + request.session_id + ", " + request.caller_id + ", " +
                           std::to_string(request.sequence_no) + ")");
    }
    return {entry->content, entry->usage, "scripted"};
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    auto response = inner_.complete(request);
    CassetteEntry e;
    e.key = {request.session_id, request.caller_id, request.sequence_no};
    e.request_digest = request_digest(request);
    e.content = response.content;
    e.usage = response.usage;
    std::lock_guard lock(mutex_);
    recorded_.put(std::move(e));
    return response;
}

Cassette RecordingBackend::cassette() const {
    std::lock_guard lock(mutex_);
    return recorded_;
}

std::chrono::milliseconds RetryPolicy::delay(int retry) const {
    const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier < 1.0 ? 1.0 : multiplier, retry);
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

HttpConfig http_config_from_env(HttpConfig defaults) {
    if (const char* key = std::getenv("MINDSCOPE_API_KEY"); key && *key) defaults.api_key = key;
    if (const char* url = std::getenv("MINDSCOPE_BASE_URL"); url && *url) defaults.base_url = url;
    return defaults;
}

std::string HttpBackend::request_body(const ChatRequest& request, const std::string& model) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", model}, {"messages", messages}, {"temperature", request.temperature}};
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
    return body.dump();
}

ChatResponse HttpBackend::parse_response(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("unparseable completion body: ") + e.what());
    }
    try {
        ChatResponse out;
        const auto& message = doc.at("choices").at(0).at("message");
        const auto& content = message.at("content");
        out.content = content.is_null() ? std::string{} : content.get<std::string>();
        if (auto it = doc.find("usage"); it != doc.end() && it->is_object()) {
            out.usage.prompt_tokens = std::max<std::int64_t>(0, it->value("prompt_tokens", std::int64_t{0}));
            out.usage.completion_tokens = std::max<std::int64_t>(0, it->value("completion_tokens", std::int64_t{0}));
        }
        out.backend_tag = "http";
        return out;
    } catch (const json::exception& e) {
        throw FormatError(std::string("completion body missing fields: ") + e.what());
    }
}

HttpBackend::HttpBackend(HttpConfig config, HttpTransport transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
    if (config_.api_key.empty()) throw AuthError("MINDSCOPE_API_KEY is not set");
    if (request.messages.empty()) throw FormatError("request has no messages");

    const std::string body = request_body(request, config_.model);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(config_.retry.delay(attempt - 1));
        const HttpReply reply = transport_("/v1/chat/completions", body);
        if (reply.status == 200) return parse_response(reply.body);
        if (reply.status == 401 || reply.status == 403) {
            throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(reply.status) + ")");
        }
        const bool transient = reply.status == 0 || reply.status == 429 || reply.status >= 500;
        last_error = reply.status == 0 ? reply.error : "HTTP " + std::to_string(reply.status) + ": " + reply.body;
        if (!transient) throw TransportError(last_error);
    }
    throw TransportError("giving up after " + std::to_string(config_.retry.max_retries) + " retries: " + last_error);
}

void CallLog::record(const std::string& caller_id, const Usage& usage, bool failed) {
    std::lock_guard lock(mutex_);
    auto& s = stats_[caller_id];
    ++s.calls;
    if (failed) ++s.failures;
    s.prompt_tokens += usage.prompt_tokens;
    s.completion_tokens += usage.completion_tokens;
}

std::map<std::string, CallStats> CallLog::snapshot() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

json CallLog::to_json() const {
    json per_caller = json::object();
    CallStats total;
    for (const auto& [caller, s] : snapshot()) {
        per_caller[caller] = {{"calls", s.calls},
                              {"failures", s.failures},
                              {"prompt_tokens", s.prompt_tokens},
                              {"completion_tokens", s.completion_tokens}};
        total.calls += s.calls;
        total.failures += s.failures;
        total.prompt_tokens += s.prompt_tokens;
        total.completion_tokens += s.completion_tokens;
    }
    return {{"per_caller", per_caller},
            {"total",
             {{"calls", total.calls},
              {"failures", total.failures},
              {"prompt_tokens", total.prompt_tokens},
              {"completion_tokens", total.completion_tokens}}}};
}

ChatResponse Caller::call(std::vector<Message> messages, double temperature, std::optional<int> max_tokens) {
    ChatRequest request{session_id_, caller_id_, sequence_no_++, std::move(messages), temperature, max_tokens};
    try {
        auto response = backend_->complete(request);
        if (log_) log_->record(caller_id_, response.usage, false);
        return response;
    } catch (const BackendError&) {
        if (log_) log_->record(caller_id_, {}, true);
        throw;
    }
}

}  // namespace mindscope::llm
