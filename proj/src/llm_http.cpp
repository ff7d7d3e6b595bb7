// The only translation unit that sees httplib.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "mindscope/error.hpp"
#include "mindscope/llm.hpp"

namespace mindscope::llm {

namespace {

// Splits "https://host:port/prefix" into the client origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    std::string url = base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("http backend requires a base URL (MINDSCOPE_BASE_URL)");
    auto [origin, prefix] = split_base_url(config_.base_url);
    path_prefix_ = prefix;
    auto client = std::make_shared<httplib::Client>(origin);
    client->set_connection_timeout(config_.timeout);
    client->set_read_timeout(config_.timeout);
    client->set_write_timeout(config_.timeout);
    const std::string auth = "Bearer " + config_.api_key;
    const std::string path_prefix = path_prefix_;
    transport_ = [client, auth, path_prefix](const std::string& path, const std::string& body) {
        httplib::Headers headers = {{"Authorization", auth}};
        auto result = client->Post(path_prefix + path, headers, body, "application/json");
        if (!result) return HttpReply{0, {}, "transport failure: " + httplib::to_string(result.error())};
        return HttpReply{result->status, result->body, {}};
    };
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

}  // namespace mindscope::llm
