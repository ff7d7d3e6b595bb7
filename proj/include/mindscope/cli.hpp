#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/agent.hpp"
#include "mindscope/llm.hpp"
#include "mindscope/monitor.hpp"

namespace mindscope::cli {

enum class ExitCode : int { Ok = 0, DomainError = 1, UsageError = 2 };

/// Effective settings after merging flags, environment and the config file.
struct EngineConfig {
    std::string backend = "scripted";  // "scripted" or "http"
    std::optional<std::filesystem::path> cassette;
    std::optional<std::filesystem::path> record;
    std::filesystem::path library = "data/bias_library.jsonl";
    std::optional<std::filesystem::path> weights;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::filesystem::path out = "mindscope-out";
    std::optional<std::string> session_id;
    std::optional<std::size_t> shortlist;
    llm::HttpConfig http;
    agent::MemoryConfig memory;
    monitor::MonitorConfig monitor;
    nlohmann::json dqn = nlohmann::json::object();

    /// Secrets are left out.
    nlohmann::json to_json() const;
    std::string digest() const;
};

/// Config document keys mirror the flag names; `http`, `memory`, `monitor`
/// and `dqn` are nested objects. Unknown keys raise ConfigError.
EngineConfig config_from_json(const nlohmann::json& j, EngineConfig base = {});

/// Runs one command. Never throws; returns the process exit status.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mindscope::cli
