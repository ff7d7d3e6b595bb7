#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/agent.hpp"
#include "mindscope/dialogue.hpp"
#include "mindscope/llm.hpp"
#include "mindscope/monitor.hpp"
#include "mindscope/scenario.hpp"

namespace mindscope::interp {

struct RoutingPlan {
    std::size_t rule_index = 0;
    std::string initiator;
    scenario::Mode mode = scenario::Mode::Broadcast;
    std::vector<std::string> deliveries;
    std::optional<std::string> system_injection;
};

/// Resolves the delivery list for a rule. The script must already validate.
RoutingPlan compile_rule(const scenario::ScenarioRule& rule, const scenario::ScenarioScript& script);

struct SessionConfig {
    std::string session_id;  // empty: "session-<seed>"
    std::uint64_t seed = 0;
    agent::MemoryConfig memory;
    monitor::MonitorConfig monitor;
};

inline constexpr const char* kMicroMonitorCaller = "monitor.micro";
inline constexpr const char* kMacroMonitorCaller = "monitor.macro";

struct Transcript {
    std::string session_id;
    std::string script_digest;
    std::uint64_t seed = 0;
    std::vector<Utterance> utterances;
    std::optional<std::string> abort_reason;

    nlohmann::json header() const;
    /// Header line, one line per utterance, and the abort marker if any.
    std::string to_jsonl() const;

    static Transcript parse(const std::string& jsonl);
    static Transcript load(const std::filesystem::path& path);
};

/// One scripted dialogue. Owns its agents and monitors; single-threaded.
class Session {
public:
    using UtteranceHook = std::function<void(const Session&, const Utterance&)>;

    Session(scenario::ScenarioScript script, llm::Backend& backend, SessionConfig config,
            std::ostream* sink = nullptr, llm::CallLog* log = nullptr);

    /// Runs `rounds` passes over the rule list. On a backend error the abort
    /// marker is persisted and the error rethrown.
    const Transcript& run();

    std::vector<Utterance> execute_rule(const RoutingPlan& plan, int round);

    /// Runs the macro monitor over the last `macro_window` rounds ending at
    /// `round`, injecting any adjustment into every role before round + 1.
    monitor::MacroVerdict macro_boundary(int round);

    const Transcript& transcript() const { return transcript_; }
    const scenario::ScenarioScript& script() const { return script_; }
    agent::RoleAgent& agent(const std::string& name);
    const agent::RoleAgent& agent(const std::string& name) const;
    const monitor::MicroMonitor& micro_monitor() const { return micro_; }

    /// Called after every persisted utterance.
    void on_utterance(UtteranceHook hook) { hook_ = std::move(hook); }

private:
    Utterance make_utterance(int round);
    void deliver(Utterance& u, const std::vector<std::string>& observers);
    void emit(Utterance u);

    scenario::ScenarioScript script_;
    SessionConfig config_;
    std::ostream* sink_;
    std::map<std::string, std::unique_ptr<agent::RoleAgent>> agents_;
    monitor::MicroMonitor micro_;
    monitor::MacroMonitor macro_;
    Transcript transcript_;
    std::uint64_t next_turn_ = 0;
    nlohmann::json pending_debug_ = nlohmann::json::object();
    UtteranceHook hook_;
};

Transcript run_session(const scenario::ScenarioScript& script, llm::Backend& backend, const SessionConfig& config,
                       std::ostream* sink = nullptr, llm::CallLog* log = nullptr);

}  // namespace mindscope::interp
