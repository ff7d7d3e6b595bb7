#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/agent.hpp"
#include "mindscope/dialogue.hpp"
#include "mindscope/llm.hpp"
#include "mindscope/scenario.hpp"

namespace mindscope::monitor {

struct MonitorConfig {
    int max_retries = 2;
    int macro_window = 1;  // rounds per macro check
    bool micro_enabled = true;
    bool macro_enabled = true;

    void validate() const;
};

struct MicroResult {
    MonitorAnnotation annotation;
    bool unparsed = false;  // fail-open: backend error or no verdict token
};

/// Parses a CONFORM/DEVIATE reply. The verdict line is the last line that
/// starts with either token, so chain-of-thought text may precede it.
std::optional<MonitorAnnotation> parse_micro_reply(const std::string& reply);

struct MacroVerdict {
    bool aligned = true;
    std::optional<std::string> adjustment;
    std::set<std::string> flags;
};

std::optional<MacroVerdict> parse_macro_reply(const std::string& reply);

/// Per-utterance supervisor (zero-shot chain of thought).
class MicroMonitor {
public:
    explicit MicroMonitor(llm::Caller caller) : caller_(std::move(caller)) {}

    MicroResult check(const std::string& speaker, const std::string& reply, const scenario::ScenarioRule& rule,
                      const scenario::ScenarioScript& script);

    std::uint64_t sequence_no() const { return caller_.sequence_no(); }

private:
    llm::Caller caller_;
};

/// Per-round supervisor comparing the dialogue against the scenario blueprint.
class MacroMonitor {
public:
    explicit MacroMonitor(llm::Caller caller) : caller_(std::move(caller)) {}

    /// An empty window is vacuously aligned and costs no call.
    MacroVerdict check(const std::vector<Utterance>& window, const scenario::ScenarioScript& script);

    std::uint64_t sequence_no() const { return caller_.sequence_no(); }

private:
    llm::Caller caller_;
};

struct SupervisedReply {
    agent::AgentReply reply;
    MonitorAnnotation annotation;
    std::set<std::string> flags;
    nlohmann::json rejected_drafts = nlohmann::json::array();
};

/// Retries a deviating response: reflect on the directive, act again with the
/// directive attached, re-check; stops on conform or after max_retries.
/// Exhaustion accepts the last response with flag monitor_exhausted.
SupervisedReply rectify(agent::RoleAgent& agent, agent::AgentReply first, MicroResult first_check,
                        const agent::InteractionRequest& request, const scenario::ScenarioRule& rule,
                        const scenario::ScenarioScript& script, MicroMonitor& micro, const MonitorConfig& config);

/// act + micro_check, then rectify on deviation.
SupervisedReply supervised_act(agent::RoleAgent& agent, const agent::InteractionRequest& request,
                               const scenario::ScenarioRule& rule, const scenario::ScenarioScript& script,
                               MicroMonitor* micro, const MonitorConfig& config);

}  // namespace mindscope::monitor
