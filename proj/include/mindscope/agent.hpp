#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/dialogue.hpp"
#include "mindscope/llm.hpp"
#include "mindscope/scenario.hpp"

namespace mindscope::agent {

struct MemoryConfig {
    int k = 6;                // short-term capacity, in dialogue rounds
    int retrieval_depth = 2;  // long-term summaries embedded per action

    /// Throws ConfigError unless both fields are >= 1.
    void validate() const;
};

struct LongTermEntry {
    std::string summary;
    int first_round = 0;
    int last_round = 0;
    bool summarizer_failed = false;
};

struct AgentMemory {
    std::vector<Utterance> short_term;
    std::vector<LongTermEntry> long_term;

    /// Number of distinct rounds currently held in short-term memory.
    int short_term_span() const;
    nlohmann::json snapshot() const;
};

struct ReflectionNote {
    std::string issue;
    std::string strategy;
};

struct InteractionRequest {
    std::string purpose;
    std::string content;
    std::vector<Utterance> attached_observations;
    std::optional<std::string> directive;
};

struct AgentReply {
    std::string content;  // the REPLY section, or the raw text when the scaffold is missing
    std::string plan;
    std::string raw;
    bool scaffold_missing = false;
};

/// Splits a "PLAN: ... REPLY: ..." completion.
AgentReply parse_scaffold(const std::string& raw);

/// Splits an "ISSUE: ... STRATEGY: ..." completion. Missing markers fall back
/// to the trigger as the issue and the raw text as the strategy.
ReflectionNote parse_reflection(const std::string& raw, const std::string& trigger);

/// A role agent: memory, plan-then-reply action, and reflection, all driven
/// through one numbered backend channel. Single owner; not thread-safe.
class RoleAgent {
public:
    RoleAgent(scenario::RoleSpec spec, MemoryConfig config, llm::Caller caller, std::string scenario_brief = {});

    /// One backend call. Consumes pending observations.
    AgentReply act(const InteractionRequest& request);

    /// Idempotent per utterance turn. May trigger summarize_memory().
    const AgentMemory& observe(const Utterance& utterance);

    /// Flushes every short-term round except the newest into one long-term entry.
    LongTermEntry summarize_memory();

    /// nullopt when the backend call failed (the event is recorded).
    std::optional<ReflectionNote> reflect(const std::string& trigger);

    /// The user-turn prompt act() would send for `request`.
    std::string build_action_prompt(const InteractionRequest& request) const;
    std::string system_prompt() const;

    const scenario::RoleSpec& spec() const { return spec_; }
    const std::string& name() const { return spec_.name; }
    const AgentMemory& memory() const { return memory_; }
    const std::vector<ReflectionNote>& reflections() const { return reflections_; }
    const std::vector<Utterance>& pending() const { return pending_; }
    std::uint64_t sequence_no() const { return caller_.sequence_no(); }

    /// Flags raised since the last call to take_events(), e.g. summarizer_failed.
    std::set<std::string> take_events();

private:
    scenario::RoleSpec spec_;
    MemoryConfig config_;
    llm::Caller caller_;
    std::string scenario_brief_;
    AgentMemory memory_;
    std::vector<ReflectionNote> reflections_;
    std::vector<Utterance> pending_;
    std::set<std::uint64_t> seen_turns_;
    std::set<std::string> events_;
};

}  // namespace mindscope::agent
