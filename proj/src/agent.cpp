#include "mindscope/agent.hpp"

#include <algorithm>
#include <iterator>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::agent {

namespace {

constexpr std::size_t kReflectionsInPrompt = 3;

std::set<int> rounds_of(const std::vector<Utterance>& utterances) {
    std::set<int> rounds;
    for (const auto& u : utterances) rounds.insert(u.round);
    return rounds;
}

}  // namespace

void MemoryConfig::validate() const {
    if (k < 1) throw ConfigError("memory k must be >= 1");
    if (retrieval_depth < 1) throw ConfigError("memory retrieval_depth must be >= 1");
}

int AgentMemory::short_term_span() const { return static_cast<int>(rounds_of(short_term).size()); }

nlohmann::json AgentMemory::snapshot() const {
    nlohmann::json ranges = nlohmann::json::array();
    for (const auto& e : long_term) ranges.push_back({e.first_round, e.last_round});
    const auto rounds = rounds_of(short_term);
    return {{"short_term_rounds", std::vector<int>(rounds.begin(), rounds.end())}, {"long_term", ranges}};
}

AgentReply parse_scaffold(const std::string& raw) {
    AgentReply reply;
    reply.raw = raw;
    const auto reply_pos = find_ci(raw, "REPLY:");
    if (reply_pos == std::string::npos) {
        reply.content = raw;
        reply.scaffold_missing = true;
        return reply;
    }
    reply.content = trim(std::string_view(raw).substr(reply_pos + 6));
    const auto plan_pos = find_ci(raw, "PLAN:");
    if (plan_pos != std::string::npos && plan_pos < reply_pos) {
        reply.plan = trim(std::string_view(raw).substr(plan_pos + 5, reply_pos - plan_pos - 5));
    }
    return reply;
}

ReflectionNote parse_reflection(const std::string& raw, const std::string& trigger) {
    const auto issue_pos = find_ci(raw, "ISSUE:");
    const auto strategy_pos = find_ci(raw, "STRATEGY:");
    ReflectionNote note;
    if (issue_pos != std::string::npos && strategy_pos != std::string::npos && issue_pos < strategy_pos) {
        note.issue = trim(std::string_view(raw).substr(issue_pos + 6, strategy_pos - issue_pos - 6));
        note.strategy = trim(std::string_view(raw).substr(strategy_pos + 9));
    }
    if (note.issue.empty()) note.issue = trigger;
    if (note.strategy.empty()) note.strategy = trim(raw);
    if (note.strategy.empty()) note.strategy = "address: " + trigger;
    return note;
}

RoleAgent::RoleAgent(scenario::RoleSpec spec, MemoryConfig config, llm::Caller caller, std::string scenario_brief)
    : spec_(std::move(spec)), config_(config), caller_(std::move(caller)), scenario_brief_(std::move(scenario_brief)) {
    config_.validate();
}

std::string RoleAgent::system_prompt() const {
    std::string prompt = "You are " + spec_.name + ", playing the " + std::string(scenario::to_string(spec_.archetype)) +
                         " in a scripted scenario.\n";
    if (!spec_.identity.empty()) prompt += "Identity: " + spec_.identity + "\n";
    if (!spec_.task.empty()) prompt += "Task: " + spec_.task + "\n";
    if (!spec_.backstory.empty()) prompt += "Background story: " + spec_.backstory + "\n";
    if (!scenario_brief_.empty()) prompt += "Scenario: " + scenario_brief_ + "\n";
    prompt +=
        "Stay in character. First decompose the request into a short step-by-step plan, then give your response.\n"
        "Answer in exactly this format:\nPLAN: <your plan>\nREPLY: <what you say to the others>";
    return prompt;
}

std::string RoleAgent::build_action_prompt(const InteractionRequest& request) const {
    std::string prompt;
    if (!memory_.long_term.empty()) {
        prompt += "Long-term memory:\n";
        const auto depth = std::min<std::size_t>(static_cast<std::size_t>(config_.retrieval_depth), memory_.long_term.size());
        for (auto it = memory_.long_term.end() - static_cast<std::ptrdiff_t>(depth); it != memory_.long_term.end(); ++it) {
            prompt += "- rounds " + std::to_string(it->first_round) + "-" + std::to_string(it->last_round) + ": " +
                      it->summary + "\n";
        }
    }
    std::vector<Utterance> recent;
    std::copy_if(memory_.short_term.begin(), memory_.short_term.end(), std::back_inserter(recent), [&](const Utterance& u) {
        return std::none_of(request.attached_observations.begin(), request.attached_observations.end(),
                            [&](const Utterance& p) { return p.turn == u.turn; });
    });
    if (!recent.empty()) prompt += "Recent dialogue:\n" + render_dialogue(recent);
    if (!reflections_.empty()) {
        prompt += "Lessons from reflection:\n";
        const auto n = std::min(kReflectionsInPrompt, reflections_.size());
        for (auto it = reflections_.end() - static_cast<std::ptrdiff_t>(n); it != reflections_.end(); ++it) {
            prompt += "- issue: " + it->issue + "; strategy: " + it->strategy + "\n";
        }
    }
    if (!request.attached_observations.empty()) {
        prompt += "New messages for you:\n" + render_dialogue(request.attached_observations);
    }
    prompt += "Interaction purpose: " + request.purpose + "\n";
    prompt += "Interaction content: " + request.content + "\n";
    if (request.directive) prompt += "Rectification directive from the supervisor: " + *request.directive + "\n";
    return prompt;
}

AgentReply RoleAgent::act(const InteractionRequest& request) {
    InteractionRequest full = request;
    if (full.attached_observations.empty()) full.attached_observations = pending_;
    std::vector<llm::Message> messages = {{"system", system_prompt()}, {"user", build_action_prompt(full)}};
    auto response = caller_.call(std::move(messages), llm::kRoleTemperature);
    pending_.clear();
    return parse_scaffold(response.content);
}

const AgentMemory& RoleAgent::observe(const Utterance& utterance) {
    if (!seen_turns_.insert(utterance.turn).second) return memory_;
    memory_.short_term.push_back(utterance);
    if (utterance.speaker != spec_.name) pending_.push_back(utterance);
    if (memory_.short_term_span() > config_.k) summarize_memory();
    return memory_;
}

LongTermEntry RoleAgent::summarize_memory() {
    if (memory_.short_term.empty()) throw Error("summarize_memory: short-term memory is empty");
    const int newest = std::max_element(memory_.short_term.begin(), memory_.short_term.end(), [](const auto& a, const auto& b) {
                           return a.round < b.round;
                       })->round;

    std::vector<Utterance> flushed;
    std::vector<Utterance> kept;
    for (auto& u : memory_.short_term) (u.round < newest ? flushed : kept).push_back(std::move(u));
    if (flushed.empty()) {
        memory_.short_term = std::move(kept);
        throw Error("summarize_memory: nothing to flush");
    }

    LongTermEntry entry;
    const int oldest_flushed = flushed.front().round;
    entry.first_round = memory_.long_term.empty() ? oldest_flushed : memory_.long_term.back().last_round + 1;
    entry.last_round = newest - 1;

    const std::string verbatim = render_dialogue(flushed);
    std::vector<llm::Message> messages = {
        {"system", "You maintain the long-term memory of " + spec_.name +
                       ". Summarize the dialogue below in a few sentences, keeping decisions, commitments, numbers and "
                       "names."},
        {"user", "Rounds " + std::to_string(entry.first_round) + "-" + std::to_string(entry.last_round) + ":\n" + verbatim}};
    try {
        auto response = caller_.call(std::move(messages), llm::kEvaluatorTemperature);
        entry.summary = trim(response.content);
    } catch (const BackendError&) {
        entry.summary = verbatim;
        entry.summarizer_failed = true;
        events_.insert("summarizer_failed");
    }
    memory_.short_term = std::move(kept);
    memory_.long_term.push_back(entry);
    return entry;
}

std::optional<ReflectionNote> RoleAgent::reflect(const std::string& trigger) {
    std::vector<llm::Message> messages = {
        {"system", system_prompt()},
        {"user", "Reflect on your behavior so far.\nRecent dialogue:\n" + render_dialogue(memory_.short_term) +
                     "Trigger: " + trigger +
                     "\nIdentify the problem and a strategy to fix it. Answer as:\nISSUE: <problem>\nSTRATEGY: <strategy>"}};
    try {
        auto response = caller_.call(std::move(messages), llm::kRoleTemperature);
        auto note = parse_reflection(response.content, trigger);
        reflections_.push_back(note);
        return note;
    } catch (const BackendError&) {
        events_.insert("reflection_failed");
        return std::nullopt;
    }
}

std::set<std::string> RoleAgent::take_events() { return std::exchange(events_, {}); }

}  // namespace mindscope::agent
