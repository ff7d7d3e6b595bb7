#include "mindscope/monitor.hpp"

#include <sstream>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::monitor {

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(trim(line));
    return lines;
}

// Strips a trailing separator ("—", "-", ";", ",") left before a keyword.
std::string strip_separator(std::string s) {
    s = trim(s);
    for (bool changed = true; changed && !s.empty();) {
        changed = false;
        for (std::string_view sep : {"\xE2\x80\x94", "\xE2\x80\x93", "-", ";", ","}) {
            if (s.size() >= sep.size() && s.compare(s.size() - sep.size(), sep.size(), sep) == 0) {
                s = trim(s.substr(0, s.size() - sep.size()));
                changed = true;
            }
        }
    }
    return s;
}

// Splits "rationale <sep> keyword: tail" into (rationale, tail).
std::pair<std::string, std::optional<std::string>> split_keyword(const std::string& body, std::string_view keyword) {
    const auto pos = find_ci(body, keyword);
    if (pos == std::string::npos) return {trim(body), std::nullopt};
    auto tail = trim(std::string_view(body).substr(pos + keyword.size()));
    return {strip_separator(body.substr(0, pos)), tail.empty() ? std::nullopt : std::optional(tail)};
}

std::string after_colon(const std::string& line, std::size_t token_len) {
    std::string_view rest = std::string_view(line).substr(token_len);
    while (!rest.empty() && (rest.front() == ':' || rest.front() == ' ' || rest.front() == '*')) rest.remove_prefix(1);
    return trim(rest);
}

}  // namespace

void MonitorConfig::validate() const {
    if (max_retries < 0) throw ConfigError("monitor max_retries must be >= 0");
    if (macro_window < 1) throw ConfigError("monitor macro_window must be >= 1");
}

std::optional<MonitorAnnotation> parse_micro_reply(const std::string& reply) {
    const auto lines = lines_of(reply);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string_view line = *it;
        while (!line.empty() && (line.front() == '*' || line.front() == '#')) line.remove_prefix(1);
        const std::string clean = trim(line);
        MonitorAnnotation a;
        if (starts_with_ci(clean, "CONFORM")) {
            a.verdict = Verdict::Conform;
            a.rationale = after_colon(clean, 7);
            return a;
        }
        if (starts_with_ci(clean, "DEVIATE")) {
            a.verdict = Verdict::Deviate;
            auto [rationale, directive] = split_keyword(after_colon(clean, 7), "directive:");
            a.rationale = rationale;
            a.directive = directive ? *directive : (rationale.empty() ? std::string("follow the rule") : rationale);
            return a;
        }
    }
    return std::nullopt;
}

std::optional<MacroVerdict> parse_macro_reply(const std::string& reply) {
    const auto lines = lines_of(reply);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        const std::string& line = *it;
        MacroVerdict v;
        if (starts_with_ci(line, "MISALIGNED")) {
            v.aligned = false;
            auto [rationale, adjustment] = split_keyword(after_colon(line, 10), "adjustment:");
            v.adjustment = adjustment ? *adjustment : rationale;
            if (v.adjustment->empty()) v.adjustment = "return to the scenario purpose";
            return v;
        }
        if (starts_with_ci(line, "ALIGNED")) return v;
    }
    return std::nullopt;
}

MicroResult MicroMonitor::check(const std::string& speaker, const std::string& reply, const scenario::ScenarioRule& rule,
                                const scenario::ScenarioScript& script) {
    std::vector<llm::Message> messages = {
        {"system",
         "You are a system agent supervising a scripted multi-agent scenario. Judge whether a role agent's response "
         "fulfils the interaction purpose and content of its rule."},
        {"user", "Scenario purpose: " + script.purpose + "\nRole: " + speaker + "\nInteraction purpose: " + rule.purpose +
                     "\nInteraction content: " + rule.content + "\nResponse:\n" + reply +
                     "\n\nLet's think step by step. End with one line, either\nCONFORM: <rationale>\nor\n"
                     "DEVIATE: <rationale> - directive: <instruction to correct the response>"}};
    MicroResult result;
    try {
        auto response = caller_.call(std::move(messages), llm::kEvaluatorTemperature);
        if (auto parsed = parse_micro_reply(response.content)) {
            result.annotation = *parsed;
            return result;
        }
    } catch (const BackendError&) {
    }
    result.annotation = {Verdict::Conform, "monitor verdict unavailable", std::nullopt, 0};
    result.unparsed = true;
    return result;
}

MacroVerdict MacroMonitor::check(const std::vector<Utterance>& window, const scenario::ScenarioScript& script) {
    if (window.empty()) return {};
    std::vector<llm::Message> messages = {
        {"system",
         "You are a system agent governing a scripted multi-agent scenario. Decide whether the recent dialogue still "
         "follows the scenario's objectives."},
        {"user", "Scenario purpose: " + script.purpose + "\nBackground: " + script.background + "\nRecent dialogue:\n" +
                     render_dialogue(window) +
                     "\nLet's think step by step. End with one line, either\nALIGNED: <rationale>\nor\n"
                     "MISALIGNED: <rationale> - adjustment: <instruction broadcast to all roles>"}};
    try {
        auto response = caller_.call(std::move(messages), llm::kEvaluatorTemperature);
        if (auto parsed = parse_macro_reply(response.content)) return *parsed;
        MacroVerdict v;
        v.flags.insert("macro_unparsed");
        return v;
    } catch (const BackendError&) {
        MacroVerdict v;
        v.flags.insert("macro_failed");
        return v;
    }
}

SupervisedReply rectify(agent::RoleAgent& agent, agent::AgentReply first, MicroResult first_check,
                        const agent::InteractionRequest& request, const scenario::ScenarioRule& rule,
                        const scenario::ScenarioScript& script, MicroMonitor& micro, const MonitorConfig& config) {
    SupervisedReply out;
    out.reply = std::move(first);
    MicroResult check = std::move(first_check);
    int attempts = 0;
    while (check.annotation.verdict == Verdict::Deviate && attempts < config.max_retries) {
        const std::string directive = check.annotation.directive.value_or("follow the rule");
        out.rejected_drafts.push_back({{"content", out.reply.content},
                                       {"plan", out.reply.plan},
                                       {"monitor", to_json(check.annotation)}});
        agent.reflect(directive);
        ++attempts;
        agent::InteractionRequest retry = request;
        retry.directive = directive;
        out.reply = agent.act(retry);
        check = micro.check(agent.name(), out.reply.content, rule, script);
        if (check.unparsed) out.flags.insert("monitor_unparsed");
    }
    if (check.annotation.verdict == Verdict::Deviate) out.flags.insert("monitor_exhausted");
    if (out.reply.scaffold_missing) out.flags.insert("scaffold_missing");
    out.annotation = check.annotation;
    out.annotation.attempts_used = attempts;
    return out;
}

SupervisedReply supervised_act(agent::RoleAgent& agent, const agent::InteractionRequest& request,
                               const scenario::ScenarioRule& rule, const scenario::ScenarioScript& script,
                               MicroMonitor* micro, const MonitorConfig& config) {
    auto reply = agent.act(request);
    if (!micro || !config.micro_enabled) {
        SupervisedReply out;
        if (reply.scaffold_missing) out.flags.insert("scaffold_missing");
        out.reply = std::move(reply);
        return out;
    }
    auto check = micro->check(agent.name(), reply.content, rule, script);
    const bool unparsed = check.unparsed;
    auto out = rectify(agent, std::move(reply), std::move(check), request, rule, script, *micro, config);
    if (unparsed) out.flags.insert("monitor_unparsed");
    return out;
}

}  // namespace mindscope::monitor
