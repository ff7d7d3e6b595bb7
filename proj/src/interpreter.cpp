#include "mindscope/interpreter.hpp"

#include <algorithm>
#include <sstream>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::interp {

using nlohmann::json;
using scenario::Mode;

RoutingPlan compile_rule(const scenario::ScenarioRule& rule, const scenario::ScenarioScript& script) {
    RoutingPlan plan;
    plan.rule_index = rule.index;
    plan.initiator = rule.initiator;
    plan.mode = rule.mode.tag;
    switch (rule.mode.tag) {
        case Mode::Unicast:
        case Mode::Multicast:
            plan.deliveries = rule.mode.recipients;
            break;
        case Mode::Broadcast:
            for (const auto& role : script.roles) {
                if (role.name != rule.initiator) plan.deliveries.push_back(role.name);
            }
            break;
        case Mode::SelfReceival:
            plan.system_injection = rule.content;
            break;
    }
    return plan;
}

json Transcript::header() const {
    return {{"session_id", session_id},
            {"script_digest", script_digest},
            {"seed", seed},
            {"engine_version", std::string(kEngineVersion)}};
}

std::string Transcript::to_jsonl() const {
    std::string out = header().dump() + "\n";
    for (const auto& u : utterances) out += to_json(u).dump() + "\n";
    if (abort_reason) out += json{{"abort", {{"reason", *abort_reason}}}}.dump() + "\n";
    return out;
}

Transcript Transcript::parse(const std::string& jsonl) {
    Transcript t;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw RecordError(line_no, e.what());
        }
        try {
            if (!have_header) {
                t.session_id = j.at("session_id").get<std::string>();
                t.script_digest = j.at("script_digest").get<std::string>();
                t.seed = j.at("seed").get<std::uint64_t>();
                have_header = true;
            } else if (j.contains("abort")) {
                t.abort_reason = j["abort"].value("reason", std::string{});
            } else {
                t.utterances.push_back(utterance_from_json(j));
            }
        } catch (const json::exception& e) {
            throw RecordError(line_no, e.what());
        } catch (const SchemaError& e) {
            throw RecordError(line_no, e.what());
        }
    }
    if (!have_header) throw RecordError(1, "transcript has no header line");
    return t;
}

Transcript Transcript::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Session::Session(scenario::ScenarioScript script, llm::Backend& backend, SessionConfig config, std::ostream* sink,
                 llm::CallLog* log)
    : script_(std::move(script)),
      config_(std::move(config)),
      sink_(sink),
      micro_(llm::Caller(backend, config_.session_id.empty() ? "session-" + std::to_string(config_.seed) : config_.session_id,
                         kMicroMonitorCaller, log)),
      macro_(llm::Caller(backend, config_.session_id.empty() ? "session-" + std::to_string(config_.seed) : config_.session_id,
                         kMacroMonitorCaller, log)) {
    if (config_.session_id.empty()) config_.session_id = "session-" + std::to_string(config_.seed);
    config_.memory.validate();
    config_.monitor.validate();
    if (auto report = scenario::validate_script(script_); !report.empty()) {
        throw SchemaError("script is not executable: " + report.front().path + ": " + report.front().message);
    }
    const std::string brief = script_.purpose + (script_.background.empty() ? "" : " " + script_.background);
    for (const auto& role : script_.roles) {
        agents_.emplace(role.name, std::make_unique<agent::RoleAgent>(
                                       role, config_.memory, llm::Caller(backend, config_.session_id, role.name, log), brief));
    }
    transcript_.session_id = config_.session_id;
    transcript_.script_digest = scenario::script_digest(script_);
    transcript_.seed = config_.seed;
}

agent::RoleAgent& Session::agent(const std::string& name) {
    auto it = agents_.find(name);
    if (it == agents_.end()) throw NotFound("no agent named '" + name + "'");
    return *it->second;
}

const agent::RoleAgent& Session::agent(const std::string& name) const {
    auto it = agents_.find(name);
    if (it == agents_.end()) throw NotFound("no agent named '" + name + "'");
    return *it->second;
}

Utterance Session::make_utterance(int round) {
    Utterance u;
    u.turn = next_turn_++;
    u.round = round;
    return u;
}

void Session::deliver(Utterance& u, const std::vector<std::string>& observers) {
    json memory = json::object();
    for (const auto& name : observers) {
        auto& a = agent(name);
        a.observe(u);
        auto events = a.take_events();
        u.flags.insert(events.begin(), events.end());
        memory[name] = a.memory().snapshot();
    }
    u.debug["memory"] = std::move(memory);
}

void Session::emit(Utterance u) {
    if (!pending_debug_.empty()) {
        for (auto it = pending_debug_.begin(); it != pending_debug_.end(); ++it) u.debug[it.key()] = it.value();
        pending_debug_ = json::object();
    }
    if (sink_) {
        *sink_ << to_json(u).dump() << '\n';
        sink_->flush();
    }
    transcript_.utterances.push_back(std::move(u));
    if (hook_) hook_(*this, transcript_.utterances.back());
}

std::vector<Utterance> Session::execute_rule(const RoutingPlan& plan, int round) {
    const auto& rule = script_.rules.at(plan.rule_index);
    Utterance u = make_utterance(round);
    u.rule_index = plan.rule_index;
    u.mode = plan.mode;
    u.purpose = rule.purpose;

    if (plan.mode == Mode::SelfReceival) {
        u.speaker = kSystemSpeaker;
        u.recipients = {plan.initiator};
        u.content = plan.system_injection.value_or(rule.content);
        deliver(u, {plan.initiator});
        emit(std::move(u));
        return {transcript_.utterances.back()};
    }

    auto& initiator = agent(plan.initiator);
    agent::InteractionRequest request{rule.purpose, rule.content, {}, std::nullopt};
    auto supervised = monitor::supervised_act(initiator, request, rule, script_, &micro_, config_.monitor);

    u.speaker = plan.initiator;
    u.recipients = plan.deliveries;
    u.content = supervised.reply.content;
    if (config_.monitor.micro_enabled) u.monitor = supervised.annotation;
    u.flags = std::move(supervised.flags);
    auto events = initiator.take_events();
    u.flags.insert(events.begin(), events.end());
    u.debug["plan"] = supervised.reply.plan;
    if (!supervised.rejected_drafts.empty()) u.debug["rejected_drafts"] = std::move(supervised.rejected_drafts);

    std::vector<std::string> observers = {plan.initiator};
    observers.insert(observers.end(), plan.deliveries.begin(), plan.deliveries.end());
    deliver(u, observers);
    emit(std::move(u));
    return {transcript_.utterances.back()};
}

monitor::MacroVerdict Session::macro_boundary(int round) {
    const int first = round - config_.monitor.macro_window + 1;
    std::vector<Utterance> window;
    for (const auto& u : transcript_.utterances) {
        if (u.round >= first && u.round <= round) window.push_back(u);
    }
    auto verdict = macro_.check(window, script_);
    if (!window.empty()) {
        json record = {{"after_round", round}, {"aligned", verdict.aligned}, {"flags", verdict.flags}};
        record["adjustment"] = verdict.adjustment ? json(*verdict.adjustment) : json(nullptr);
        pending_debug_["macro_check"] = std::move(record);
    }
    if (!verdict.aligned && verdict.adjustment) {
        for (const auto& role : script_.roles) {
            Utterance u = make_utterance(round + 1);
            u.speaker = kSystemSpeaker;
            u.recipients = {role.name};
            u.mode = Mode::SelfReceival;
            u.purpose = "macro adjustment";
            u.content = *verdict.adjustment;
            u.flags.insert("macro_adjustment");
            deliver(u, {role.name});
            emit(std::move(u));
        }
    }
    return verdict;
}

const Transcript& Session::run() {
    if (sink_) {
        *sink_ << transcript_.header().dump() << '\n';
        sink_->flush();
    }
    try {
        for (int round = 1; round <= script_.rounds; ++round) {
            for (const auto& rule : script_.rules) execute_rule(compile_rule(rule, script_), round);
            const bool boundary = round < script_.rounds && round % config_.monitor.macro_window == 0;
            if (config_.monitor.macro_enabled && boundary) macro_boundary(round);
        }
    } catch (const BackendError& e) {
        transcript_.abort_reason = e.what();
        if (sink_) {
            *sink_ << json{{"abort", {{"reason", *transcript_.abort_reason}}}}.dump() << '\n';
            sink_->flush();
        }
        throw;
    }
    return transcript_;
}

Transcript run_session(const scenario::ScenarioScript& script, llm::Backend& backend, const SessionConfig& config,
                       std::ostream* sink, llm::CallLog* log) {
    Session session(script, backend, config, sink, log);
    return session.run();
}

}  // namespace mindscope::interp
