#include "mindscope/dialogue.hpp"

#include "mindscope/error.hpp"

namespace mindscope {

using nlohmann::json;

json to_json(const MonitorAnnotation& a) {
    json out = {{"verdict", a.verdict == Verdict::Deviate ? "deviate" : "conform"},
                {"rationale", a.rationale},
                {"attempts_used", a.attempts_used}};
    out["directive"] = a.directive ? json(*a.directive) : json(nullptr);
    return out;
}

MonitorAnnotation monitor_annotation_from_json(const json& j) {
    MonitorAnnotation a;
    a.verdict = j.at("verdict").get<std::string>() == "deviate" ? Verdict::Deviate : Verdict::Conform;
    a.rationale = j.value("rationale", std::string{});
    if (auto it = j.find("directive"); it != j.end() && !it->is_null()) a.directive = it->get<std::string>();
    a.attempts_used = j.value("attempts_used", 0);
    return a;
}

json to_json(const Utterance& u) {
    json out = {{"turn", u.turn},
                {"round", u.round},
                {"speaker", u.speaker},
                {"recipients", u.recipients},
                {"mode", scenario::to_string(u.mode)},
                {"purpose", u.purpose},
                {"content", u.content},
                {"flags", u.flags},
                {"debug", u.debug}};
    out["rule_index"] = u.rule_index ? json(*u.rule_index) : json(nullptr);
    out["monitor"] = u.monitor ? to_json(*u.monitor) : json(nullptr);
    return out;
}

Utterance utterance_from_json(const json& j) {
    try {
        Utterance u;
        u.turn = j.at("turn").get<std::uint64_t>();
        u.round = j.at("round").get<int>();
        if (auto it = j.find("rule_index"); it != j.end() && !it->is_null()) u.rule_index = it->get<std::size_t>();
        u.speaker = j.at("speaker").get<std::string>();
        u.recipients = j.value("recipients", std::vector<std::string>{});
        auto mode = scenario::parse_mode(j.at("mode").get<std::string>());
        if (!mode) throw SchemaError("utterance: unknown mode");
        u.mode = *mode;
        u.purpose = j.value("purpose", std::string{});
        u.content = j.value("content", std::string{});
        if (auto it = j.find("monitor"); it != j.end() && !it->is_null()) u.monitor = monitor_annotation_from_json(*it);
        u.flags = j.value("flags", std::set<std::string>{});
        u.debug = j.value("debug", json::object());
        return u;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("utterance: ") + e.what());
    }
}

std::string render_dialogue(const std::vector<Utterance>& utterances) {
    std::string out;
    for (const auto& u : utterances) {
        out += "[round " + std::to_string(u.round) + "] " + u.speaker + ": " + u.content + "\n";
    }
    return out;
}

}  // namespace mindscope
