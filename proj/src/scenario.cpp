#include "mindscope/scenario.hpp"

#include <algorithm>
#include <set>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::scenario {

using nlohmann::json;

namespace {

std::string required_string(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "." + key + ": missing required field");
    if (!it->is_string()) throw SchemaError(path + "." + key + ": expected string");
    return it->get<std::string>();
}

std::string optional_string(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) throw SchemaError(path + "." + key + ": expected string");
    return it->get<std::string>();
}

const json& required_object(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "." + key + ": missing required field");
    if (!it->is_object()) throw SchemaError(path + "." + key + ": expected object");
    return *it;
}

json extras(const json& obj, std::initializer_list<std::string_view> known) {
    json out = json::object();
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) out[it.key()] = it.value();
    }
    return out;
}

void merge_extras(json& target, const json& extra) {
    for (auto it = extra.begin(); it != extra.end(); ++it) {
        if (!target.contains(it.key())) target[it.key()] = it.value();
    }
}

RoleSpec parse_role(const json& obj, std::size_t i) {
    const std::string path = "roles[" + std::to_string(i) + "]";
    if (!obj.is_object()) throw SchemaError(path + ": expected object");
    RoleSpec role;
    role.name = required_string(obj, "name", path);
    const auto archetype = required_string(obj, "archetype", path);
    auto parsed = parse_archetype(archetype);
    if (!parsed) throw SchemaError(path + ".archetype: unknown archetype '" + archetype + "'");
    role.archetype = *parsed;
    role.identity = optional_string(obj, "identity", path);
    role.task = optional_string(obj, "task", path);
    role.backstory = optional_string(obj, "backstory", path);
    role.extra = extras(obj, {"name", "archetype", "identity", "task", "backstory"});
    return role;
}

ScenarioRule parse_rule(const json& obj, std::size_t i) {
    const std::string path = "rules[" + std::to_string(i) + "]";
    if (!obj.is_object()) throw SchemaError(path + ": expected object");
    ScenarioRule rule;
    rule.index = i;
    if (auto it = obj.find("index"); it != obj.end()) {
        if (!it->is_number_unsigned() || it->get<std::size_t>() != i) {
            throw SchemaError(path + ".index: rule indices must be contiguous from 0");
        }
    }
    rule.initiator = required_string(obj, "initiator", path);
    const auto mode = required_string(obj, "mode", path);
    auto parsed = parse_mode(mode);
    if (!parsed) throw SchemaError(path + ".mode: unknown transmission mode '" + mode + "'");
    rule.mode.tag = *parsed;
    if (auto it = obj.find("recipients"); it != obj.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaError(path + ".recipients: expected array");
        for (const auto& r : *it) {
            if (!r.is_string()) throw SchemaError(path + ".recipients: expected role names");
            rule.mode.recipients.push_back(r.get<std::string>());
        }
    }
    rule.purpose = optional_string(obj, "purpose", path);
    rule.content = required_string(obj, "content", path);
    rule.extra = extras(obj, {"index", "initiator", "mode", "recipients", "purpose", "content"});
    return rule;
}

}  // namespace

std::string_view to_string(Archetype a) {
    switch (a) {
        case Archetype::Subject: return "Subject";
        case Archetype::Confederate: return "Confederate";
        case Archetype::Moderator: return "Moderator";
    }
    return "Subject";
}

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Unicast: return "unicast";
        case Mode::Broadcast: return "broadcast";
        case Mode::Multicast: return "multicast";
        case Mode::SelfReceival: return "self_receival";
    }
    return "broadcast";
}

std::optional<Archetype> parse_archetype(std::string_view s) {
    for (auto a : {Archetype::Subject, Archetype::Confederate, Archetype::Moderator}) {
        if (to_string(a) == s) return a;
    }
    return std::nullopt;
}

std::optional<Mode> parse_mode(std::string_view s) {
    for (auto m : {Mode::Unicast, Mode::Broadcast, Mode::Multicast, Mode::SelfReceival}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

const RoleSpec* ScenarioScript::find_role(std::string_view name) const {
    auto it = std::find_if(roles.begin(), roles.end(), [&](const RoleSpec& r) { return r.name == name; });
    return it == roles.end() ? nullptr : &*it;
}

ValidationReport validate_script(const ScenarioScript& script) {
    ValidationReport report;
    auto add = [&](ViolationKind kind, std::optional<std::size_t> rule, std::string path, std::string msg) {
        report.push_back({kind, rule, std::move(path), std::move(msg)});
    };

    if (script.roles.empty()) add(ViolationKind::Schema, std::nullopt, "roles", "at least one role required");
    if (script.rules.empty()) add(ViolationKind::Schema, std::nullopt, "rules", "at least one rule required");
    if (script.rounds < 0) add(ViolationKind::Schema, std::nullopt, "rounds", "rounds must be non-negative");

    std::set<std::string> names;
    for (std::size_t i = 0; i < script.roles.size(); ++i) {
        if (script.roles[i].name.empty()) {
            add(ViolationKind::Schema, std::nullopt, "roles[" + std::to_string(i) + "].name", "empty role name");
        }
        if (!names.insert(script.roles[i].name).second) {
            add(ViolationKind::Schema, std::nullopt, "roles[" + std::to_string(i) + "].name",
                "duplicate role '" + script.roles[i].name + "'");
        }
    }

    for (std::size_t i = 0; i < script.rules.size(); ++i) {
        const auto& rule = script.rules[i];
        const std::string path = "rules[" + std::to_string(i) + "]";
        if (rule.index != i) add(ViolationKind::Schema, i, path + ".index", "rule indices must be contiguous from 0");
        if (!names.count(rule.initiator)) {
            add(ViolationKind::Reference, i, path + ".initiator", "unknown role '" + rule.initiator + "'");
        }
        const auto& recips = rule.mode.recipients;
        switch (rule.mode.tag) {
            case Mode::Unicast:
                if (recips.size() != 1) {
                    add(ViolationKind::Schema, i, path + ".recipients",
                        "unicast requires exactly one recipient, got " + std::to_string(recips.size()));
                }
                break;
            case Mode::Multicast:
                if (recips.empty()) add(ViolationKind::Schema, i, path + ".recipients", "multicast requires recipients");
                break;
            case Mode::Broadcast:
            case Mode::SelfReceival:
                if (!recips.empty()) {
                    add(ViolationKind::Schema, i, path + ".recipients",
                        std::string(to_string(rule.mode.tag)) + " carries no recipient list");
                }
                break;
        }
        std::set<std::string> seen;
        for (const auto& r : recips) {
            if (!names.count(r)) add(ViolationKind::Reference, i, path + ".recipients", "unknown role '" + r + "'");
            if (r == rule.initiator) {
                add(ViolationKind::Schema, i, path + ".recipients", "initiator '" + r + "' cannot be a recipient");
            }
            if (!seen.insert(r).second) add(ViolationKind::Schema, i, path + ".recipients", "duplicate recipient '" + r + "'");
        }
    }
    return report;
}

ScenarioScript parse_script_structure(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw SyntaxError(std::string("malformed script: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("script: expected a JSON object");

    ScenarioScript script;
    const auto& scenario = required_object(doc, "scenario", "script");
    script.purpose = required_string(scenario, "purpose", "scenario");
    script.background = optional_string(scenario, "background", "scenario");

    auto roles = doc.find("roles");
    if (roles == doc.end() || !roles->is_array()) throw SchemaError("roles: missing required array");
    for (std::size_t i = 0; i < roles->size(); ++i) script.roles.push_back(parse_role((*roles)[i], i));

    auto rules = doc.find("rules");
    if (rules == doc.end() || !rules->is_array()) throw SchemaError("rules: missing required array");
    for (std::size_t i = 0; i < rules->size(); ++i) script.rules.push_back(parse_rule((*rules)[i], i));

    if (auto it = doc.find("rounds"); it != doc.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw SchemaError("rounds: expected integer");
        script.rounds = it->get<int>();
    }

    if (auto it = doc.find("evaluation"); it != doc.end() && !it->is_null()) {
        if (!it->is_object()) throw SchemaError("evaluation: expected object");
        script.evaluation.bias_id = optional_string(*it, "bias_id", "evaluation");
        script.evaluation.criteria = optional_string(*it, "criteria", "evaluation");
    }

    json extra = extras(doc, {"scenario", "roles", "rules", "rounds", "evaluation"});
    json scenario_extra = extras(scenario, {"purpose", "background"});
    if (!scenario_extra.empty()) extra["scenario"] = scenario_extra;
    if (auto it = doc.find("evaluation"); it != doc.end() && it->is_object()) {
        json ev_extra = extras(*it, {"bias_id", "criteria"});
        if (!ev_extra.empty()) extra["evaluation"] = ev_extra;
    }
    script.extra = std::move(extra);
    return script;
}

ScenarioScript parse_script(std::string_view document) {
    ScenarioScript script = parse_script_structure(document);
    auto report = validate_script(script);
    if (!report.empty()) {
        const auto& first = report.front();
        const std::string msg = first.path + ": " + first.message;
        if (first.kind == ViolationKind::Reference) throw ReferenceError(msg);
        throw SchemaError(msg);
    }
    return script;
}

ScenarioScript load_script(const std::filesystem::path& path) { return parse_script(read_file(path)); }

json to_json(const ScenarioScript& script) {
    json doc = json::object();
    json scenario = {{"purpose", script.purpose}, {"background", script.background}};
    json evaluation = {{"bias_id", script.evaluation.bias_id}, {"criteria", script.evaluation.criteria}};
    json top_extra = script.extra;
    if (top_extra.contains("scenario")) {
        merge_extras(scenario, top_extra["scenario"]);
        top_extra.erase("scenario");
    }
    if (top_extra.contains("evaluation")) {
        merge_extras(evaluation, top_extra["evaluation"]);
        top_extra.erase("evaluation");
    }
    doc["scenario"] = std::move(scenario);
    doc["evaluation"] = std::move(evaluation);
    doc["rounds"] = script.rounds;

    json roles = json::array();
    for (const auto& r : script.roles) {
        json role = {{"name", r.name},
                     {"archetype", to_string(r.archetype)},
                     {"identity", r.identity},
                     {"task", r.task},
                     {"backstory", r.backstory}};
        merge_extras(role, r.extra);
        roles.push_back(std::move(role));
    }
    doc["roles"] = std::move(roles);

    json rules = json::array();
    for (const auto& r : script.rules) {
        json rule = {{"initiator", r.initiator},
                     {"mode", to_string(r.mode.tag)},
                     {"purpose", r.purpose},
                     {"content", r.content}};
        if (r.mode.tag == Mode::Unicast || r.mode.tag == Mode::Multicast) rule["recipients"] = r.mode.recipients;
        merge_extras(rule, r.extra);
        rules.push_back(std::move(rule));
    }
    doc["rules"] = std::move(rules);
    merge_extras(doc, top_extra);
    return doc;
}

json to_json(const Violation& v) {
    json out = {{"kind", v.kind == ViolationKind::Reference ? "reference" : "schema"},
                {"path", v.path},
                {"message", v.message}};
    out["rule_index"] = v.rule_index ? json(*v.rule_index) : json(nullptr);
    return out;
}

std::string serialize_script(const ScenarioScript& script) { return to_json(script).dump(2); }

std::string script_digest(const ScenarioScript& script) { return sha256_hex(to_json(script).dump()); }

StaticCase parse_static_case(const json& record, std::size_t line_no) {
    if (!record.is_object()) throw RecordError(line_no, "expected a JSON object");
    auto text = [&](const char* key, bool required) -> std::string {
        auto it = record.find(key);
        if (it == record.end() || it->is_null()) {
            if (required) throw RecordError(line_no, std::string("missing '") + key + "'");
            return {};
        }
        if (!it->is_string()) throw RecordError(line_no, std::string("'") + key + "' must be a string");
        return it->get<std::string>();
    };

    StaticCase c;
    c.question = text("question", true);
    if (trim(c.question).empty()) throw RecordError(line_no, "question is empty");
    c.evaluation_tag = text("evaluation_tag", false);
    c.answer = text("answer", false);
    c.model = text("model", false);
    if (auto it = record.find("presence_of_bias"); it != record.end() && !it->is_null()) {
        if (!it->is_boolean()) throw RecordError(line_no, "'presence_of_bias' must be boolean or null");
        c.presence_of_bias = it->get<bool>();
    }
    if (auto name = text("bias_name", false); !name.empty()) c.bias_name = std::move(name);
    if (c.presence_of_bias == false && c.bias_name) {
        throw RecordError(line_no, "bias_name set while presence_of_bias is false");
    }
    return c;
}

std::vector<StaticCase> load_static_cases(const std::filesystem::path& path) {
    std::vector<StaticCase> cases;
    for_each_json_line(path, [&](std::size_t line_no, const json& record) {
        cases.push_back(parse_static_case(record, line_no));
    });
    return cases;
}

json to_json(const StaticCase& c) {
    json out = {{"question", c.question},
                {"evaluation_tag", c.evaluation_tag},
                {"answer", c.answer},
                {"model", c.model}};
    out["presence_of_bias"] = c.presence_of_bias ? json(*c.presence_of_bias) : json(nullptr);
    out["bias_name"] = c.bias_name ? json(*c.bias_name) : json(nullptr);
    return out;
}

}  // namespace mindscope::scenario
