#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mindscope::scenario {

enum class Archetype { Subject, Confederate, Moderator };

enum class Mode { Unicast, Broadcast, Multicast, SelfReceival };

std::string_view to_string(Archetype a);
std::string_view to_string(Mode m);
std::optional<Archetype> parse_archetype(std::string_view s);
std::optional<Mode> parse_mode(std::string_view s);

struct RoleSpec {
    std::string name;
    Archetype archetype = Archetype::Subject;
    std::string identity;
    std::string task;
    std::string backstory;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const RoleSpec&) const = default;
};

struct TransmissionMode {
    Mode tag = Mode::Broadcast;
    std::vector<std::string> recipients;

    bool operator==(const TransmissionMode&) const = default;
};

struct ScenarioRule {
    std::size_t index = 0;
    std::string initiator;
    TransmissionMode mode;
    std::string purpose;
    std::string content;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const ScenarioRule&) const = default;
};

struct Evaluation {
    std::string bias_id;
    std::string criteria;

    bool operator==(const Evaluation&) const = default;
};

struct ScenarioScript {
    std::string purpose;
    std::string background;
    std::vector<RoleSpec> roles;
    std::vector<ScenarioRule> rules;
    int rounds = 1;
    Evaluation evaluation;
    nlohmann::json extra = nlohmann::json::object();

    const RoleSpec* find_role(std::string_view name) const;

    bool operator==(const ScenarioScript&) const = default;
};

enum class ViolationKind { Schema, Reference };

struct Violation {
    ViolationKind kind = ViolationKind::Schema;
    std::optional<std::size_t> rule_index;
    std::string path;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Parses a script document. Throws SyntaxError, SchemaError or ReferenceError.
ScenarioScript parse_script(std::string_view document);
/// Field mapping only; throws SyntaxError or SchemaError but skips the
/// referential checks of validate_script.
ScenarioScript parse_script_structure(std::string_view document);
ScenarioScript load_script(const std::filesystem::path& path);

/// Lists every invariant violation; empty iff the script is executable.
ValidationReport validate_script(const ScenarioScript& script);

nlohmann::json to_json(const ScenarioScript& script);
nlohmann::json to_json(const Violation& v);

/// Canonical serialization; parse_script(serialize_script(s)) == s.
std::string serialize_script(const ScenarioScript& script);

/// SHA-256 of the canonical serialization.
std::string script_digest(const ScenarioScript& script);

struct StaticCase {
    std::string question;
    std::string evaluation_tag;
    std::string answer;
    std::string model;
    std::optional<bool> presence_of_bias;
    std::optional<std::string> bias_name;

    bool operator==(const StaticCase&) const = default;
};

/// Reads a JSON Lines file of static cases; throws IoError or RecordError.
std::vector<StaticCase> load_static_cases(const std::filesystem::path& path);

StaticCase parse_static_case(const nlohmann::json& record, std::size_t line_no);
nlohmann::json to_json(const StaticCase& c);

}  // namespace mindscope::scenario
