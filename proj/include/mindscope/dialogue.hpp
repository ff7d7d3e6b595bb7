#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/scenario.hpp"

namespace mindscope {

enum class Verdict { Conform, Deviate };

struct MonitorAnnotation {
    Verdict verdict = Verdict::Conform;
    std::string rationale;
    std::optional<std::string> directive;  // present iff verdict == Deviate
    int attempts_used = 0;

    bool operator==(const MonitorAnnotation&) const = default;
};

inline constexpr const char* kSystemSpeaker = "system";

/// One line of dialogue. `turn` doubles as the utterance id within a session.
struct Utterance {
    std::uint64_t turn = 0;
    int round = 1;                          // 1-based
    std::optional<std::size_t> rule_index;  // null for macro adjustments
    std::string speaker;
    std::vector<std::string> recipients;
    scenario::Mode mode = scenario::Mode::Broadcast;
    std::string purpose;
    std::string content;
    std::optional<MonitorAnnotation> monitor;
    std::set<std::string> flags;
    nlohmann::json debug = nlohmann::json::object();

    bool is_system() const { return speaker == kSystemSpeaker; }
};

nlohmann::json to_json(const MonitorAnnotation& a);
MonitorAnnotation monitor_annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Utterance& u);
Utterance utterance_from_json(const nlohmann::json& j);

/// "[round r] speaker: content" lines, the plain-text view used in prompts.
std::string render_dialogue(const std::vector<Utterance>& utterances);

}  // namespace mindscope
