#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/bracket.hpp"
#include "mindscope/decision.hpp"
#include "mindscope/error.hpp"
#include "mindscope/knowledge.hpp"
#include "mindscope/llm.hpp"

namespace mindscope::cbdc {

inline constexpr std::string_view kNoBias = "no-bias";

struct DetectionInput {
    std::string text;
    std::optional<std::string> context;

    /// Throws EmptyInput when the text is blank.
    void validate() const;
    std::string digest() const;
};

/// Plain text, or a session transcript (JSON Lines with a header line) which
/// is rendered as "[round r] speaker: content" lines.
DetectionInput load_detection_input(const std::filesystem::path& path);

enum class Persona { Aggressive, Conservative };
std::string_view to_string(Persona p);

struct ScreeningPersona {
    Persona tag = Persona::Aggressive;
    std::string instructions;
};

const std::array<ScreeningPersona, 2>& screening_personas();

struct ScreenResult {
    std::vector<std::string> ids;      // sorted by catalog_index
    std::vector<std::string> dropped;  // names that resolved to nothing
};

/// Splits a reply on ';', ',' and newlines, strips list markers, and
/// resolves each name through the library. "none" yields an empty set.
ScreenResult parse_screen_reply(const std::string& reply, const knowledge::KnowledgeLibrary& library);

/// One call listing the catalog (or a search shortlist) plus the persona
/// instructions.
ScreenResult screen(llm::Caller& caller, const DetectionInput& input, const ScreeningPersona& persona,
                    const knowledge::KnowledgeLibrary& library, std::optional<std::size_t> shortlist = {});

struct CandidateSet {
    std::vector<std::string> ids;  // sorted by catalog_index, unique
    std::map<std::string, std::set<std::string>> provenance;

    nlohmann::json to_json() const;
};

/// Union of both screening sets; throws NotFound for ids outside the library.
CandidateSet build_candidates(const std::vector<std::string>& b_r, const std::vector<std::string>& b_c,
                              const knowledge::KnowledgeLibrary& library);

struct LabeledVerdict {
    std::string bias_id;
    bool present = false;
    std::string rationale;
    bool unparsed = false;

    nlohmann::json to_json() const;
};

/// "PRESENT: ..." or "ABSENT: ..."; anything else is ABSENT and unparsed.
LabeledVerdict parse_labeled_reply(const std::string& bias_id, const std::string& reply);

/// The competitive agent's system prompt: its own descriptor.
std::string agent_brief(const knowledge::BiasDescriptor& d);

LabeledVerdict labeled_detect(llm::Caller& caller, const std::string& bias_id, const DetectionInput& input,
                              const knowledge::KnowledgeLibrary& library);

inline constexpr std::array<std::string_view, 4> kDebatePhases = {"opening", "argument", "refutation", "summary"};

struct DebateUtterance {
    std::string phase;
    decision::Side side = decision::Side::A;
    std::string speaker;  // bias id
    std::string content;
};

struct RefereeCard {
    std::string referee;  // "JA1" or "JA2"
    decision::ScoreVector a;
    decision::ScoreVector b;
    int attempts = 0;
    bool clamped = false;
};

struct DebateRecord {
    std::string match_id;
    std::string side_a;
    std::string side_b;
    std::vector<DebateUtterance> utterances;
    std::optional<decision::Side> forfeit;  // the side that failed
    std::optional<std::string> forfeit_error;
    std::vector<RefereeCard> scores;
    std::string winner;
    double margin = 0.0;
    std::set<std::string> flags;

    nlohmann::json to_json() const;
};

/// Eight calls in phase order, A before B in each phase. Each prompt carries
/// the test text, the speaker's descriptor and every earlier utterance. A
/// backend failure ends the match with the failing side forfeiting.
DebateRecord run_debate(const std::string& match_id, const std::string& id_a, const std::string& id_b,
                        llm::Caller& caller_a, llm::Caller& caller_b, const DetectionInput& input,
                        const knowledge::KnowledgeLibrary& library);

/// The full debate as shown to referees.
std::string render_debate(const DebateRecord& debate);

/// One referee call (plus one retry on an unparseable reply). nullopt when
/// both attempts were unparseable.
std::optional<RefereeCard> score_debate(llm::Caller& caller, const decision::RefereeProfile& referee,
                                        const DebateRecord& debate, const DetectionInput& input);

/// Scores with both referees and fills winner, margin and flags. Forfeits
/// skip the referees; unparseable scoring falls back to side A.
void judge_debate(DebateRecord& debate, llm::Caller& ja1, llm::Caller& ja2, const DetectionInput& input,
                  const decision::WeightVector& weights);

struct DetectConfig {
    std::string session_id = "detect";
    decision::WeightVector weights = decision::WeightVector::uniform();
    std::optional<std::size_t> shortlist;
    std::size_t jobs = 1;
};

struct DetectionReport {
    std::string session_id;
    std::string input_digest;
    decision::WeightVector weights = decision::WeightVector::uniform();
    std::optional<ScreenResult> aggressive;
    std::optional<ScreenResult> conservative;
    std::optional<CandidateSet> candidates;
    std::vector<LabeledVerdict> labeled;
    std::vector<std::string> confirmed;
    std::optional<Bracket> bracket;
    std::vector<DebateRecord> debates;
    std::optional<std::string> verdict;  // bias id or "no-bias"
    nlohmann::json calls = nlohmann::json::object();
    std::optional<std::string> error;

    nlohmann::json to_json() const;
    std::string serialize() const;  // indented JSON plus trailing newline
};

/// Raised by detect(); carries the report assembled up to the failure.
class DetectionFailure : public Error {
public:
    DetectionFailure(const std::string& what, DetectionReport partial)
        : Error(what), partial_(std::move(partial)) {}
    const DetectionReport& partial() const { return partial_; }

private:
    DetectionReport partial_;
};

/// Screening, candidate union, labeled detection, then the bracket of
/// debates over the confirmed set.
DetectionReport detect(llm::Backend& backend, const knowledge::KnowledgeLibrary& library,
                       const DetectionInput& input, const DetectConfig& config);

}  // namespace mindscope::cbdc
