#include "mindscope/cbdc.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "mindscope/interpreter.hpp"
#include "mindscope/util.hpp"

namespace mindscope::cbdc {

using decision::Side;
using nlohmann::json;

void DetectionInput::validate() const {
    if (trim(text).empty()) throw EmptyInput("detection input text is empty");
}

std::string DetectionInput::digest() const {
    json j = {{"text", text}, {"context", context ? json(*context) : json()}};
    return sha256_hex(j.dump());
}

namespace {

bool looks_like_transcript(const std::string& contents) {
    std::istringstream in(contents);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto j = json::parse(line, nullptr, false);
        return j.is_object() && j.contains("session_id") && j.contains("script_digest");
    }
    return false;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string strip_list_marker(std::string item) {
    item = trim(item);
    std::size_t i = 0;
    while (i < item.size() && (item[i] == '-' || item[i] == '*' || item[i] == '#')) ++i;
    std::size_t j = i;
    while (j < item.size() && std::isdigit(static_cast<unsigned char>(item[j]))) ++j;
    if (j > i && j < item.size() && (item[j] == '.' || item[j] == ')')) i = j + 1;
    item = trim(item.substr(i));
    while (!item.empty() && (item.back() == '.' || item.back() == '!')) item.pop_back();
    return trim(item);
}

std::string after_colon(const std::string& s, std::size_t from) {
    std::string rest = s.substr(from);
    rest = trim(rest);
    if (!rest.empty() && (rest.front() == ':' || rest.front() == '-')) rest.erase(0, 1);
    return trim(rest);
}

const char* kPhaseInstructions[] = {
    "Introduce the features of your bias and typical cases of it.",
    "Argue, with evidence from the text, that your bias is the one present.",
    "Refute your opponent's views using the debate so far.",
    "Summarize your position in a few sentences.",
};

}  // namespace

DetectionInput load_detection_input(const std::filesystem::path& path) {
    const std::string contents = read_file(path);
    DetectionInput input;
    if (looks_like_transcript(contents)) {
        input.text = render_dialogue(interp::Transcript::parse(contents).utterances);
    } else {
        input.text = contents;
    }
    input.validate();
    return input;
}

std::string_view to_string(Persona p) { return p == Persona::Aggressive ? "aggressive" : "conservative"; }

const std::array<ScreeningPersona, 2>& screening_personas() {
    static const std::array<ScreeningPersona, 2> personas = {{
        {Persona::Aggressive,
         "You are an aggressive screener. Flag every cognitive bias that is plausibly present, even on weak "
         "evidence."},
        {Persona::Conservative,
         "You are a conservative screener. Flag only cognitive biases with direct textual evidence in the "
         "text."},
    }};
    return personas;
}

ScreenResult parse_screen_reply(const std::string& reply, const knowledge::KnowledgeLibrary& library) {
    ScreenResult out;
    std::set<std::string> seen;
    std::string item;
    auto flush = [&] {
        const std::string name = strip_list_marker(item);
        item.clear();
        if (name.empty()) return;
        const std::string norm = normalize_phrase(name);
        if (norm == "none" || norm == "no bias" || norm == "no biases") return;
        if (const auto* d = library.resolve(name)) {
            if (seen.insert(d->id).second) out.ids.push_back(d->id);
        } else {
            out.dropped.push_back(name);
        }
    };
    for (char c : reply) {
        if (c == ';' || c == ',' || c == '\n') {
            flush();
        } else {
            item.push_back(c);
        }
    }
    flush();
    std::sort(out.ids.begin(), out.ids.end(), [&](const std::string& x, const std::string& y) {
        return library.get(x).catalog_index < library.get(y).catalog_index;
    });
    return out;
}

ScreenResult screen(llm::Caller& caller, const DetectionInput& input, const ScreeningPersona& persona,
                    const knowledge::KnowledgeLibrary& library, std::optional<std::size_t> shortlist) {
    std::string catalog;
    if (shortlist) {
        for (const auto& hit : library.search(input.text, *shortlist)) catalog += "- " + hit.entry->name + "\n";
    } else {
        for (const auto& d : library.entries()) catalog += "- " + d.name + "\n";
    }
    std::string user = "Cognitive bias catalog:\n" + catalog + "\nText:\n" + input.text + "\n";
    if (input.context) user += "\nContext:\n" + *input.context + "\n";
    user += "\nList the catalog biases the text exhibits, separated by semicolons, or reply none.";
    const auto reply = caller.call({{"system", "You screen text for cognitive biases. " + persona.instructions},
                                    {"user", user}},
                                   llm::kEvaluatorTemperature);
    return parse_screen_reply(reply.content, library);
}

json CandidateSet::to_json() const {
    json prov = json::object();
    for (const auto& [id, from] : provenance) prov[id] = from;
    return {{"ids", ids}, {"provenance", prov}};
}

CandidateSet build_candidates(const std::vector<std::string>& b_r, const std::vector<std::string>& b_c,
                              const knowledge::KnowledgeLibrary& library) {
    CandidateSet out;
    for (const auto& id : b_r) out.provenance[library.get(id).id].insert("aggressive");
    for (const auto& id : b_c) out.provenance[library.get(id).id].insert("conservative");
    for (const auto& [id, from] : out.provenance) out.ids.push_back(id);
    std::sort(out.ids.begin(), out.ids.end(), [&](const std::string& x, const std::string& y) {
        return library.get(x).catalog_index < library.get(y).catalog_index;
    });
    return out;
}

json LabeledVerdict::to_json() const {
    json j = {{"bias_id", bias_id}, {"present", present}, {"rationale", rationale}};
    if (unparsed) j["flags"] = json::array({"labeled_unparsed"});
    return j;
}

LabeledVerdict parse_labeled_reply(const std::string& bias_id, const std::string& reply) {
    LabeledVerdict v;
    v.bias_id = bias_id;
    const std::string text = trim(reply);
    if (starts_with_ci(text, "PRESENT")) {
        v.present = true;
        v.rationale = after_colon(text, 7);
    } else if (starts_with_ci(text, "ABSENT")) {
        v.rationale = after_colon(text, 6);
    } else {
        v.unparsed = true;
        v.rationale = text;
    }
    return v;
}

std::string agent_brief(const knowledge::BiasDescriptor& d) {
    std::string s = "You are the detection agent for " + d.name + ".\nDefinition: " + d.description;
    if (!d.example.empty()) s += "\nExample: " + d.example;
    return s;
}

LabeledVerdict labeled_detect(llm::Caller& caller, const std::string& bias_id, const DetectionInput& input,
                              const knowledge::KnowledgeLibrary& library) {
    const auto& d = library.get(bias_id);
    std::string user = "Text:\n" + input.text + "\n";
    if (input.context) user += "\nContext:\n" + *input.context + "\n";
    user += "\nDoes the text exhibit " + d.name +
            "? Reply PRESENT or ABSENT, then a colon and a one-sentence rationale.";
    const auto reply = caller.call({{"system", agent_brief(d)}, {"user", user}}, llm::kEvaluatorTemperature);
    return parse_labeled_reply(bias_id, reply.content);
}

json DebateRecord::to_json() const {
    json utts = json::array();
    for (const auto& u : utterances) {
        utts.push_back(
            {{"phase", u.phase}, {"side", decision::to_string(u.side)}, {"speaker", u.speaker}, {"content", u.content}});
    }
    json cards = json::array();
    for (const auto& c : scores) {
        cards.push_back({{"referee", c.referee},
                         {"a", c.a.values},
                         {"b", c.b.values},
                         {"attempts", c.attempts},
                         {"clamped", c.clamped}});
    }
    json j = {{"match_id", match_id}, {"side_a", side_a},   {"side_b", side_b}, {"utterances", utts},
              {"scores", cards},      {"winner", winner},   {"margin", margin}, {"flags", flags}};
    if (forfeit) {
        j["forfeit"] = {{"side", decision::to_string(*forfeit)},
                        {"scores", decision::ScoreVector{}.values},
                        {"error", forfeit_error.value_or("")}};
    }
    return j;
}

std::string render_debate(const DebateRecord& debate) {
    std::string out;
    for (const auto& u : debate.utterances) {
        out += "[" + u.phase + "] " + std::string(decision::to_string(u.side)) + " (" + u.speaker + "): " + u.content +
               "\n";
    }
    return out;
}

DebateRecord run_debate(const std::string& match_id, const std::string& id_a, const std::string& id_b,
                        llm::Caller& caller_a, llm::Caller& caller_b, const DetectionInput& input,
                        const knowledge::KnowledgeLibrary& library) {
    DebateRecord rec;
    rec.match_id = match_id;
    rec.side_a = id_a;
    rec.side_b = id_b;
    const auto& da = library.get(id_a);
    const auto& db = library.get(id_b);

    for (std::size_t p = 0; p < kDebatePhases.size(); ++p) {
        for (Side side : {Side::A, Side::B}) {
            const auto& self = side == Side::A ? da : db;
            const auto& other = side == Side::A ? db : da;
            auto& caller = side == Side::A ? caller_a : caller_b;
            std::string user = "Text:\n" + input.text + "\n";
            if (input.context) user += "\nContext:\n" + *input.context + "\n";
            user += "\nDebate so far:\n" + (rec.utterances.empty() ? std::string("(none)\n") : render_debate(rec));
            user += "\nPhase: " + std::string(kDebatePhases[p]) + ". " + kPhaseInstructions[p];
            const std::string system = agent_brief(self) + "\nYou argue that the text exhibits " + self.name +
                                       ", against an agent arguing for " + other.name + ".";
            try {
                const auto reply = caller.call({{"system", system}, {"user", user}}, llm::kRoleTemperature);
                rec.utterances.push_back({std::string(kDebatePhases[p]), side, self.id, reply.content});
            } catch (const BackendError& e) {
                rec.forfeit = side;
                rec.forfeit_error = e.what();
                rec.flags.insert("forfeit");
                rec.winner = side == Side::A ? rec.side_b : rec.side_a;
                return rec;
            }
        }
    }
    return rec;
}

std::optional<RefereeCard> score_debate(llm::Caller& caller, const decision::RefereeProfile& referee,
                                        const DebateRecord& debate, const DetectionInput& input) {
    std::string user = "Text:\n" + input.text + "\n";
    if (input.context) user += "\nContext:\n" + *input.context + "\n";
    user += "\nSide A argues " + debate.side_a + "; side B argues " + debate.side_b + ".\n\nDebate:\n" +
            render_debate(debate) + "\nScore both sides.";
    const std::vector<llm::Message> messages = {
        {"system", "You are referee " + referee.tag + ". " + referee.style_instructions + "\n" + decision::referee_rubric()},
        {"user", user}};
    RefereeCard card;
    card.referee = referee.tag;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        card.attempts = attempt;
        const auto reply = caller.call(messages, llm::kEvaluatorTemperature);
        if (auto parsed = decision::parse_referee_reply(reply.content)) {
            card.a = parsed->a;
            card.b = parsed->b;
            card.clamped = parsed->clamped;
            return card;
        }
    }
    return std::nullopt;
}

void judge_debate(DebateRecord& debate, llm::Caller& ja1, llm::Caller& ja2, const DetectionInput& input,
                  const decision::WeightVector& weights) {
    if (debate.forfeit) return;
    const auto& profiles = decision::referee_profiles();
    auto c1 = score_debate(ja1, profiles[0], debate, input);
    auto c2 = score_debate(ja2, profiles[1], debate, input);
    if (c1) debate.scores.push_back(*c1);
    if (c2) debate.scores.push_back(*c2);
    if ((c1 && c1->clamped) || (c2 && c2->clamped)) debate.flags.insert("score_clamped");
    if (!c1 || !c2) {
        debate.flags.insert("referee_unparsed");
        debate.flags.insert("tie_break");
        debate.winner = debate.side_a;
        debate.margin = 0.0;
        return;
    }
    const auto w = decision::decide(weights, {c1->a, c2->a}, {c1->b, c2->b});
    debate.winner = w.side == Side::A ? debate.side_a : debate.side_b;
    debate.margin = w.margin;
    if (w.tie_break) debate.flags.insert("tie_break");
}

json DetectionReport::to_json() const {
    auto screen_json = [](const std::optional<ScreenResult>& s) -> json {
        if (!s) return nullptr;
        return {{"ids", s->ids}, {"dropped", s->dropped}};
    };
    json labeled_json = json::array();
    for (const auto& v : labeled) labeled_json.push_back(v.to_json());
    json debates_json = json::array();
    for (const auto& d : debates) debates_json.push_back(d.to_json());
    const std::size_t leaves = bracket ? bracket->leaf_count() : 0;
    json j = {{"engine_version", kEngineVersion},
              {"session_id", session_id},
              {"input_digest", input_digest},
              {"weights", decision::to_json(weights)},
              {"screening", {{"aggressive", screen_json(aggressive)}, {"conservative", screen_json(conservative)}}},
              {"candidates", candidates ? candidates->to_json() : json()},
              {"labeled", labeled_json},
              {"confirmed", confirmed},
              {"bracket", bracket ? bracket->to_json() : json()},
              {"debates", debates_json},
              {"complexity",
               {{"leaf_count", leaves},
                {"matches", bracket ? bracket->match_count() : 0},
                {"rounds", Bracket::expected_rounds(leaves)}}},
              {"verdict", verdict ? json(*verdict) : json()},
              {"calls", calls}};
    if (error) j["error"] = *error;
    return j;
}

std::string DetectionReport::serialize() const { return to_json().dump(2) + "\n"; }

DetectionReport detect(llm::Backend& backend, const knowledge::KnowledgeLibrary& library,
                       const DetectionInput& input, const DetectConfig& config) {
    input.validate();
    DetectionReport report;
    report.session_id = config.session_id;
    report.input_digest = input.digest();
    report.weights = config.weights;
    llm::CallLog log;

    std::map<std::string, llm::Caller> agents;
    auto agent = [&](const std::string& id) -> llm::Caller& { return agents.at(id); };

    try {
        const auto& personas = screening_personas();
        llm::Caller aggressive(backend, config.session_id, "screen-aggressive", &log);
        llm::Caller conservative(backend, config.session_id, "screen-conservative", &log);
        report.aggressive = screen(aggressive, input, personas[0], library, config.shortlist);
        report.conservative = screen(conservative, input, personas[1], library, config.shortlist);
        report.candidates = build_candidates(report.aggressive->ids, report.conservative->ids, library);

        const auto& ids = report.candidates->ids;
        for (const auto& id : ids) agents.emplace(id, llm::Caller(backend, config.session_id, "CA:" + id, &log));
        report.labeled.resize(ids.size());
        parallel_for(ids.size(), config.jobs,
                     [&](std::size_t i) { report.labeled[i] = labeled_detect(agent(ids[i]), ids[i], input, library); });
        for (const auto& v : report.labeled)
            if (v.present) report.confirmed.push_back(v.bias_id);

        report.bracket = Bracket::build(report.confirmed);
        report.bracket->play([&](const std::vector<Match>& matches) {
            std::vector<DebateRecord> records(matches.size());
            parallel_for(matches.size(), config.jobs, [&](std::size_t i) {
                const Match& m = matches[i];
                records[i] = run_debate(m.id, m.a, m.b, agent(m.a), agent(m.b), input, library);
                llm::Caller ja1(backend, config.session_id, "JA1:" + m.id, &log);
                llm::Caller ja2(backend, config.session_id, "JA2:" + m.id, &log);
                judge_debate(records[i], ja1, ja2, input, config.weights);
            });
            std::vector<std::string> winners;
            for (auto& r : records) {
                winners.push_back(r.winner);
                report.debates.push_back(std::move(r));
            }
            return winners;
        });
        report.verdict = report.confirmed.empty() ? std::string(kNoBias) : *report.bracket->champion();
    } catch (const BackendError& e) {
        report.error = e.what();
        report.calls = log.to_json();
        throw DetectionFailure(e.what(), std::move(report));
    }
    report.calls = log.to_json();
    return report;
}

}  // namespace mindscope::cbdc
