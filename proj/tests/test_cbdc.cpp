#include <gtest/gtest.h>

#include <functional>
#include <mutex>

#include "mindscope/cbdc.hpp"
#include "mindscope/error.hpp"
#include "mindscope/interpreter.hpp"
#include "mindscope/util.hpp"
#include "support/paths.hpp"
#include "support/pattern_backend.hpp"

using namespace mindscope;
using namespace mindscope::cbdc;
using decision::Side;

namespace {

const knowledge::KnowledgeLibrary& library() {
    static const auto lib = knowledge::KnowledgeLibrary::load(fixtures::library_path());
    return lib;
}

class FnBackend : public llm::Backend {
public:
    explicit FnBackend(std::function<std::string(const llm::ChatRequest&)> fn) : fn_(std::move(fn)) {}

    llm::ChatResponse complete(const llm::ChatRequest& r) override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(r);
        }
        return {fn_(r), {1, 1}, "fn"};
    }

    std::vector<llm::ChatRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

private:
    std::function<std::string(const llm::ChatRequest&)> fn_;
    mutable std::mutex mutex_;
    std::vector<llm::ChatRequest> requests_;
};

DetectionInput input(std::string text = "We already spent four million, so we must keep going.") {
    return {std::move(text), std::nullopt};
}

// Screens `aggressive` and `conservative`, confirms `present`, and debates
// with B always scoring higher.
std::function<std::string(const llm::ChatRequest&)> scripted(std::string aggressive, std::string conservative,
                                                             std::set<std::string> present) {
    return [=](const llm::ChatRequest& r) -> std::string {
        if (r.caller_id == "screen-aggressive") return aggressive;
        if (r.caller_id == "screen-conservative") return conservative;
        if (r.caller_id.rfind("JA", 0) == 0) return "A: 5 5 5 5 5 5 | B: 6 6 6 6 6 6";
        const std::string id = r.caller_id.substr(3);
        if (r.sequence_no == 0) return present.count(id) ? "PRESENT: yes" : "ABSENT: no";
        return id + " says " + std::to_string(r.sequence_no);
    };
}

}  // namespace

TEST(ScreenParse, SplitsStripsAndResolves) {
    const auto r = parse_screen_reply("1. Sunk cost fallacy\n- Anchoring; framing effect, Zeta bias", library());
    EXPECT_EQ(r.ids, (std::vector<std::string>{"anchoring", "framing-effect", "sunk-cost-fallacy"}));
    EXPECT_EQ(r.dropped, std::vector<std::string>{"Zeta bias"});
}

TEST(ScreenParse, NoneAndDuplicates) {
    EXPECT_TRUE(parse_screen_reply("None.", library()).ids.empty());
    EXPECT_EQ(parse_screen_reply("anchoring; Anchoring bias", library()).ids.size(), 1u);
}

TEST(Candidates, UnionWithProvenance) {
    const auto c = build_candidates({"sunk-cost-fallacy", "anchoring"}, {"anchoring", "loss-aversion"}, library());
    EXPECT_EQ(c.ids, (std::vector<std::string>{"anchoring", "loss-aversion", "sunk-cost-fallacy"}));
    EXPECT_EQ(c.provenance.at("anchoring"), (std::set<std::string>{"aggressive", "conservative"}));
    EXPECT_EQ(c.provenance.at("loss-aversion"), std::set<std::string>{"conservative"});
    EXPECT_EQ(c.provenance.at("sunk-cost-fallacy"), std::set<std::string>{"aggressive"});
    EXPECT_THROW(build_candidates({"zeta"}, {}, library()), NotFound);
    EXPECT_TRUE(build_candidates({}, {}, library()).ids.empty());
}

TEST(LabeledParse, PresentAbsentAndUnparsed) {
    const auto p = parse_labeled_reply("anchoring", "PRESENT: the first quote dominates");
    EXPECT_TRUE(p.present);
    EXPECT_EQ(p.rationale, "the first quote dominates");
    EXPECT_FALSE(parse_labeled_reply("anchoring", "absent - no number").present);
    const auto u = parse_labeled_reply("anchoring", "Maybe");
    EXPECT_FALSE(u.present);
    EXPECT_TRUE(u.unparsed);
}

TEST(Debate, EightUtterancesInPhaseOrderWithGrowingContext) {
    FnBackend b([](const llm::ChatRequest& r) { return r.caller_id + "#" + std::to_string(r.sequence_no); });
    llm::Caller ca(b, "s", "CA:anchoring"), cb(b, "s", "CA:framing-effect");
    const auto rec = run_debate("r1m0", "anchoring", "framing-effect", ca, cb, input(), library());
    ASSERT_EQ(rec.utterances.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(rec.utterances[i].phase, kDebatePhases[i / 2]);
        EXPECT_EQ(rec.utterances[i].side, i % 2 == 0 ? Side::A : Side::B);
    }
    EXPECT_EQ(rec.utterances[7].content, "CA:framing-effect#3");
    const auto reqs = b.requests();
    ASSERT_EQ(reqs.size(), 8u);
    // Each prompt carries every earlier utterance.
    for (std::size_t i = 1; i < reqs.size(); ++i) {
        const auto& user = reqs[i].messages.back().content;
        for (std::size_t k = 0; k < i; ++k)
            EXPECT_NE(user.find(rec.utterances[k].content), std::string::npos) << i << " " << k;
    }
    EXPECT_NE(reqs[0].messages.back().content.find("(none)"), std::string::npos);
}

TEST(Debate, BackendFailureForfeitsAndSkipsReferees) {
    FnBackend b([](const llm::ChatRequest& r) -> std::string {
        if (r.caller_id == "CA:framing-effect" && r.sequence_no == 1) throw TransportError("connection reset");
        return "ok";
    });
    llm::Caller ca(b, "s", "CA:anchoring"), cb(b, "s", "CA:framing-effect");
    auto rec = run_debate("r1m0", "anchoring", "framing-effect", ca, cb, input(), library());
    EXPECT_EQ(rec.forfeit, Side::B);
    EXPECT_EQ(rec.winner, "anchoring");
    EXPECT_EQ(rec.utterances.size(), 3u);
    EXPECT_TRUE(rec.flags.count("forfeit"));
    llm::Caller ja1(b, "s", "JA1:r1m0"), ja2(b, "s", "JA2:r1m0");
    const auto before = b.requests().size();
    judge_debate(rec, ja1, ja2, input(), decision::WeightVector::uniform());
    EXPECT_EQ(b.requests().size(), before);
    EXPECT_EQ(rec.to_json()["forfeit"]["side"], "b");
}

TEST(Judge, UnparseableRefereeRetriesOnceThenFallsBackToSideA) {
    FnBackend b([](const llm::ChatRequest& r) -> std::string {
        if (r.caller_id == "JA2:r1m0") return "I cannot score this";
        return "A: 1 1 1 1 1 1 | B: 9 9 9 9 9 9";
    });
    DebateRecord rec;
    rec.match_id = "r1m0";
    rec.side_a = "anchoring";
    rec.side_b = "framing-effect";
    llm::Caller ja1(b, "s", "JA1:r1m0"), ja2(b, "s", "JA2:r1m0");
    judge_debate(rec, ja1, ja2, input(), decision::WeightVector::uniform());
    EXPECT_EQ(ja2.sequence_no(), 2u);
    EXPECT_EQ(rec.winner, "anchoring");
    EXPECT_TRUE(rec.flags.count("referee_unparsed"));
    EXPECT_TRUE(rec.flags.count("tie_break"));
}

TEST(Judge, WeightedMarginDecides) {
    FnBackend b([](const llm::ChatRequest& r) -> std::string {
        return r.caller_id[2] == '1' ? "A: 8 0 0 0 0 0 | B: 2 9 9 9 9 9" : "A: 6 0 0 0 0 0 | B: 2 9 9 9 9 9";
    });
    DebateRecord rec;
    rec.side_a = "anchoring";
    rec.side_b = "framing-effect";
    llm::Caller ja1(b, "s", "JA1:x"), ja2(b, "s", "JA2:x");
    judge_debate(rec, ja1, ja2, input(), decision::WeightVector::vertex(0));
    EXPECT_EQ(rec.winner, "anchoring");
    EXPECT_NEAR(rec.margin, 5.0, 1e-12);
}

TEST(Detect, EmptyCandidateSetGivesNoBias) {
    FnBackend b(scripted("none", "none", {}));
    const auto report = detect(b, library(), input(), {});
    EXPECT_EQ(report.verdict, std::string(kNoBias));
    EXPECT_TRUE(report.debates.empty());
    EXPECT_EQ(b.requests().size(), 2u);
}

TEST(Detect, SingleConfirmedBiasWinsWithoutDebate) {
    FnBackend b(scripted("anchoring; sunk cost fallacy", "sunk cost fallacy", {"sunk-cost-fallacy"}));
    const auto report = detect(b, library(), input(), {});
    EXPECT_EQ(report.verdict, "sunk-cost-fallacy");
    EXPECT_EQ(report.confirmed, std::vector<std::string>{"sunk-cost-fallacy"});
    EXPECT_TRUE(report.debates.empty());
    EXPECT_EQ(b.requests().size(), 4u);  // two screens, two labeled
}

TEST(Detect, HigherScoredSideWinsEveryMatch) {
    FnBackend b(scripted("anchoring; framing effect; loss aversion", "sunk cost fallacy",
                         {"anchoring", "framing-effect", "loss-aversion", "sunk-cost-fallacy"}));
    DetectConfig config;
    config.jobs = 3;
    const auto report = detect(b, library(), input(), config);
    // Catalog order: anchoring(1), framing(23), loss(39), sunk(67). B always wins.
    ASSERT_EQ(report.debates.size(), 3u);
    EXPECT_EQ(report.debates[0].winner, "framing-effect");
    EXPECT_EQ(report.debates[1].winner, "sunk-cost-fallacy");
    EXPECT_EQ(report.debates[2].side_a, "framing-effect");
    EXPECT_EQ(report.verdict, "sunk-cost-fallacy");
    EXPECT_EQ(report.calls["per_caller"]["CA:sunk-cost-fallacy"]["calls"], 9);
}

TEST(Detect, GoldenCassetteReproducesTheReport) {
    llm::ScriptedBackend backend(llm::Cassette::load(fixtures::fixture("golden_cassette.jsonl")));
    DetectConfig config;
    config.session_id = "golden_case";
    const auto report = detect(backend, library(), load_detection_input(fixtures::fixture("golden_case.txt")), config);
    EXPECT_EQ(report.serialize(), read_file(fixtures::fixture("golden_report.json")));
}

TEST(Detect, BackendFailureCarriesPartialReport) {
    FnBackend b([](const llm::ChatRequest& r) -> std::string {
        if (r.caller_id == "screen-conservative") throw AuthError("401");
        return "anchoring";
    });
    try {
        detect(b, library(), input(), {});
        FAIL();
    } catch (const DetectionFailure& e) {
        ASSERT_TRUE(e.partial().aggressive.has_value());
        EXPECT_FALSE(e.partial().conservative.has_value());
        EXPECT_TRUE(e.partial().error.has_value());
    }
}

TEST(Input, BlankTextIsEmptyInput) {
    FnBackend b([](const llm::ChatRequest&) { return std::string("none"); });
    EXPECT_THROW(detect(b, library(), input("  \n"), {}), EmptyInput);
}

TEST(Input, TranscriptIsRenderedAsDialogue) {
    fixtures::PatternBackend b;
    interp::SessionConfig config;
    config.session_id = "t";
    const auto t = interp::run_session(scenario::load_script(fixtures::fixture("investment_script.json")), b, config);
    fixtures::TempDir dir("detect-input");
    write_file(dir / "t.jsonl", t.to_jsonl());
    const auto in = load_detection_input(dir / "t.jsonl");
    EXPECT_EQ(in.text, render_dialogue(t.utterances));
    EXPECT_NE(in.text.find("Subject"), std::string::npos);
    EXPECT_EQ(in.text.find("session_id"), std::string::npos);
}
