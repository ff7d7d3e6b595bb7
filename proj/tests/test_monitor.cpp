#include <gtest/gtest.h>

#include "mindscope/error.hpp"
#include "mindscope/interpreter.hpp"
#include "mindscope/monitor.hpp"
#include "support/paths.hpp"
#include "support/pattern_backend.hpp"

using namespace mindscope;
using namespace mindscope::monitor;

namespace {

scenario::ScenarioScript script() { return scenario::load_script(fixtures::fixture("investment_script.json")); }

interp::Transcript run(fixtures::PatternBackend& backend, int max_retries, int rounds = 1) {
    auto s = script();
    s.rounds = rounds;
    interp::SessionConfig config;
    config.session_id = "m";
    config.monitor.max_retries = max_retries;
    return interp::run_session(s, backend, config);
}

}  // namespace

TEST(MicroParse, DeviateCarriesDirective) {
    const auto a = parse_micro_reply("DEVIATE: ignored the task \xE2\x80\x94 directive: restate your investment decision");
    ASSERT_TRUE(a.has_value());
    EXPECT_EQ(a->verdict, Verdict::Deviate);
    EXPECT_EQ(a->directive, "restate your investment decision");
    EXPECT_EQ(a->rationale, "ignored the task");
}

TEST(MicroParse, ConformHasNoDirective) {
    const auto a = parse_micro_reply("CONFORM: on-task");
    ASSERT_TRUE(a.has_value());
    EXPECT_EQ(a->verdict, Verdict::Conform);
    EXPECT_FALSE(a->directive.has_value());
    EXPECT_EQ(a->rationale, "on-task");
}

TEST(MicroParse, VerdictIsTheLastVerdictLine) {
    const auto a = parse_micro_reply("Step 1: CONFORM would require...\nThe reply drifts.\nDEVIATE: drift - directive: fix");
    ASSERT_TRUE(a.has_value());
    EXPECT_EQ(a->verdict, Verdict::Deviate);
}

TEST(MicroParse, GarbledReplyIsUnparsed) { EXPECT_FALSE(parse_micro_reply("banana").has_value()); }

TEST(MacroParse, AlignedAndMisaligned) {
    EXPECT_TRUE(parse_macro_reply("ALIGNED: fine")->aligned);
    const auto v = parse_macro_reply("MISALIGNED: drifted - adjustment: return to the budget discussion");
    ASSERT_TRUE(v.has_value());
    EXPECT_FALSE(v->aligned);
    EXPECT_EQ(v->adjustment, "return to the budget discussion");
    EXPECT_FALSE(parse_macro_reply("???").has_value());
}

TEST(MicroCheck, GarbledReplyFailsOpenWithFlag) {
    fixtures::PatternBackend b;
    b.micro = [](std::uint64_t) { return std::string("no verdict here"); };
    const auto t = run(b, 2);
    for (const auto& u : t.utterances) {
        if (u.is_system()) continue;
        ASSERT_TRUE(u.monitor.has_value());
        EXPECT_EQ(u.monitor->verdict, Verdict::Conform);
        EXPECT_TRUE(u.flags.count("monitor_unparsed"));
    }
}

TEST(MicroCheck, BackendFailureFailsOpen) {
    llm::Cassette empty;
    llm::ScriptedBackend scripted(empty);
    MicroMonitor micro(llm::Caller(scripted, "s", interp::kMicroMonitorCaller));
    const auto s = script();
    const auto r = micro.check("Subject", "text", s.rules[2], s);
    EXPECT_TRUE(r.unparsed);
    EXPECT_EQ(r.annotation.verdict, Verdict::Conform);
    EXPECT_EQ(micro.sequence_no(), 1u);
}

TEST(Rectify, DeviateOnceThenConform) {
    fixtures::PatternBackend b;
    b.micro = fixtures::deviate_first(1);
    const auto t = run(b, 2);
    const auto& first = t.utterances.front();
    ASSERT_TRUE(first.monitor.has_value());
    EXPECT_EQ(first.monitor->verdict, Verdict::Conform);
    EXPECT_EQ(first.monitor->attempts_used, 1);
    EXPECT_TRUE(first.flags.empty());
    ASSERT_TRUE(first.debug.contains("rejected_drafts"));
    ASSERT_EQ(first.debug["rejected_drafts"].size(), 1u);
    EXPECT_EQ(first.debug["rejected_drafts"][0]["monitor"]["directive"], "restate your investment decision");
    EXPECT_EQ(first.content, "Moderator speaks, call 2");  // act, reflect, act again
}

TEST(Rectify, ExhaustionAcceptsLastResponseWithFlag) {
    fixtures::PatternBackend b;
    b.micro = fixtures::deviate_first(3);
    const auto t = run(b, 2);
    const auto& first = t.utterances.front();
    EXPECT_EQ(first.monitor->verdict, Verdict::Deviate);
    EXPECT_EQ(first.monitor->attempts_used, 2);
    EXPECT_TRUE(first.flags.count("monitor_exhausted"));
    EXPECT_EQ(first.debug["rejected_drafts"].size(), 2u);
}

TEST(Rectify, ZeroRetriesAcceptsImmediatelyWithFlag) {
    fixtures::PatternBackend b;
    b.micro = fixtures::deviate_first(1);
    const auto t = run(b, 0);
    const auto& first = t.utterances.front();
    EXPECT_EQ(first.monitor->attempts_used, 0);
    EXPECT_TRUE(first.flags.count("monitor_exhausted"));
    EXPECT_EQ(first.content, "Moderator speaks, call 0");
}

TEST(Rectify, AttemptsNeverExceedBound) {
    for (int retries = 0; retries <= 3; ++retries) {
        fixtures::PatternBackend b;
        b.micro = [](std::uint64_t seq) { return seq % 2 == 0 ? fixtures::deviate_reply() : std::string("CONFORM: ok"); };
        const auto t = run(b, retries, 2);
        for (const auto& u : t.utterances) {
            if (u.monitor) EXPECT_LE(u.monitor->attempts_used, retries);
        }
    }
}

TEST(Macro, AlignedAddsNothing) {
    fixtures::PatternBackend b;
    const auto t = run(b, 2, 2);
    EXPECT_EQ(t.utterances.size(), 8u);
    std::size_t with_check = 0;
    for (const auto& u : t.utterances) with_check += u.debug.contains("macro_check");
    EXPECT_EQ(with_check, 1u);
}

TEST(Macro, MisalignedBroadcastsAdjustmentToEveryRole) {
    fixtures::PatternBackend b;
    b.macro = [](std::uint64_t) { return std::string("MISALIGNED: off track - adjustment: return to the budget discussion"); };
    const auto t = run(b, 2, 2);
    std::vector<std::string> injected;
    for (const auto& u : t.utterances) {
        if (u.flags.count("macro_adjustment")) {
            EXPECT_TRUE(u.is_system());
            EXPECT_EQ(u.round, 2);
            EXPECT_EQ(u.content, "return to the budget discussion");
            injected.push_back(u.recipients.at(0));
        }
    }
    EXPECT_EQ(injected, (std::vector<std::string>{"Subject", "Confederate", "Moderator"}));
    EXPECT_EQ(t.utterances.size(), 11u);
}

TEST(Macro, EmptyWindowIsVacuouslyAligned) {
    llm::Cassette empty;
    llm::ScriptedBackend scripted(empty);
    MacroMonitor macro(llm::Caller(scripted, "s", interp::kMacroMonitorCaller));
    const auto v = macro.check({}, script());
    EXPECT_TRUE(v.aligned);
    EXPECT_EQ(macro.sequence_no(), 0u);
}

TEST(Macro, BackendFailureIsAlignedWithFlag) {
    llm::Cassette empty;
    llm::ScriptedBackend scripted(empty);
    MacroMonitor macro(llm::Caller(scripted, "s", interp::kMacroMonitorCaller));
    Utterance u;
    u.speaker = "Subject";
    u.content = "hi";
    const auto v = macro.check({u}, script());
    EXPECT_TRUE(v.aligned);
    EXPECT_TRUE(v.flags.count("macro_failed"));
}

TEST(MonitorConfigCheck, RejectsNegativeRetries) {
    EXPECT_THROW((MonitorConfig{-1, 1, true, true}).validate(), ConfigError);
    EXPECT_THROW((MonitorConfig{0, 0, true, true}).validate(), ConfigError);
}
