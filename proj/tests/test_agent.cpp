#include <gtest/gtest.h>

#include <deque>

#include "mindscope/agent.hpp"
#include "mindscope/error.hpp"

using namespace mindscope;
using namespace mindscope::agent;

namespace {

// Replies from a queue and keeps every request; an empty queue fails.
class QueueBackend : public llm::Backend {
public:
    std::deque<std::string> replies;
    std::vector<llm::ChatRequest> requests;

    llm::ChatResponse complete(const llm::ChatRequest& r) override {
        requests.push_back(r);
        if (replies.empty()) throw TransportError("queue exhausted");
        auto content = replies.front();
        replies.pop_front();
        return {content, {}, "queue"};
    }
};

scenario::RoleSpec subject() {
    scenario::RoleSpec s;
    s.name = "Subject";
    s.identity = "bakery manager";
    s.task = "buy a van";
    s.backstory = "trusts brokers";
    return s;
}

Utterance said(std::uint64_t turn, int round, std::string speaker = "Confederate") {
    Utterance u;
    u.turn = turn;
    u.round = round;
    u.speaker = std::move(speaker);
    u.content = "line " + std::to_string(turn);
    return u;
}

RoleAgent make_agent(QueueBackend& backend, MemoryConfig config = {}) {
    return RoleAgent(subject(), config, llm::Caller(backend, "s", "Subject"));
}

}  // namespace

TEST(Act, ReplyIsTheReplySection) {
    QueueBackend b;
    b.replies = {"PLAN: weigh options\nREPLY: I choose plan A"};
    auto a = make_agent(b);
    const auto r = a.act({"decide", "pick a plan", {}, std::nullopt});
    EXPECT_EQ(r.content, "I choose plan A");
    EXPECT_EQ(r.plan, "weigh options");
    EXPECT_FALSE(r.scaffold_missing);
    EXPECT_EQ(a.sequence_no(), 1u);
    ASSERT_EQ(b.requests.size(), 1u);
    EXPECT_EQ(b.requests[0].temperature, llm::kRoleTemperature);
    const auto& system = b.requests[0].messages[0].content;
    EXPECT_NE(system.find("bakery manager"), std::string::npos);
    EXPECT_NE(system.find("buy a van"), std::string::npos);
    EXPECT_NE(system.find("trusts brokers"), std::string::npos);
    EXPECT_NE(system.find("PLAN:"), std::string::npos);
    EXPECT_NE(b.requests[0].messages[1].content.find("pick a plan"), std::string::npos);
}

TEST(Act, MissingDelimiterKeepsRawTextAndFlags) {
    QueueBackend b;
    b.replies = {"I just answer directly."};
    auto a = make_agent(b);
    const auto r = a.act({"decide", "x", {}, std::nullopt});
    EXPECT_EQ(r.content, "I just answer directly.");
    EXPECT_TRUE(r.scaffold_missing);
}

TEST(Act, RetrievalDepthOneEmbedsOnlyTheNewestSummary) {
    QueueBackend b;
    b.replies = {"first summary", "second summary", "PLAN: p\nREPLY: r"};
    auto a = make_agent(b, {1, 1});
    a.observe(said(0, 1));
    a.observe(said(1, 2));  // flush round 1
    a.observe(said(2, 3));  // flush round 2
    ASSERT_EQ(a.memory().long_term.size(), 2u);
    a.act({"decide", "x", {}, std::nullopt});
    const auto& prompt = b.requests.back().messages[1].content;
    EXPECT_EQ(prompt.find("first summary"), std::string::npos);
    EXPECT_NE(prompt.find("second summary"), std::string::npos);
}

TEST(Act, BackendErrorPropagates) {
    QueueBackend b;
    auto a = make_agent(b);
    EXPECT_THROW(a.act({"decide", "x", {}, std::nullopt}), BackendError);
    EXPECT_EQ(a.sequence_no(), 1u);
}

TEST(Act, PendingObservationsAreAttachedOnce) {
    QueueBackend b;
    b.replies = {"PLAN: p\nREPLY: r1", "PLAN: p\nREPLY: r2"};
    auto a = make_agent(b);
    a.observe(said(0, 1));
    EXPECT_EQ(a.pending().size(), 1u);
    a.act({"decide", "x", {}, std::nullopt});
    EXPECT_NE(b.requests[0].messages[1].content.find("New messages for you"), std::string::npos);
    EXPECT_TRUE(a.pending().empty());
    a.act({"decide", "x", {}, std::nullopt});
    EXPECT_EQ(b.requests[1].messages[1].content.find("New messages for you"), std::string::npos);
}

TEST(Act, DirectiveAppearsInPrompt) {
    QueueBackend b;
    b.replies = {"PLAN: p\nREPLY: r"};
    auto a = make_agent(b);
    a.act({"decide", "x", {}, std::string("restate your decision")});
    EXPECT_NE(b.requests[0].messages[1].content.find("restate your decision"), std::string::npos);
}

TEST(Observe, BelowThresholdDoesNotSummarize) {
    QueueBackend b;
    auto a = make_agent(b, {6, 2});
    for (int r = 1; r <= 6; ++r) a.observe(said(static_cast<std::uint64_t>(r), r));
    EXPECT_EQ(a.memory().short_term_span(), 6);
    EXPECT_TRUE(a.memory().long_term.empty());
    EXPECT_TRUE(b.requests.empty());
}

TEST(Observe, CrossingThresholdFlushesAllButNewestRound) {
    QueueBackend b;
    b.replies = {"rounds one to six"};
    auto a = make_agent(b, {6, 2});
    for (int r = 1; r <= 7; ++r) a.observe(said(static_cast<std::uint64_t>(r), r));
    ASSERT_EQ(a.memory().long_term.size(), 1u);
    EXPECT_EQ(a.memory().long_term[0].first_round, 1);
    EXPECT_EQ(a.memory().long_term[0].last_round, 6);
    EXPECT_EQ(a.memory().long_term[0].summary, "rounds one to six");
    EXPECT_EQ(a.memory().short_term_span(), 1);
    EXPECT_EQ(a.memory().short_term.front().round, 7);
    EXPECT_EQ(b.requests.size(), 1u);
    EXPECT_EQ(b.requests[0].temperature, llm::kEvaluatorTemperature);
}

TEST(Observe, DuplicateDeliveryIsIgnored) {
    QueueBackend b;
    auto a = make_agent(b);
    a.observe(said(4, 1));
    a.observe(said(4, 1));
    EXPECT_EQ(a.memory().short_term.size(), 1u);
    EXPECT_EQ(a.pending().size(), 1u);
}

TEST(Observe, OwnUtterancesAreRememberedButNotPending) {
    QueueBackend b;
    auto a = make_agent(b);
    a.observe(said(0, 1, "Subject"));
    EXPECT_EQ(a.memory().short_term.size(), 1u);
    EXPECT_TRUE(a.pending().empty());
}

TEST(Summarize, BackendFailureKeepsVerbatimTextAndFlags) {
    QueueBackend b;
    auto a = make_agent(b, {1, 2});
    a.observe(said(0, 1));
    a.observe(said(1, 2));
    ASSERT_EQ(a.memory().long_term.size(), 1u);
    const auto& e = a.memory().long_term[0];
    EXPECT_TRUE(e.summarizer_failed);
    EXPECT_EQ(e.summary, render_dialogue({said(0, 1)}));
    EXPECT_EQ(a.take_events(), std::set<std::string>{"summarizer_failed"});
    EXPECT_TRUE(a.take_events().empty());
}

TEST(Summarize, ConsecutiveFlushesAreDisjoint) {
    QueueBackend b;
    b.replies = {"s1", "s2"};
    auto a = make_agent(b, {6, 2});
    for (int r = 1; r <= 13; ++r) a.observe(said(static_cast<std::uint64_t>(r), r));
    ASSERT_EQ(a.memory().long_term.size(), 2u);
    EXPECT_EQ(a.memory().long_term[0].first_round, 1);
    EXPECT_EQ(a.memory().long_term[0].last_round, 6);
    EXPECT_EQ(a.memory().long_term[1].first_round, 7);
    EXPECT_EQ(a.memory().long_term[1].last_round, 12);
    EXPECT_EQ(a.memory().short_term.front().round, 13);
}

TEST(Summarize, EmptyMemoryIsAnError) {
    QueueBackend b;
    auto a = make_agent(b);
    EXPECT_THROW(a.summarize_memory(), Error);
}

TEST(Reflect, DirectiveYieldsIssueAndStrategy) {
    QueueBackend b;
    b.replies = {"ISSUE: I left my role\nSTRATEGY: answer as the manager", "PLAN: p\nREPLY: r"};
    auto a = make_agent(b);
    const auto note = a.reflect("you broke character");
    ASSERT_TRUE(note.has_value());
    EXPECT_EQ(note->issue, "I left my role");
    EXPECT_EQ(note->strategy, "answer as the manager");
    EXPECT_EQ(a.reflections().size(), 1u);
    EXPECT_NE(b.requests[0].messages[1].content.find("you broke character"), std::string::npos);
    a.act({"decide", "x", {}, std::nullopt});
    EXPECT_NE(b.requests[1].messages[1].content.find("answer as the manager"), std::string::npos);
}

TEST(Reflect, UnstructuredReplyStillGivesNonEmptyNote) {
    QueueBackend b;
    b.replies = {"I should focus."};
    auto a = make_agent(b);
    const auto note = a.reflect("end of session");
    ASSERT_TRUE(note.has_value());
    EXPECT_EQ(note->issue, "end of session");
    EXPECT_EQ(note->strategy, "I should focus.");
    EXPECT_EQ(a.reflections().size(), 1u);
}

TEST(Reflect, BackendFailureLeavesReflectionsUnchanged) {
    QueueBackend b;
    auto a = make_agent(b);
    EXPECT_FALSE(a.reflect("x").has_value());
    EXPECT_TRUE(a.reflections().empty());
    EXPECT_EQ(a.take_events(), std::set<std::string>{"reflection_failed"});
}

TEST(SequenceNo, CountsEveryBackendCall) {
    QueueBackend b;
    b.replies = {"PLAN: p\nREPLY: r", "summary", "ISSUE: i\nSTRATEGY: s"};
    auto a = make_agent(b, {1, 1});
    a.act({"decide", "x", {}, std::nullopt});
    a.observe(said(0, 1));
    a.observe(said(1, 2));
    a.reflect("t");
    EXPECT_EQ(a.sequence_no(), 3u);
    EXPECT_EQ(a.sequence_no(), b.requests.size());
}

TEST(MemoryConfigCheck, RejectsNonPositiveValues) {
    EXPECT_THROW((MemoryConfig{0, 1}).validate(), ConfigError);
    EXPECT_THROW((MemoryConfig{1, 0}).validate(), ConfigError);
    EXPECT_NO_THROW((MemoryConfig{1, 1}).validate());
}
