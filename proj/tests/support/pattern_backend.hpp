#pragma once

#include <functional>
#include <mutex>
#include <string>

#include "mindscope/llm.hpp"
#include "mindscope/util.hpp"

namespace mindscope::fixtures {

/// Answers by caller id and prompt shape, so sessions of any length can be
/// scripted without writing every cassette line by hand. Record it through
/// llm::RecordingBackend to obtain a cassette.
class PatternBackend : public llm::Backend {
public:
    /// Micro-monitor reply for the n-th micro call (0-based).
    std::function<std::string(std::uint64_t)> micro = [](std::uint64_t) {
        return std::string("The reply addresses the rule.\nCONFORM: on task");
    };
    std::function<std::string(std::uint64_t)> macro = [](std::uint64_t) {
        return std::string("ALIGNED: the dialogue follows the scenario");
    };

    llm::ChatResponse complete(const llm::ChatRequest& r) override {
        {
            std::lock_guard lock(mutex_);
            ++calls_;
        }
        const std::string& system = r.messages.front().content;
        const std::string& user = r.messages.back().content;
        std::string content;
        if (r.caller_id == "monitor.micro") {
            content = micro(r.sequence_no);
        } else if (r.caller_id == "monitor.macro") {
            content = macro(r.sequence_no);
        } else if (system.rfind("You maintain the long-term memory", 0) == 0) {
            content = r.caller_id + " remembers " + user.substr(0, user.find(':'));
        } else if (user.rfind("Reflect on your behavior", 0) == 0) {
            content = "ISSUE: " + r.caller_id + " drifted from the task\nSTRATEGY: restate the decision plainly";
        } else {
            content = "PLAN: follow the rule\nREPLY: " + r.caller_id + " speaks, call " + std::to_string(r.sequence_no);
        }
        return {content, {static_cast<std::int64_t>(user.size() / 4), static_cast<std::int64_t>(content.size() / 4)},
                "pattern"};
    }

    std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }

private:
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
};

inline std::string deviate_reply() {
    return "The speaker ignored the task.\nDEVIATE: off topic - directive: restate your investment decision";
}

/// Micro replies that deviate for the first `n` calls, then conform.
inline std::function<std::string(std::uint64_t)> deviate_first(std::uint64_t n) {
    return [n](std::uint64_t seq) {
        return seq < n ? deviate_reply() : std::string("The reply addresses the rule.\nCONFORM: on task");
    };
}

}  // namespace mindscope::fixtures
