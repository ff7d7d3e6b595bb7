#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mindscope::cbdc {

struct Match {
    std::string id;  // "r<round>m<index>"
    std::size_t round = 1;
    std::string a;   // lower catalog index
    std::string b;
    std::optional<std::string> winner;

    std::optional<std::string> loser() const;
};

struct BracketRound {
    std::size_t number = 1;
    std::vector<Match> matches;
    std::optional<std::string> bye;
};

struct Elimination {
    std::string id;
    std::string match_id;
    std::string by;  // the match winner
};

/// Single-elimination (loser-tree) bracket over ids already sorted by
/// catalog_index. Adjacent slots meet; an odd slot count gives the last
/// slot a bye; winners keep their slot order into the next round.
class Bracket {
public:
    static Bracket build(std::vector<std::string> leaves);

    /// Resolves one round at a time. `decide_round` receives the round's
    /// matches and returns one winner per match (each a or b).
    using RoundDecider = std::function<std::vector<std::string>(const std::vector<Match>&)>;
    void play(const RoundDecider& decide_round);
    void play_each(const std::function<std::string(const Match&)>& decide);

    std::size_t leaf_count() const { return leaves_.size(); }
    const std::vector<std::string>& leaves() const { return leaves_; }
    const std::vector<BracketRound>& rounds() const { return rounds_; }
    const std::vector<Elimination>& losers() const { return losers_; }
    const std::optional<std::string>& champion() const { return champion_; }
    bool resolved() const { return resolved_; }

    std::size_t match_count() const;

    /// ceil(log2 n), 0 for n <= 1.
    static std::size_t expected_rounds(std::size_t leaf_count);

    nlohmann::json to_json() const;

private:
    static BracketRound pair_up(std::size_t number, const std::vector<std::string>& slots);

    std::vector<std::string> leaves_;
    std::vector<BracketRound> rounds_;
    std::vector<Elimination> losers_;
    std::optional<std::string> champion_;
    bool resolved_ = false;
};

}  // namespace mindscope::cbdc
