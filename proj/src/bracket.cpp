#include "mindscope/bracket.hpp"

#include "mindscope/error.hpp"

namespace mindscope::cbdc {

using nlohmann::json;

std::optional<std::string> Match::loser() const {
    if (!winner) return std::nullopt;
    return *winner == a ? b : a;
}

BracketRound Bracket::pair_up(std::size_t number, const std::vector<std::string>& slots) {
    BracketRound round;
    round.number = number;
    for (std::size_t i = 0; i + 1 < slots.size(); i += 2) {
        Match m;
        m.id = "r" + std::to_string(number) + "m" + std::to_string(i / 2);
        m.round = number;
        m.a = slots[i];
        m.b = slots[i + 1];
        round.matches.push_back(std::move(m));
    }
    if (slots.size() % 2 == 1) round.bye = slots.back();
    return round;
}

Bracket Bracket::build(std::vector<std::string> leaves) {
    Bracket b;
    b.leaves_ = std::move(leaves);
    if (b.leaves_.size() <= 1) {
        if (!b.leaves_.empty()) b.champion_ = b.leaves_.front();
        b.resolved_ = true;
        return b;
    }
    b.rounds_.push_back(pair_up(1, b.leaves_));
    return b;
}

void Bracket::play(const RoundDecider& decide_round) {
    while (!resolved_) {
        BracketRound& round = rounds_.back();
        const auto winners = decide_round(round.matches);
        if (winners.size() != round.matches.size()) throw Error("bracket: decider returned the wrong winner count");
        std::vector<std::string> next;
        for (std::size_t i = 0; i < round.matches.size(); ++i) {
            Match& m = round.matches[i];
            if (winners[i] != m.a && winners[i] != m.b)
                throw Error("bracket: winner '" + winners[i] + "' is not in match " + m.id);
            m.winner = winners[i];
            losers_.push_back({*m.loser(), m.id, *m.winner});
            next.push_back(*m.winner);
        }
        if (round.bye) next.push_back(*round.bye);
        if (next.size() == 1) {
            champion_ = next.front();
            resolved_ = true;
        } else {
            rounds_.push_back(pair_up(round.number + 1, next));
        }
    }
}

void Bracket::play_each(const std::function<std::string(const Match&)>& decide) {
    play([&](const std::vector<Match>& matches) {
        std::vector<std::string> winners;
        winners.reserve(matches.size());
        for (const auto& m : matches) winners.push_back(decide(m));
        return winners;
    });
}

std::size_t Bracket::match_count() const {
    std::size_t n = 0;
    for (const auto& r : rounds_) n += r.matches.size();
    return n;
}

std::size_t Bracket::expected_rounds(std::size_t leaf_count) {
    std::size_t rounds = 0;
    for (std::size_t span = 1; span < leaf_count; span *= 2) ++rounds;
    return rounds;
}

json Bracket::to_json() const {
    json rounds = json::array();
    for (const auto& r : rounds_) {
        json matches = json::array();
        for (const auto& m : r.matches) {
            matches.push_back({{"id", m.id}, {"a", m.a}, {"b", m.b}, {"winner", m.winner ? json(*m.winner) : json()}});
        }
        rounds.push_back({{"round", r.number}, {"matches", matches}, {"bye", r.bye ? json(*r.bye) : json()}});
    }
    json losers = json::array();
    for (const auto& e : losers_) losers.push_back({{"id", e.id}, {"match", e.match_id}, {"eliminated_by", e.by}});
    return {{"leaf_count", leaves_.size()},
            {"leaves", leaves_},
            {"rounds", rounds},
            {"losers", losers},
            {"champion", champion_ ? json(*champion_) : json()},
            {"match_count", match_count()},
            {"round_count", rounds_.size()}};
}

}  // namespace mindscope::cbdc
