#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mindscope/decision.hpp"
#include "mindscope/error.hpp"
#include "mindscope/rng.hpp"

namespace mindscope::decision {

inline constexpr std::size_t kStateDim = 2 * kDimensions;

/// Referee-mean scores of side A then side B, each scaled into [0, 1].
using State = std::array<double, kStateDim>;

State encode_state(const RefereeScores& a, const RefereeScores& b);
State encode_state(const MatchSample& m);

struct GaParams {
    std::size_t population = 32;
    std::size_t generations = 20;
    double mutation_sigma = 0.05;
    std::size_t tournament_size = 2;
    double blend_alpha = 0.5;  // BLX-alpha crossover

    void validate() const;
};

struct DqnHyperparams {
    double gamma = 0.9;
    std::size_t episodes = 200;         // M
    std::size_t episode_length = 16;    // E
    std::size_t sync_interval = 100;    // C
    std::size_t minibatch = 32;
    std::size_t buffer_capacity = 10000;
    double learning_rate = 1e-3;
    std::size_t hidden_units = 64;
    std::size_t held_out_states = 800;
    GaParams ga;

    /// Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const DqnHyperparams& hp);
DqnHyperparams dqn_hyperparams_from_json(const nlohmann::json& j);

struct Transition {
    State s{};
    Dims a{};
    double r = 0.0;
    std::optional<State> s_next;  // nullopt: the episode ends after this step
};

/// Fixed-capacity experience ring; evicts oldest first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// Index 0 is the oldest retained transition.
    const Transition& at(std::size_t i) const { return items_.at(i); }
    /// Uniform sample with replacement.
    std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

private:
    std::size_t capacity_;
    std::deque<Transition> items_;
};

using ActionBatch = Eigen::Matrix<double, static_cast<int>(kDimensions), Eigen::Dynamic>;

/// Q(s, a): one tanh hidden layer, linear scalar output, trained with Adam on
/// squared error. The input layer takes the centered state and an action
/// block: the score gap sA - sB gated by a soft sign of the decision margin
/// a . (sA - sB), so the action is seen through the side it picks.
class QNetwork {
public:
    static constexpr std::size_t kInputDim = kStateDim + kDimensions;

    /// The input vector for (s, a).
    static Eigen::VectorXd features(const State& s, const Dims& a);

    QNetwork(std::size_t hidden_units, Rng& rng);

    double q(const State& s, const Dims& a) const;
    /// Q(s, a_j) for every column a_j.
    Eigen::VectorXd q_actions(const State& s, const ActionBatch& actions) const;

    /// One Adam step on mean squared error; returns the pre-step loss.
    double train_step(const std::vector<const Transition*>& batch, const std::vector<double>& targets,
                      double learning_rate);

    bool same_shape(const QNetwork& other) const;
    std::size_t hidden_units() const { return static_cast<std::size_t>(w1_.rows()); }

    const Eigen::MatrixXd& w1() const { return w1_; }
    const Eigen::VectorXd& b1() const { return b1_; }
    const Eigen::RowVectorXd& w2() const { return w2_; }
    double b2() const { return b2_; }

private:
    Eigen::MatrixXd w1_;
    Eigen::VectorXd b1_;
    Eigen::RowVectorXd w2_;
    double b2_ = 0.0;

    struct Moments {
        Eigen::MatrixXd w1;
        Eigen::VectorXd b1;
        Eigen::RowVectorXd w2;
        double b2 = 0.0;
    };
    Moments m_;
    Moments v_;
    std::uint64_t adam_steps_ = 0;
};

/// Scores every column of a batch of candidate weight vectors.
using BatchObjective = std::function<Eigen::VectorXd(const ActionBatch&)>;

struct GaResult {
    Dims best{};
    double value = 0.0;
};

/// Genetic search over the simplex: tournament selection, blend crossover,
/// Gaussian mutation and projection back onto the simplex, with one elite
/// carried per generation. Returns the best individual ever evaluated.
GaResult ga_search(const BatchObjective& objective, const GaParams& params, Rng& rng);

WeightVector ga_search_action(const QNetwork& qnet, const State& s, const GaParams& params, std::uint64_t seed);

/// y = r at episode end, else r + gamma * max_next_q.
double target_value(const Transition& t, double gamma, double max_next_q);

/// As above with max_a' Q_target(s', a') approximated by GA search.
double target_value(const Transition& t, double gamma, const QNetwork& target_net, const GaParams& params,
                    std::uint64_t seed);

class NumericalDivergence : public Error {
public:
    using Error::Error;
};

struct TrainedDecision {
    std::string algorithm;  // "dqn", "ga", "saa" or "aco"
    WeightVector weights = WeightVector::uniform();
    std::vector<double> curve;
    nlohmann::json hyperparams = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string dataset_digest;
    double train_accuracy = 0.0;

    nlohmann::json to_json() const;
    static TrainedDecision from_json(const nlohmann::json& j);
    static TrainedDecision load(const std::filesystem::path& path);
};

/// Deep Q-learning of the decision weights. Each step picks an action by GA
/// search over the online network, earns +1/-1 for agreeing with the label,
/// and regresses on GA-approximated targets from the target network.
TrainedDecision dqn_train(const std::vector<MatchSample>& dataset, const DqnHyperparams& hp, std::uint64_t seed);

}  // namespace mindscope::decision
