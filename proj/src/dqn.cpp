#include "mindscope/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mindscope/util.hpp"

namespace mindscope::decision {

using nlohmann::json;

State encode_state(const RefereeScores& a, const RefereeScores& b) {
    const auto mean_a = referee_mean(a);
    const auto mean_b = referee_mean(b);
    State s;
    for (std::size_t i = 0; i < kDimensions; ++i) {
        s[i] = mean_a[i] / kMaxScore;
        s[kDimensions + i] = mean_b[i] / kMaxScore;
    }
    return s;
}

State encode_state(const MatchSample& m) { return encode_state(m.a, m.b); }

void GaParams::validate() const {
    if (population == 0) throw ConfigError("ga population must be >= 1");
    if (tournament_size == 0) throw ConfigError("ga tournament size must be >= 1");
    if (!(mutation_sigma >= 0.0)) throw ConfigError("ga mutation sigma must be >= 0");
    if (!(blend_alpha >= 0.0)) throw ConfigError("ga blend alpha must be >= 0");
}

void DqnHyperparams::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (episodes == 0 || episode_length == 0 || sync_interval == 0 || minibatch == 0 || buffer_capacity == 0 ||
        hidden_units == 0 || held_out_states == 0) {
        throw ConfigError("dqn hyperparameters must be positive");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    ga.validate();
}

json to_json(const DqnHyperparams& hp) {
    return {{"gamma", hp.gamma},
            {"episodes", hp.episodes},
            {"episode_length", hp.episode_length},
            {"sync_interval", hp.sync_interval},
            {"minibatch", hp.minibatch},
            {"buffer_capacity", hp.buffer_capacity},
            {"learning_rate", hp.learning_rate},
            {"hidden_units", hp.hidden_units},
            {"held_out_states", hp.held_out_states},
            {"ga",
             {{"population", hp.ga.population},
              {"generations", hp.ga.generations},
              {"mutation_sigma", hp.ga.mutation_sigma},
              {"tournament_size", hp.ga.tournament_size},
              {"blend_alpha", hp.ga.blend_alpha}}}};
}

DqnHyperparams dqn_hyperparams_from_json(const json& j) {
    DqnHyperparams hp;
    hp.gamma = j.value("gamma", hp.gamma);
    hp.episodes = j.value("episodes", hp.episodes);
    hp.episode_length = j.value("episode_length", hp.episode_length);
    hp.sync_interval = j.value("sync_interval", hp.sync_interval);
    hp.minibatch = j.value("minibatch", hp.minibatch);
    hp.buffer_capacity = j.value("buffer_capacity", hp.buffer_capacity);
    hp.learning_rate = j.value("learning_rate", hp.learning_rate);
    hp.hidden_units = j.value("hidden_units", hp.hidden_units);
    hp.held_out_states = j.value("held_out_states", hp.held_out_states);
    if (auto it = j.find("ga"); it != j.end()) {
        hp.ga.population = it->value("population", hp.ga.population);
        hp.ga.generations = it->value("generations", hp.ga.generations);
        hp.ga.mutation_sigma = it->value("mutation_sigma", hp.ga.mutation_sigma);
        hp.ga.tournament_size = it->value("tournament_size", hp.ga.tournament_size);
        hp.ga.blend_alpha = it->value("blend_alpha", hp.ga.blend_alpha);
    }
    return hp;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(t));
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    std::vector<const Transition*> out;
    if (items_.empty()) return out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[rng.below(items_.size())]);
    return out;
}

QNetwork::QNetwork(std::size_t hidden_units, Rng& rng) {
    const auto h = static_cast<Eigen::Index>(hidden_units);
    const auto d = static_cast<Eigen::Index>(kInputDim);
    // Glorot-uniform initialization.
    const double limit1 = std::sqrt(6.0 / static_cast<double>(h + d));
    const double limit2 = std::sqrt(6.0 / static_cast<double>(h + 1));
    w1_.resize(h, d);
    for (Eigen::Index i = 0; i < h; ++i)
        for (Eigen::Index j = 0; j < d; ++j) w1_(i, j) = rng.uniform(-limit1, limit1);
    b1_ = Eigen::VectorXd::Zero(h);
    w2_.resize(h);
    for (Eigen::Index i = 0; i < h; ++i) w2_(i) = rng.uniform(-limit2, limit2);
    b2_ = 0.0;
    m_ = {Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h), Eigen::RowVectorXd::Zero(h), 0.0};
    v_ = m_;
}

bool QNetwork::same_shape(const QNetwork& other) const {
    return w1_.rows() == other.w1_.rows() && w1_.cols() == other.w1_.cols() && w2_.size() == other.w2_.size();
}

namespace {

constexpr double kStateCenter = 0.5;
// Sharpness of the soft sign applied to the decision margin a . (sA - sB).
constexpr double kMarginGain = 60.0;

}  // namespace

Eigen::VectorXd QNetwork::features(const State& s, const Dims& a) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(kInputDim));
    double margin = 0.0;
    for (std::size_t i = 0; i < kDimensions; ++i) margin += a[i] * (s[i] - s[kDimensions + i]);
    const double side = std::tanh(kMarginGain * margin);
    for (std::size_t i = 0; i < kStateDim; ++i) x(static_cast<Eigen::Index>(i)) = s[i] - kStateCenter;
    for (std::size_t i = 0; i < kDimensions; ++i)
        x(static_cast<Eigen::Index>(kStateDim + i)) = side * (s[i] - s[kDimensions + i]);
    return x;
}

Eigen::VectorXd QNetwork::q_actions(const State& s, const ActionBatch& actions) const {
    const auto ns = static_cast<Eigen::Index>(kStateDim);
    const auto nd = static_cast<Eigen::Index>(kDimensions);
    Eigen::VectorXd state(ns);
    Eigen::VectorXd gap(nd);
    for (Eigen::Index i = 0; i < ns; ++i) state(i) = s[static_cast<std::size_t>(i)] - kStateCenter;
    for (Eigen::Index i = 0; i < nd; ++i)
        gap(i) = s[static_cast<std::size_t>(i)] - s[kDimensions + static_cast<std::size_t>(i)];
    const Eigen::VectorXd state_part = w1_.leftCols(ns) * state + b1_;
    // The action block is side(a) * gap, so it contributes side(a) * (W * gap).
    const Eigen::VectorXd gap_part = w1_.rightCols(nd) * gap;
    const Eigen::RowVectorXd side = (kMarginGain * (gap.transpose() * actions)).array().tanh().matrix();
    Eigen::MatrixXd z = gap_part * side;
    z.colwise() += state_part;
    const Eigen::MatrixXd hidden = z.array().tanh().matrix();
    Eigen::VectorXd out = (w2_ * hidden).transpose();
    out.array() += b2_;
    return out;
}

double QNetwork::q(const State& s, const Dims& a) const {
    ActionBatch actions(static_cast<Eigen::Index>(kDimensions), 1);
    for (std::size_t i = 0; i < kDimensions; ++i) actions(static_cast<Eigen::Index>(i), 0) = a[i];
    return q_actions(s, actions)(0);
}

double QNetwork::train_step(const std::vector<const Transition*>& batch, const std::vector<double>& targets,
                            double learning_rate) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) return 0.0;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(kInputDim), n);
    Eigen::RowVectorXd y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& t = *batch[static_cast<std::size_t>(j)];
        x.col(j) = features(t.s, t.a);
        y(j) = targets[static_cast<std::size_t>(j)];
    }

    Eigen::MatrixXd z = w1_ * x;
    z.colwise() += b1_;
    const Eigen::MatrixXd hidden = z.array().tanh().matrix();
    Eigen::RowVectorXd q = w2_ * hidden;
    q.array() += b2_;
    const Eigen::RowVectorXd err = q - y;
    const double loss = err.squaredNorm() / static_cast<double>(n);

    const Eigen::RowVectorXd dq = err * (2.0 / static_cast<double>(n));
    const Eigen::RowVectorXd g_w2 = dq * hidden.transpose();
    const double g_b2 = dq.sum();
    const Eigen::MatrixXd dz = ((w2_.transpose() * dq).array() * (1.0 - hidden.array().square())).matrix();
    const Eigen::MatrixXd g_w1 = dz * x.transpose();
    const Eigen::VectorXd g_b1 = dz.rowwise().sum();

    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++adam_steps_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_steps_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_steps_));
    auto adam = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        param.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    adam(w1_, m_.w1, v_.w1, g_w1);
    adam(b1_, m_.b1, v_.b1, g_b1);
    adam(w2_, m_.w2, v_.w2, g_w2);
    m_.b2 = beta1 * m_.b2 + (1.0 - beta1) * g_b2;
    v_.b2 = beta2 * v_.b2 + (1.0 - beta2) * g_b2 * g_b2;
    b2_ -= learning_rate * (m_.b2 / c1) / (std::sqrt(v_.b2 / c2) + eps);
    return loss;
}

namespace {

ActionBatch to_batch(const std::vector<Dims>& population) {
    ActionBatch batch(static_cast<Eigen::Index>(kDimensions), static_cast<Eigen::Index>(population.size()));
    for (std::size_t j = 0; j < population.size(); ++j)
        for (std::size_t i = 0; i < kDimensions; ++i)
            batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = population[j][i];
    return batch;
}

}  // namespace

GaResult ga_search(const BatchObjective& objective, const GaParams& params, Rng& rng) {
    params.validate();
    std::vector<Dims> population(params.population);
    for (auto& p : population) p = random_simplex_point(rng);
    Eigen::VectorXd fitness = objective(to_batch(population));

    GaResult best{population[0], fitness(0)};
    auto track_best = [&] {
        for (std::size_t j = 0; j < population.size(); ++j) {
            const double f = fitness(static_cast<Eigen::Index>(j));
            if (f > best.value) best = {population[j], f};
        }
    };
    track_best();

    auto tournament = [&]() -> const Dims& {
        std::size_t winner = rng.below(population.size());
        for (std::size_t k = 1; k < params.tournament_size; ++k) {
            const std::size_t c = rng.below(population.size());
            if (fitness(static_cast<Eigen::Index>(c)) > fitness(static_cast<Eigen::Index>(winner))) winner = c;
        }
        return population[winner];
    };

    for (std::size_t g = 0; g < params.generations; ++g) {
        std::vector<Dims> next;
        next.reserve(population.size());
        next.push_back(best.best);
        while (next.size() < population.size()) {
            const Dims& p1 = tournament();
            const Dims& p2 = tournament();
            Dims child;
            for (std::size_t i = 0; i < kDimensions; ++i) {
                const double u = rng.uniform(-params.blend_alpha, 1.0 + params.blend_alpha);
                child[i] = p1[i] + u * (p2[i] - p1[i]) + params.mutation_sigma * rng.normal();
            }
            next.push_back(project_to_simplex(child));
        }
        population = std::move(next);
        fitness = objective(to_batch(population));
        track_best();
    }
    return best;
}

WeightVector ga_search_action(const QNetwork& qnet, const State& s, const GaParams& params, std::uint64_t seed) {
    Rng rng(seed);
    auto result = ga_search([&](const ActionBatch& a) { return qnet.q_actions(s, a); }, params, rng);
    return WeightVector::project(result.best);
}

double target_value(const Transition& t, double gamma, double max_next_q) {
    if (!t.s_next) return t.r;
    return t.r + gamma * max_next_q;
}

double target_value(const Transition& t, double gamma, const QNetwork& target_net, const GaParams& params,
                    std::uint64_t seed) {
    if (!t.s_next) return t.r;
    Rng rng(seed);
    const State& next = *t.s_next;
    auto result = ga_search([&](const ActionBatch& a) { return target_net.q_actions(next, a); }, params, rng);
    return target_value(t, gamma, result.value);
}

json TrainedDecision::to_json() const {
    return {{"algorithm", algorithm},
            {"weights", decision::to_json(weights)},
            {"curve", curve},
            {"hyperparams", hyperparams},
            {"seed", seed},
            {"dataset_digest", dataset_digest},
            {"train_accuracy", train_accuracy}};
}

TrainedDecision TrainedDecision::from_json(const json& j) {
    try {
        TrainedDecision t;
        t.algorithm = j.value("algorithm", std::string{});
        t.weights = weight_vector_from_json(j.at("weights"));
        t.curve = j.value("curve", std::vector<double>{});
        t.hyperparams = j.value("hyperparams", json::object());
        t.seed = j.value("seed", std::uint64_t{0});
        t.dataset_digest = j.value("dataset_digest", std::string{});
        t.train_accuracy = j.value("train_accuracy", 0.0);
        return t;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("trained decision: ") + e.what());
    }
}

TrainedDecision TrainedDecision::load(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw SyntaxError(path.string() + ": " + e.what());
    }
}

TrainedDecision dqn_train(const std::vector<MatchSample>& dataset, const DqnHyperparams& hp, std::uint64_t seed) {
    hp.validate();
    if (dataset.empty()) throw EmptyInput("dqn_train: empty dataset");

    Rng rng(seed);
    std::vector<State> states;
    states.reserve(dataset.size());
    for (const auto& m : dataset) states.push_back(encode_state(m));

    QNetwork online(hp.hidden_units, rng);
    QNetwork target = online;
    ReplayBuffer buffer(hp.buffer_capacity);

    TrainedDecision out;
    out.algorithm = "dqn";
    out.seed = seed;
    out.hyperparams = to_json(hp);
    out.dataset_digest = dataset_digest(dataset);

    // max_a' Q_target(s', a') per next state; valid until the next sync.
    std::map<State, double> max_next_q;
    auto target_for = [&](const Transition& t) {
        if (!t.s_next) return target_value(t, hp.gamma, 0.0);
        auto it = max_next_q.find(*t.s_next);
        if (it == max_next_q.end()) {
            Rng ga_rng(rng.next());
            const State& next = *t.s_next;
            const double v =
                ga_search([&](const ActionBatch& a) { return target.q_actions(next, a); }, hp.ga, ga_rng).value;
            it = max_next_q.emplace(next, v).first;
        }
        return target_value(t, hp.gamma, it->second);
    };

    std::size_t steps = 0;
    std::vector<const Transition*> batch;
    std::vector<double> targets;
    for (std::size_t episode = 0; episode < hp.episodes; ++episode) {
        std::vector<std::size_t> draws(hp.episode_length);
        for (auto& d : draws) d = rng.below(dataset.size());
        std::size_t correct = 0;
        for (std::size_t t = 0; t < hp.episode_length; ++t) {
            const auto& sample = dataset[draws[t]];
            const State& s = states[draws[t]];
            const WeightVector action = ga_search_action(online, s, hp.ga, rng.next());
            const bool right = decide(action, sample.a, sample.b).side == sample.true_winner;
            if (right) ++correct;

            Transition tr;
            tr.s = s;
            tr.a = action.values();
            tr.r = right ? 1.0 : -1.0;
            if (t + 1 < hp.episode_length) tr.s_next = states[draws[t + 1]];
            buffer.push(std::move(tr));

            if (buffer.size() >= std::min(hp.minibatch, hp.buffer_capacity)) {
                batch = buffer.sample(hp.minibatch, rng);
                targets.clear();
                for (const auto* b : batch) targets.push_back(target_for(*b));
                const double loss = online.train_step(batch, targets, hp.learning_rate);
                if (!std::isfinite(loss)) {
                    throw NumericalDivergence("dqn loss diverged at episode " + std::to_string(episode) + ", step " +
                                              std::to_string(steps) + " (loss " + std::to_string(loss) + ")");
                }
            }
            if (++steps % hp.sync_interval == 0) {
                target = online;
                max_next_q.clear();
            }
        }
        out.curve.push_back(static_cast<double>(correct) / static_cast<double>(hp.episode_length));
    }

    // Pick the weights that maximize mean Q over a sample of states.
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    order.resize(std::min(hp.held_out_states, order.size()));
    auto mean_q = [&](const ActionBatch& a) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(a.cols());
        for (auto idx : order) sum += online.q_actions(states[idx], a);
        return Eigen::VectorXd(sum / static_cast<double>(order.size()));
    };
    auto best = ga_search(mean_q, hp.ga, rng);
    out.weights = WeightVector::project(best.best);
    out.train_accuracy = decision_accuracy(out.weights, dataset);
    return out;
}

}  // namespace mindscope::decision
