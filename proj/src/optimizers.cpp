#include "mindscope/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::decision {

using nlohmann::json;

std::string_view to_string(Baseline b) {
    switch (b) {
        case Baseline::GA: return "ga";
        case Baseline::SAA: return "saa";
        case Baseline::ACO: return "aco";
    }
    return "ga";
}

Baseline parse_baseline(std::string_view s) {
    const std::string v = to_lower(std::string(s));
    if (v == "ga") return Baseline::GA;
    if (v == "saa") return Baseline::SAA;
    if (v == "aco") return Baseline::ACO;
    throw ConfigError("unknown baseline '" + std::string(s) + "' (expected ga, saa or aco)");
}

void BaselineParams::validate() const {
    ga.validate();
    if (saa.iterations == 0) throw ConfigError("saa iterations must be >= 1");
    if (!(saa.initial_temperature > 0.0) || !(saa.final_temperature > 0.0) ||
        saa.final_temperature > saa.initial_temperature) {
        throw ConfigError("saa temperatures must satisfy 0 < final <= initial");
    }
    if (!(saa.step_sigma > 0.0)) throw ConfigError("saa step sigma must be positive");
    if (aco.ants == 0 || aco.iterations == 0) throw ConfigError("aco ants and iterations must be >= 1");
    if (!(aco.granularity > 0.0 && aco.granularity <= 1.0)) throw ConfigError("aco granularity must lie in (0, 1]");
    if (!(aco.evaporation > 0.0 && aco.evaporation < 1.0)) throw ConfigError("aco evaporation must lie in (0, 1)");
    if (!(aco.initial_pheromone > 0.0)) throw ConfigError("aco initial pheromone must be positive");
}

json to_json(Baseline which, const BaselineParams& p) {
    switch (which) {
        case Baseline::GA:
            return {{"population", p.ga.population},
                    {"generations", p.ga.generations},
                    {"mutation_sigma", p.ga.mutation_sigma},
                    {"tournament_size", p.ga.tournament_size},
                    {"blend_alpha", p.ga.blend_alpha}};
        case Baseline::SAA:
            return {{"iterations", p.saa.iterations},
                    {"initial_temperature", p.saa.initial_temperature},
                    {"final_temperature", p.saa.final_temperature},
                    {"step_sigma", p.saa.step_sigma}};
        case Baseline::ACO:
            return {{"ants", p.aco.ants},
                    {"iterations", p.aco.iterations},
                    {"granularity", p.aco.granularity},
                    {"evaporation", p.aco.evaporation},
                    {"initial_pheromone", p.aco.initial_pheromone}};
    }
    return json::object();
}

AccuracyObjective::AccuracyObjective(const std::vector<MatchSample>& samples) {
    if (samples.empty()) throw EmptyInput("accuracy objective: empty dataset");
    const auto n = static_cast<Eigen::Index>(samples.size());
    diffs_.resize(n, static_cast<Eigen::Index>(kDimensions));
    a_wins_.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& m = samples[static_cast<std::size_t>(r)];
        const auto ma = referee_mean(m.a);
        const auto mb = referee_mean(m.b);
        for (std::size_t i = 0; i < kDimensions; ++i) diffs_(r, static_cast<Eigen::Index>(i)) = ma[i] - mb[i];
        a_wins_(r) = m.true_winner == Side::A ? 1.0 : 0.0;
    }
}

Eigen::VectorXd AccuracyObjective::operator()(const ActionBatch& weights) const {
    const Eigen::MatrixXd agg = diffs_ * weights;
    Eigen::VectorXd out(weights.cols());
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
        double hits = 0.0;
        for (Eigen::Index r = 0; r < agg.rows(); ++r) {
            const bool picks_a = agg(r, j) >= 0.0;
            hits += (picks_a == (a_wins_(r) > 0.5)) ? 1.0 : 0.0;
        }
        out(j) = hits / static_cast<double>(agg.rows());
    }
    return out;
}

double AccuracyObjective::operator()(const Dims& w) const {
    ActionBatch batch(static_cast<Eigen::Index>(kDimensions), 1);
    for (std::size_t i = 0; i < kDimensions; ++i) batch(static_cast<Eigen::Index>(i), 0) = w[i];
    return (*this)(batch)(0);
}

namespace {

Dims run_ga(const AccuracyObjective& objective, const GaParams& params, Rng& rng, std::vector<double>& curve) {
    double best_so_far = -1.0;
    bool initial = true;
    auto tracking = [&](const ActionBatch& a) {
        Eigen::VectorXd f = objective(a);
        best_so_far = std::max(best_so_far, f.maxCoeff());
        if (!initial) curve.push_back(best_so_far);
        initial = false;
        return f;
    };
    return ga_search(tracking, params, rng).best;
}

Dims run_saa(const AccuracyObjective& objective, const SaaParams& p, Rng& rng, std::vector<double>& curve) {
    Dims current = random_simplex_point(rng);
    double current_f = objective(current);
    Dims best = current;
    double best_f = current_f;
    const double ratio = p.iterations > 1 ? std::pow(p.final_temperature / p.initial_temperature,
                                                     1.0 / static_cast<double>(p.iterations - 1))
                                          : 1.0;
    double temperature = p.initial_temperature;
    for (std::size_t it = 0; it < p.iterations; ++it) {
        Dims proposal;
        for (std::size_t i = 0; i < kDimensions; ++i) proposal[i] = current[i] + p.step_sigma * rng.normal();
        proposal = project_to_simplex(proposal);
        const double f = objective(proposal);
        const double delta = f - current_f;
        if (delta >= 0.0 || rng.uniform() < std::exp(delta / temperature)) {
            current = proposal;
            current_f = f;
        }
        if (current_f > best_f) {
            best = current;
            best_f = current_f;
        }
        curve.push_back(best_f);
        temperature *= ratio;
    }
    return best;
}

Dims run_aco(const AccuracyObjective& objective, const AcoParams& p, Rng& rng, std::vector<double>& curve) {
    const auto units = static_cast<std::size_t>(std::max(1.0, std::round(1.0 / p.granularity)));
    // pheromone[d][k]: desirability of giving dimension d exactly k units.
    std::vector<std::vector<double>> pheromone(kDimensions, std::vector<double>(units + 1, p.initial_pheromone));
    std::array<std::size_t, kDimensions> order;
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<std::size_t> best_units;
    double best_f = -1.0;
    for (std::size_t it = 0; it < p.iterations; ++it) {
        std::vector<std::vector<std::size_t>> colony(p.ants, std::vector<std::size_t>(kDimensions, 0));
        ActionBatch batch(static_cast<Eigen::Index>(kDimensions), static_cast<Eigen::Index>(p.ants));
        for (std::size_t ant = 0; ant < p.ants; ++ant) {
            rng.shuffle(std::span<std::size_t>(order));
            std::size_t remaining = units;
            for (std::size_t pos = 0; pos < kDimensions; ++pos) {
                const std::size_t d = order[pos];
                std::size_t k = remaining;
                if (pos + 1 < kDimensions) {
                    double total = 0.0;
                    for (std::size_t c = 0; c <= remaining; ++c) total += pheromone[d][c];
                    double u = rng.uniform() * total;
                    for (k = 0; k < remaining; ++k) {
                        u -= pheromone[d][k];
                        if (u < 0.0) break;
                    }
                }
                colony[ant][d] = k;
                remaining -= k;
            }
            for (std::size_t i = 0; i < kDimensions; ++i)
                batch(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ant)) =
                    static_cast<double>(colony[ant][i]) / static_cast<double>(units);
        }
        const Eigen::VectorXd f = objective(batch);
        Eigen::Index iter_best = 0;
        f.maxCoeff(&iter_best);
        if (f(iter_best) > best_f) {
            best_f = f(iter_best);
            best_units = colony[static_cast<std::size_t>(iter_best)];
        }
        for (auto& row : pheromone)
            for (auto& t : row) t *= 1.0 - p.evaporation;
        for (std::size_t d = 0; d < kDimensions; ++d) {
            pheromone[d][colony[static_cast<std::size_t>(iter_best)][d]] += f(iter_best);
            pheromone[d][best_units[d]] += best_f;
        }
        curve.push_back(best_f);
    }
    Dims w;
    for (std::size_t i = 0; i < kDimensions; ++i)
        w[i] = static_cast<double>(best_units[i]) / static_cast<double>(units);
    return w;
}

}  // namespace

TrainedDecision baseline_optimize(Baseline which, const std::vector<MatchSample>& dataset,
                                  const BaselineParams& params, std::uint64_t seed) {
    params.validate();
    if (dataset.empty()) throw EmptyInput("baseline_optimize: empty dataset");
    const AccuracyObjective objective(dataset);
    Rng rng(seed);

    TrainedDecision out;
    out.algorithm = std::string(to_string(which));
    out.seed = seed;
    out.hyperparams = to_json(which, params);
    out.dataset_digest = dataset_digest(dataset);
    Dims w{};
    switch (which) {
        case Baseline::GA: w = run_ga(objective, params.ga, rng, out.curve); break;
        case Baseline::SAA: w = run_saa(objective, params.saa, rng, out.curve); break;
        case Baseline::ACO: w = run_aco(objective, params.aco, rng, out.curve); break;
    }
    out.weights = WeightVector::project(w);
    out.train_accuracy = decision_accuracy(out.weights, dataset);
    return out;
}

}  // namespace mindscope::decision
