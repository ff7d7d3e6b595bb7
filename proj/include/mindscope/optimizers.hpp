#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/decision.hpp"
#include "mindscope/dqn.hpp"

namespace mindscope::decision {

enum class Baseline { GA, SAA, ACO };
std::string_view to_string(Baseline b);
Baseline parse_baseline(std::string_view s);

struct SaaParams {
    std::size_t iterations = 1280;
    double initial_temperature = 0.05;
    double final_temperature = 1e-4;
    double step_sigma = 0.05;
};

struct AcoParams {
    std::size_t ants = 32;
    std::size_t iterations = 40;
    double granularity = 0.05;  // weight quantum; 1/granularity units per ant
    double evaporation = 0.1;
    double initial_pheromone = 1.0;
};

struct BaselineParams {
    GaParams ga{32, 40, 0.05, 2, 0.5};
    SaaParams saa;
    AcoParams aco;

    void validate() const;
};

nlohmann::json to_json(Baseline which, const BaselineParams& p);

/// Batch training accuracy: column j of the result is the fraction of
/// samples whose label agrees with the weighted score difference under
/// column j of `weights`.
class AccuracyObjective {
public:
    explicit AccuracyObjective(const std::vector<MatchSample>& samples);
    Eigen::VectorXd operator()(const ActionBatch& weights) const;
    double operator()(const Dims& w) const;

private:
    Eigen::MatrixXd diffs_;   // n x 6, mean(A) - mean(B)
    Eigen::VectorXd a_wins_;  // 1 where the label is A
};

/// Direct search for the weights that maximize training accuracy. The curve
/// holds the best accuracy so far after each generation/iteration.
TrainedDecision baseline_optimize(Baseline which, const std::vector<MatchSample>& dataset,
                                  const BaselineParams& params, std::uint64_t seed);

}  // namespace mindscope::decision
