#include <gtest/gtest.h>

#include "mindscope/error.hpp"
#include "mindscope/optimizers.hpp"

using namespace mindscope;
using namespace mindscope::decision;

namespace {

const SyntheticSpec kClean{20, {0.35, 0.25, 0.15, 0.10, 0.10, 0.05}, 0.0};

}  // namespace

TEST(AccuracyObjective, MatchesCountingOracle) {
    const auto data = generate_synthetic({150, {0.35, 0.25, 0.15, 0.10, 0.10, 0.05}, 0.5}, 3);
    const AccuracyObjective objective(data);
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto w = random_simplex_point(rng);
        std::size_t right = 0;
        for (const auto& m : data) {
            double margin = 0;
            for (std::size_t i = 0; i < kDimensions; ++i)
                margin += w[i] * ((m.a[0][i] + m.a[1][i]) / 2 - (m.b[0][i] + m.b[1][i]) / 2);
            right += ((margin >= 0) ? Side::A : Side::B) == m.true_winner;
        }
        EXPECT_NEAR(objective(w), static_cast<double>(right) / data.size(), 1e-12);
        EXPECT_NEAR(objective(w), decision_accuracy(WeightVector(w), data), 1e-12);
    }
}

class EachBaseline : public ::testing::TestWithParam<Baseline> {};

TEST_P(EachBaseline, ZeroNoiseReachesPerfectTrainingAccuracy) {
    const auto data = generate_synthetic(kClean, 7);
    const auto t = baseline_optimize(GetParam(), data, {}, 1);
    EXPECT_EQ(t.train_accuracy, 1.0);
    EXPECT_TRUE(on_simplex(t.weights.values()));
    EXPECT_EQ(t.algorithm, to_string(GetParam()));
}

TEST_P(EachBaseline, CurveIsNondecreasing) {
    const auto data = generate_synthetic({100, kClean.hidden_weights, 0.5}, 8);
    const auto t = baseline_optimize(GetParam(), data, {}, 2);
    ASSERT_FALSE(t.curve.empty());
    for (std::size_t i = 1; i < t.curve.size(); ++i) EXPECT_GE(t.curve[i], t.curve[i - 1]);
    EXPECT_EQ(t.curve.back(), t.train_accuracy);
}

TEST_P(EachBaseline, SingleSampleIsFitExactly) {
    const auto data = generate_synthetic({1, kClean.hidden_weights, 0.5}, 9);
    EXPECT_EQ(baseline_optimize(GetParam(), data, {}, 3).train_accuracy, 1.0);
}

TEST_P(EachBaseline, SameSeedGivesIdenticalResult) {
    const auto data = generate_synthetic({80, kClean.hidden_weights, 0.5}, 10);
    const auto a = baseline_optimize(GetParam(), data, {}, 4);
    const auto b = baseline_optimize(GetParam(), data, {}, 4);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST_P(EachBaseline, EmptyDatasetIsAnError) { EXPECT_THROW(baseline_optimize(GetParam(), {}, {}, 1), EmptyInput); }

INSTANTIATE_TEST_SUITE_P(Baselines, EachBaseline, ::testing::Values(Baseline::GA, Baseline::SAA, Baseline::ACO),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Aco, UnitGranularityYieldsVertices) {
    const auto data = generate_synthetic({50, kClean.hidden_weights, 0.5}, 11);
    BaselineParams p;
    p.aco.granularity = 1.0;
    const auto w = baseline_optimize(Baseline::ACO, data, p, 5).weights.values();
    std::size_t ones = 0;
    for (double x : w) {
        EXPECT_TRUE(x == 0.0 || x == 1.0);
        ones += x == 1.0;
    }
    EXPECT_EQ(ones, 1u);
}

TEST(BaselineParamsCheck, RejectsBadValues) {
    BaselineParams p;
    p.aco.granularity = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.saa.final_temperature = 1.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.aco.evaporation = 1.0;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_NO_THROW(BaselineParams{}.validate());
}

TEST(BaselineNames, ParseAndPrint) {
    EXPECT_EQ(parse_baseline("saa"), Baseline::SAA);
    EXPECT_EQ(to_string(Baseline::ACO), "aco");
    EXPECT_THROW(parse_baseline("pso"), ConfigError);
}
