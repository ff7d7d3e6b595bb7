#include <gtest/gtest.h>

#include <numeric>

#include "mindscope/decision.hpp"
#include "mindscope/error.hpp"
#include "mindscope/util.hpp"
#include "support/paths.hpp"

using namespace mindscope;
using namespace mindscope::decision;

namespace {

ScoreVector all(double v) {
    ScoreVector s;
    s.values.fill(v);
    return s;
}

ScoreVector dims(std::initializer_list<double> v) {
    ScoreVector s;
    std::copy(v.begin(), v.end(), s.values.begin());
    return s;
}

}  // namespace

TEST(ParseReferee, LabeledReply) {
    const auto p = parse_referee_reply("A: 8 7 9 8 7 8 | B: 6 6 5 7 6 5");
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->a, dims({8, 7, 9, 8, 7, 8}));
    EXPECT_EQ(p->b, dims({6, 6, 5, 7, 6, 5}));
    EXPECT_FALSE(p->clamped);
}

TEST(ParseReferee, OutOfRangeIsClampedAndFlagged) {
    const auto p = parse_referee_reply("A: 11 7 9 8 7 8 | B: 6 6 5 7 6 -2");
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->a[0], 10.0);
    EXPECT_EQ(p->b[5], 0.0);
    EXPECT_TRUE(p->clamped);
}

TEST(ParseReferee, BareTwelveNumbersAndGarbage) {
    const auto p = parse_referee_reply("Scores: 1 2 3 4 5 6 then 6 5 4 3 2 1");
    ASSERT_TRUE(p.has_value());
    EXPECT_EQ(p->b, dims({6, 5, 4, 3, 2, 1}));
    EXPECT_FALSE(parse_referee_reply("A wins clearly").has_value());
    EXPECT_FALSE(parse_referee_reply("A: 1 2 3 | B: 4 5 6").has_value());
}

TEST(Decide, UniformWeightsDominance) {
    const auto w = decide(WeightVector::uniform(), {all(8), all(8)}, {all(7), all(7)});
    EXPECT_EQ(w.side, Side::A);
    EXPECT_NEAR(w.margin, 1.0, 1e-12);
    EXPECT_FALSE(w.tie_break);
}

TEST(Decide, SingleDimensionWeights) {
    auto a1 = all(9), a2 = all(9), b1 = all(1), b2 = all(1);
    a1[0] = 4;
    a2[0] = 6;  // mean 5
    b1[0] = 9;
    b2[0] = 9;
    const auto w = decide(WeightVector::vertex(0), {a1, a2}, {b1, b2});
    EXPECT_EQ(w.side, Side::B);
    EXPECT_NEAR(w.margin, 4.0, 1e-12);
}

TEST(Decide, IdenticalVectorsGoToSideAWithTieBreak) {
    const auto w = decide(WeightVector::uniform(), {all(5), all(6)}, {all(5), all(6)});
    EXPECT_EQ(w.side, Side::A);
    EXPECT_EQ(w.margin, 0.0);
    EXPECT_TRUE(w.tie_break);
}

TEST(Decide, ScaleCovariantAndRefereeSymmetric) {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        RefereeScores a, b;
        for (auto* s : {&a[0], &a[1], &b[0], &b[1]})
            for (auto& v : s->values) v = rng.uniform(0, 5);
        const WeightVector w(random_simplex_point(rng));
        const auto base = decide(w, a, b);
        const double k = rng.uniform(0.1, 2.0);
        RefereeScores ka = a, kb = b;
        for (auto* s : {&ka[0], &ka[1], &kb[0], &kb[1]})
            for (auto& v : s->values) v *= k;
        const auto scaled = decide(w, ka, kb);
        if (!base.tie_break) EXPECT_EQ(scaled.side, base.side);
        EXPECT_NEAR(scaled.margin, k * base.margin, 1e-9);
        const auto swapped = decide(w, {a[1], a[0]}, {b[1], b[0]});
        EXPECT_EQ(swapped.side, base.side);
        EXPECT_NEAR(swapped.margin, base.margin, 1e-12);
    }
}

TEST(Weights, ConstructorEnforcesTheSimplex) {
    EXPECT_THROW(WeightVector({0.5, 0.5, 0.5, 0, 0, 0}), ConfigError);
    EXPECT_THROW(WeightVector({1.5, -0.5, 0, 0, 0, 0}), ConfigError);
    EXPECT_NO_THROW(WeightVector({0.5, 0.5, 0, 0, 0, 0}));
    EXPECT_TRUE(on_simplex(WeightVector::uniform().values()));
}

TEST(Weights, ProjectionLandsOnTheSimplexAndFixesSimplexPoints) {
    Rng rng(5);
    for (int t = 0; t < 500; ++t) {
        Dims v;
        for (auto& x : v) x = rng.normal(0.0, 2.0);
        const auto p = project_to_simplex(v);
        EXPECT_TRUE(on_simplex(p));
        const auto q = random_simplex_point(rng);
        EXPECT_TRUE(on_simplex(q));
        const auto pq = project_to_simplex(q);
        for (std::size_t i = 0; i < kDimensions; ++i) EXPECT_NEAR(pq[i], q[i], 1e-12);
    }
    // Projection of a point above a vertex is that vertex.
    const auto p = project_to_simplex({5, 0, 0, 0, 0, 0});
    EXPECT_NEAR(p[0], 1.0, 1e-12);
}

TEST(Weights, ProjectionMatchesClosedFormForTwoActiveCoordinates) {
    // (0.8, 0.6, 0...) -> subtract theta = 0.2 from the two positives.
    const auto p = project_to_simplex({0.8, 0.6, 0, 0, 0, 0});
    EXPECT_NEAR(p[0], 0.6, 1e-12);
    EXPECT_NEAR(p[1], 0.4, 1e-12);
}

TEST(Referees, TwoDistinctProfiles) {
    const auto& p = referee_profiles();
    EXPECT_EQ(p[0].tag, "JA1");
    EXPECT_EQ(p[1].tag, "JA2");
    EXPECT_NE(p[0].style_instructions, p[1].style_instructions);
    for (auto name : kDimensionNames) EXPECT_NE(referee_rubric().find(std::string(name)), std::string::npos);
}

TEST(Dataset, JsonRoundTripAndDigest) {
    const auto data = generate_synthetic({20, {0.35, 0.25, 0.15, 0.10, 0.10, 0.05}, 0.5}, 11);
    fixtures::TempDir dir("dataset");
    write_file(dir / "d.jsonl", dataset_to_jsonl(data));
    const auto loaded = load_dataset(dir / "d.jsonl");
    ASSERT_EQ(loaded.size(), data.size());
    EXPECT_EQ(dataset_to_jsonl(loaded), dataset_to_jsonl(data));
    EXPECT_EQ(dataset_digest(loaded), dataset_digest(data));
    const auto j = to_json(data[0]);
    EXPECT_TRUE(j["scores"]["JA1"].contains("a"));
    EXPECT_TRUE(j["scores"]["JA2"].contains("b"));
    EXPECT_TRUE(j["true_winner"] == "a" || j["true_winner"] == "b");
}

TEST(Dataset, BadRecordReportsLine) {
    fixtures::TempDir dir("dataset");
    const auto data = generate_synthetic({1, {1, 0, 0, 0, 0, 0}, 0.0}, 1);
    write_file(dir / "d.jsonl", dataset_to_jsonl(data) + "{\"scores\": {}, \"true_winner\": \"a\"}\n");
    try {
        load_dataset(dir / "d.jsonl");
        FAIL();
    } catch (const RecordError& e) {
        EXPECT_EQ(e.line_no(), 2u);
    }
}

TEST(Synthetic, ZeroNoiseLabelsMatchHiddenWeights) {
    const SyntheticSpec spec{300, {0.35, 0.25, 0.15, 0.10, 0.10, 0.05}, 0.0};
    const auto data = generate_synthetic(spec, 4);
    EXPECT_EQ(decision_accuracy(WeightVector(spec.hidden_weights), data), 1.0);
    for (const auto& m : data) EXPECT_EQ(m.a[0], m.a[1]);
}

TEST(Synthetic, DeterministicPerSeedAndInRange) {
    const SyntheticSpec spec;
    const auto a = generate_synthetic(spec, 9);
    const auto b = generate_synthetic(spec, 9);
    EXPECT_EQ(dataset_digest(a), dataset_digest(b));
    EXPECT_NE(dataset_digest(a), dataset_digest(generate_synthetic(spec, 10)));
    EXPECT_EQ(a.size(), 1000u);
    for (const auto& m : a)
        for (const auto& s : {m.a[0], m.a[1], m.b[0], m.b[1]}) EXPECT_TRUE(s.in_range());
}

TEST(Accuracy, EmptyDatasetIsAnError) {
    EXPECT_THROW(decision_accuracy(WeightVector::uniform(), {}), EmptyInput);
}

TEST(Sides, ParseAndPrint) {
    EXPECT_EQ(parse_side("a"), Side::A);
    EXPECT_EQ(parse_side("B"), Side::B);
    EXPECT_EQ(to_string(Side::B), "b");
    EXPECT_THROW(parse_side("c"), SchemaError);
}
