#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/rng.hpp"

namespace mindscope::decision {

inline constexpr std::size_t kDimensions = 6;
inline constexpr std::array<std::string_view, kDimensions> kDimensionNames = {
    "argument_support", "logical_consistency", "effective_rebuttal",
    "argument_completeness", "persuasiveness", "bias_assessment"};

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 10.0;
inline constexpr double kSimplexTolerance = 1e-9;

using Dims = std::array<double, kDimensions>;

/// Six referee scores in [0, 10], in kDimensionNames order.
struct ScoreVector {
    Dims values{};

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    bool operator==(const ScoreVector&) const = default;

    /// Clamps every component into [0, 10]; returns true if anything moved.
    bool clamp();
    bool in_range() const;
};

/// A point on the probability simplex over the six dimensions.
class WeightVector {
public:
    /// Throws ConfigError unless `w` is nonnegative and sums to 1 within 1e-9.
    explicit WeightVector(const Dims& w);

    static WeightVector uniform();
    static WeightVector vertex(std::size_t i);
    /// Euclidean projection of an arbitrary vector onto the simplex.
    static WeightVector project(const Dims& v);

    const Dims& values() const { return w_; }
    double operator[](std::size_t i) const { return w_[i]; }
    double dot(const Dims& x) const;

    bool operator==(const WeightVector&) const = default;

private:
    WeightVector() = default;
    Dims w_{};
};

/// Euclidean projection onto {x >= 0, sum x = 1}, renormalized so the sum is
/// exact to rounding.
Dims project_to_simplex(const Dims& v);
bool on_simplex(const Dims& w, double tol = kSimplexTolerance);

/// Uniform (Dirichlet(1)) sample from the simplex.
Dims random_simplex_point(Rng& rng);

enum class Side { A, B };
std::string_view to_string(Side s);
Side parse_side(std::string_view s);

/// Scores from both referees (JA1, JA2) for one debater.
using RefereeScores = std::array<ScoreVector, 2>;

ScoreVector referee_mean(const RefereeScores& scores);

struct Winner {
    Side side = Side::A;
    double margin = 0.0;
    bool tie_break = false;
};

/// Aggregates w · mean(JA1, JA2) per side; the larger aggregate wins. Side A
/// is always the lower catalog index, so an exact tie goes to A.
Winner decide(const WeightVector& w, const RefereeScores& a, const RefereeScores& b);

struct RefereeProfile {
    std::string tag;  // "JA1" or "JA2"
    std::string style_instructions;
};

/// The two referee styles; distinct by construction.
const std::array<RefereeProfile, 2>& referee_profiles();

struct ParsedScores {
    ScoreVector a;
    ScoreVector b;
    bool clamped = false;
};

/// Parses "A: 8 7 9 8 7 8 | B: 6 6 5 7 6 5" (or any reply carrying exactly 12
/// numbers, A's six first). nullopt when unparseable.
std::optional<ParsedScores> parse_referee_reply(const std::string& reply);

/// The six-dimension rubric prompt given to a referee.
std::string referee_rubric();

/// One labeled debate used to train the decision rule.
struct MatchSample {
    RefereeScores a;
    RefereeScores b;
    Side true_winner = Side::A;
};

nlohmann::json to_json(const MatchSample& m);
MatchSample match_sample_from_json(const nlohmann::json& j, std::size_t line_no = 0);
std::vector<MatchSample> load_dataset(const std::filesystem::path& path);
std::string dataset_to_jsonl(const std::vector<MatchSample>& samples);
std::string dataset_digest(const std::vector<MatchSample>& samples);

/// Fraction of samples whose decide() outcome matches the label.
double decision_accuracy(const WeightVector& w, const std::vector<MatchSample>& samples);

struct SyntheticSpec {
    std::size_t count = 1000;
    Dims hidden_weights = {0.35, 0.25, 0.15, 0.10, 0.10, 0.05};
    double noise_sigma = 0.5;
};

/// Clean per-dimension scores are uniform in [0, 10]; the label comes from
/// the hidden weights on the clean scores, and each referee then observes the
/// clean scores plus Gaussian noise (clamped to [0, 10]).
std::vector<MatchSample> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const WeightVector& w);
WeightVector weight_vector_from_json(const nlohmann::json& j);

}  // namespace mindscope::decision
