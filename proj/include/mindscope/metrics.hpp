#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mindscope/knowledge.hpp"

namespace mindscope::metrics {

inline constexpr std::string_view kNoBias = "no-bias";

struct LabeledOutcome {
    std::string predicted;  // bias id or "no-bias"
    std::string truth;
};

struct AccuracySuite {
    double acc = 0.0;
    std::optional<double> acc_bias;    // absent when no case carries a bias
    std::optional<double> acc_nobias;  // absent when every case carries a bias
    std::size_t total = 0;
    std::size_t bias_cases = 0;
    std::size_t nobias_cases = 0;

    nlohmann::json to_json() const;
};

/// A bias-present case is correct only with the exact bias id. Throws
/// EmptyInput.
AccuracySuite accuracy_suite(const std::vector<LabeledOutcome>& outcomes);

struct Kappa {
    double value = 0.0;
    bool degenerate = false;  // expected agreement was 1
};

/// Cohen's kappa over categorical labels. Throws LengthMismatch or
/// EmptyInput.
Kappa cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Product-moment correlation. Throws LengthMismatch, EmptyInput (fewer than
/// two points) or DegenerateVariance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct FrequencyRecord {
    std::string model;
    std::string bias_id;
    bool flagged = false;
};

struct FrequencyCell {
    std::string model;
    std::string bias_id;
    std::size_t trials = 0;
    std::size_t flagged = 0;
    double frequency = 0.0;
    double normalized = 0.0;
};

struct FrequencyTable {
    std::vector<FrequencyCell> cells;  // by catalog_index, then model

    std::string to_csv() const;
    nlohmann::json to_json() const;
};

/// Per (model, bias) flag rate, max-normalized across all cells. Ids absent
/// from the library sort after catalog entries, by id. Throws EmptyInput.
FrequencyTable bias_frequency(const std::vector<FrequencyRecord>& records,
                              const knowledge::KnowledgeLibrary* library = nullptr);

/// Published baseline row kept for comparison in rendered reports.
struct BaselineRow {
    std::string_view name;
    double acc;
    double acc_bias;
    double acc_nobias;
};
inline constexpr BaselineRow kGpt4Baseline{"GPT-4", 34.43, 37.80, 33.18};

/// Markdown summary of a metrics document written by `evaluate`.
std::string render_report(const nlohmann::json& metrics);

}  // namespace mindscope::metrics
