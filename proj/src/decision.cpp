#include "mindscope/decision.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <regex>

#include "mindscope/error.hpp"
#include "mindscope/util.hpp"

namespace mindscope::decision {

using nlohmann::json;

bool ScoreVector::clamp() {
    bool moved = false;
    for (auto& v : values) {
        const double c = std::clamp(v, kMinScore, kMaxScore);
        if (c != v) moved = true;
        v = c;
    }
    return moved;
}

bool ScoreVector::in_range() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v >= kMinScore && v <= kMaxScore; });
}

Dims project_to_simplex(const Dims& v) {
    // Sort-based projection (Held, Wolfe & Crowder; Duchi et al.).
    Dims u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < kDimensions; ++i) {
        cumulative += u[i];
        const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    Dims out;
    for (std::size_t i = 0; i < kDimensions; ++i) out[i] = std::max(v[i] - theta, 0.0);
    const double sum = std::accumulate(out.begin(), out.end(), 0.0);
    if (sum <= 0.0 || !std::isfinite(sum)) {
        out.fill(1.0 / static_cast<double>(kDimensions));
        return out;
    }
    for (auto& x : out) x /= sum;
    return out;
}

bool on_simplex(const Dims& w, double tol) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= -tol)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

Dims random_simplex_point(Rng& rng) {
    Dims out;
    double sum = 0.0;
    for (auto& x : out) {
        double u;
        do {
            u = rng.uniform();
        } while (u <= 0.0);
        x = -std::log(u);
        sum += x;
    }
    for (auto& x : out) x /= sum;
    return out;
}

WeightVector::WeightVector(const Dims& w) : w_(w) {
    if (!on_simplex(w)) throw ConfigError("weights must be nonnegative and sum to 1");
    for (auto& x : w_) x = std::max(x, 0.0);
}

WeightVector WeightVector::uniform() {
    WeightVector w;
    w.w_.fill(1.0 / static_cast<double>(kDimensions));
    return w;
}

WeightVector WeightVector::vertex(std::size_t i) {
    WeightVector w;
    w.w_.fill(0.0);
    w.w_.at(i) = 1.0;
    return w;
}

WeightVector WeightVector::project(const Dims& v) {
    WeightVector w;
    w.w_ = project_to_simplex(v);
    return w;
}

double WeightVector::dot(const Dims& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < kDimensions; ++i) s += w_[i] * x[i];
    return s;
}

std::string_view to_string(Side s) { return s == Side::A ? "a" : "b"; }

Side parse_side(std::string_view s) {
    const auto lower = to_lower(s);
    if (lower == "a") return Side::A;
    if (lower == "b") return Side::B;
    throw SchemaError("side must be 'a' or 'b', got '" + std::string(s) + "'");
}

ScoreVector referee_mean(const RefereeScores& scores) {
    ScoreVector m;
    for (std::size_t i = 0; i < kDimensions; ++i) m[i] = 0.5 * (scores[0][i] + scores[1][i]);
    return m;
}

Winner decide(const WeightVector& w, const RefereeScores& a, const RefereeScores& b) {
    const double agg_a = w.dot(referee_mean(a).values);
    const double agg_b = w.dot(referee_mean(b).values);
    Winner out;
    if (agg_a == agg_b) {
        out.side = Side::A;
        out.tie_break = true;
    } else {
        out.side = agg_a > agg_b ? Side::A : Side::B;
    }
    out.margin = std::abs(agg_a - agg_b);
    return out;
}

const std::array<RefereeProfile, 2>& referee_profiles() {
    static const std::array<RefereeProfile, 2> profiles = {
        RefereeProfile{"JA1",
                       "You are a strict, evidence-first referee. Reward claims tied to concrete quotes from the test "
                       "text and penalize speculation heavily."},
        RefereeProfile{"JA2",
                       "You are a holistic referee. Weigh overall reasoning quality, clarity and how convincingly each "
                       "debater responds to the other."}};
    return profiles;
}

std::string referee_rubric() {
    std::string rubric = "Score each debater from 0 to 10 on six dimensions, in this order:\n";
    for (std::size_t i = 0; i < kDimensions; ++i) {
        rubric += std::to_string(i + 1) + ". " + std::string(kDimensionNames[i]) + "\n";
    }
    rubric += "Reply with one line: A: s1 s2 s3 s4 s5 s6 | B: s1 s2 s3 s4 s5 s6";
    return rubric;
}

namespace {

std::vector<double> numbers_in(const std::string& text) {
    static const std::regex number(R"([-+]?\d+(?:\.\d+)?)");
    std::vector<double> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
        out.push_back(std::stod(it->str()));
    }
    return out;
}

// Position just past a standalone "A:" / "B:" label, or npos.
std::size_t find_label(const std::string& text, char label) {
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(text[i])) != label || text[i + 1] != ':') continue;
        if (i > 0 && std::isalnum(static_cast<unsigned char>(text[i - 1]))) continue;
        return i + 2;
    }
    return std::string::npos;
}

}  // namespace

std::optional<ParsedScores> parse_referee_reply(const std::string& reply) {
    std::vector<double> a_nums;
    std::vector<double> b_nums;
    const auto a_pos = find_label(reply, 'A');
    const auto b_pos = find_label(reply, 'B');
    if (a_pos != std::string::npos && b_pos != std::string::npos && a_pos < b_pos) {
        a_nums = numbers_in(reply.substr(a_pos, b_pos - 2 - a_pos));
        b_nums = numbers_in(reply.substr(b_pos));
        if (b_nums.size() > kDimensions) b_nums.resize(kDimensions);
    }
    if (a_nums.size() != kDimensions || b_nums.size() != kDimensions) {
        auto all = numbers_in(reply);
        if (all.size() != 2 * kDimensions) return std::nullopt;
        a_nums.assign(all.begin(), all.begin() + kDimensions);
        b_nums.assign(all.begin() + kDimensions, all.end());
    }
    ParsedScores out;
    std::copy(a_nums.begin(), a_nums.end(), out.a.values.begin());
    std::copy(b_nums.begin(), b_nums.end(), out.b.values.begin());
    const bool clamped_a = out.a.clamp();
    const bool clamped_b = out.b.clamp();
    out.clamped = clamped_a || clamped_b;
    return out;
}

namespace {

json dims_json(const ScoreVector& s) { return json(s.values); }

ScoreVector dims_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != kDimensions) throw SchemaError("score vector must have 6 components");
    ScoreVector s;
    std::copy(v.begin(), v.end(), s.values.begin());
    if (!s.in_range()) throw SchemaError("score components must lie in [0, 10]");
    return s;
}

}  // namespace

json to_json(const MatchSample& m) {
    return {{"scores",
             {{"JA1", {{"a", dims_json(m.a[0])}, {"b", dims_json(m.b[0])}}},
              {"JA2", {{"a", dims_json(m.a[1])}, {"b", dims_json(m.b[1])}}}}},
            {"true_winner", to_string(m.true_winner)}};
}

MatchSample match_sample_from_json(const json& j, std::size_t line_no) {
    try {
        MatchSample m;
        const auto& scores = j.at("scores");
        m.a[0] = dims_from_json(scores.at("JA1").at("a"));
        m.b[0] = dims_from_json(scores.at("JA1").at("b"));
        m.a[1] = dims_from_json(scores.at("JA2").at("a"));
        m.b[1] = dims_from_json(scores.at("JA2").at("b"));
        m.true_winner = parse_side(j.at("true_winner").get<std::string>());
        return m;
    } catch (const json::exception& e) {
        throw RecordError(line_no, std::string("bad match sample: ") + e.what());
    } catch (const SchemaError& e) {
        throw RecordError(line_no, e.what());
    }
}

std::vector<MatchSample> load_dataset(const std::filesystem::path& path) {
    std::vector<MatchSample> out;
    for_each_json_line(path, [&](std::size_t line_no, const json& j) { out.push_back(match_sample_from_json(j, line_no)); });
    return out;
}

std::string dataset_to_jsonl(const std::vector<MatchSample>& samples) {
    std::string out;
    for (const auto& s : samples) out += to_json(s).dump() + "\n";
    return out;
}

std::string dataset_digest(const std::vector<MatchSample>& samples) { return sha256_hex(dataset_to_jsonl(samples)); }

double decision_accuracy(const WeightVector& w, const std::vector<MatchSample>& samples) {
    if (samples.empty()) throw EmptyInput("decision_accuracy: empty dataset");
    std::size_t correct = 0;
    for (const auto& s : samples) {
        if (decide(w, s.a, s.b).side == s.true_winner) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

std::vector<MatchSample> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
    const WeightVector hidden(spec.hidden_weights);
    Rng rng(seed);
    std::vector<MatchSample> out;
    out.reserve(spec.count);
    while (out.size() < spec.count) {
        ScoreVector clean_a;
        ScoreVector clean_b;
        for (std::size_t i = 0; i < kDimensions; ++i) {
            clean_a[i] = rng.uniform(kMinScore, kMaxScore);
            clean_b[i] = rng.uniform(kMinScore, kMaxScore);
        }
        MatchSample m;
        const double agg_a = hidden.dot(clean_a.values);
        const double agg_b = hidden.dot(clean_b.values);
        m.true_winner = agg_a >= agg_b ? Side::A : Side::B;
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t i = 0; i < kDimensions; ++i) {
                m.a[r][i] = clean_a[i] + rng.normal(0.0, spec.noise_sigma);
                m.b[r][i] = clean_b[i] + rng.normal(0.0, spec.noise_sigma);
            }
            m.a[r].clamp();
            m.b[r].clamp();
        }
        out.push_back(m);
    }
    return out;
}

json to_json(const WeightVector& w) { return json(w.values()); }

WeightVector weight_vector_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != kDimensions) throw SchemaError("weight vector must have 6 components");
    Dims d;
    std::copy(v.begin(), v.end(), d.begin());
    return WeightVector(d);
}

}  // namespace mindscope::decision
