#include "mindscope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "mindscope/error.hpp"

namespace mindscope::metrics {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return buf;
}

std::string percent_cell(const json& v) { return v.is_number() ? percent(v.get<double>()) : "n/a"; }

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

json AccuracySuite::to_json() const {
    return {{"acc", acc},
            {"acc_bias", optional_json(acc_bias)},
            {"acc_nobias", optional_json(acc_nobias)},
            {"total", total},
            {"bias_cases", bias_cases},
            {"nobias_cases", nobias_cases}};
}

AccuracySuite accuracy_suite(const std::vector<LabeledOutcome>& outcomes) {
    if (outcomes.empty()) throw EmptyInput("accuracy_suite: no outcomes");
    std::size_t hits = 0, bias_hits = 0, nobias_hits = 0;
    AccuracySuite s;
    s.total = outcomes.size();
    for (const auto& o : outcomes) {
        const bool hit = o.predicted == o.truth;
        hits += hit;
        if (o.truth == kNoBias) {
            ++s.nobias_cases;
            nobias_hits += hit;
        } else {
            ++s.bias_cases;
            bias_hits += hit;
        }
    }
    s.acc = static_cast<double>(hits) / static_cast<double>(s.total);
    if (s.bias_cases) s.acc_bias = static_cast<double>(bias_hits) / static_cast<double>(s.bias_cases);
    if (s.nobias_cases) s.acc_nobias = static_cast<double>(nobias_hits) / static_cast<double>(s.nobias_cases);
    return s;
}

Kappa cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.size() != b.size()) throw LengthMismatch("cohen_kappa: rater vectors differ in length");
    if (a.empty()) throw EmptyInput("cohen_kappa: no ratings");
    const double n = static_cast<double>(a.size());
    std::map<std::string, double> margin_a, margin_b;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        margin_a[a[i]] += 1.0;
        margin_b[b[i]] += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    const double p_o = agree / n;
    double p_e = 0.0;
    for (const auto& [label, count] : margin_a) {
        if (auto it = margin_b.find(label); it != margin_b.end()) p_e += (count / n) * (it->second / n);
    }
    if (p_e >= 1.0) return {p_o >= 1.0 ? 1.0 : 0.0, true};
    return {(p_o - p_e) / (1.0 - p_e), false};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("pearson: vectors differ in length");
    if (x.size() < 2) throw EmptyInput("pearson: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw DegenerateVariance("pearson: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string FrequencyTable::to_csv() const {
    std::string out = "model,bias_id,trials,flagged,frequency,normalized\n";
    for (const auto& c : cells) {
        json row = {c.frequency, c.normalized};
        out += c.model + "," + c.bias_id + "," + std::to_string(c.trials) + "," + std::to_string(c.flagged) + "," +
               row[0].dump() + "," + row[1].dump() + "\n";
    }
    return out;
}

json FrequencyTable::to_json() const {
    json rows = json::array();
    for (const auto& c : cells) {
        rows.push_back({{"model", c.model},
                        {"bias_id", c.bias_id},
                        {"trials", c.trials},
                        {"flagged", c.flagged},
                        {"frequency", c.frequency},
                        {"normalized", c.normalized}});
    }
    return {{"cells", rows}};
}

FrequencyTable bias_frequency(const std::vector<FrequencyRecord>& records,
                              const knowledge::KnowledgeLibrary* library) {
    if (records.empty()) throw EmptyInput("bias_frequency: no records");
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& r : records) {
        auto& [trials, flagged] = counts[{r.bias_id, r.model}];
        ++trials;
        flagged += r.flagged;
    }
    FrequencyTable t;
    double max_freq = 0.0;
    for (const auto& [key, c] : counts) {
        FrequencyCell cell;
        cell.bias_id = key.first;
        cell.model = key.second;
        cell.trials = c.first;
        cell.flagged = c.second;
        cell.frequency = static_cast<double>(c.second) / static_cast<double>(c.first);
        max_freq = std::max(max_freq, cell.frequency);
        t.cells.push_back(std::move(cell));
    }
    for (auto& cell : t.cells) cell.normalized = max_freq > 0.0 ? cell.frequency / max_freq : 0.0;

    auto rank = [&](const std::string& id) {
        const auto* d = library ? library->find(id) : nullptr;
        return d ? std::make_tuple(0, d->catalog_index) : std::make_tuple(1, std::size_t{0});
    };
    std::stable_sort(t.cells.begin(), t.cells.end(), [&](const FrequencyCell& x, const FrequencyCell& y) {
        return std::make_tuple(rank(x.bias_id), x.bias_id, x.model) < std::make_tuple(rank(y.bias_id), y.bias_id, y.model);
    });
    return t;
}

std::string render_report(const json& metrics) {
    std::string out = "# Evaluation report\n\n";
    if (auto it = metrics.find("accuracy"); it != metrics.end() && it->is_object()) {
        const auto& a = *it;
        out += "| Method | Acc (%) | Acc_bias (%) | Acc_nobias (%) |\n|---|---|---|---|\n";
        out += "| " + metrics.value("label", std::string("This run")) + " | " + percent_cell(a.at("acc")) + " | " +
               percent_cell(a.at("acc_bias")) + " | " + percent_cell(a.at("acc_nobias")) + " |\n";
        out += "| " + std::string(kGpt4Baseline.name) + " (published) | " + fixed2(kGpt4Baseline.acc) + " | " +
               fixed2(kGpt4Baseline.acc_bias) + " | " + fixed2(kGpt4Baseline.acc_nobias) + " |\n\n";
        out += "Cases: " + std::to_string(a.value("total", 0)) + " (" + std::to_string(a.value("bias_cases", 0)) +
               " with a bias, " + std::to_string(a.value("nobias_cases", 0)) + " without).\n\n";
    }
    if (auto it = metrics.find("kappa"); it != metrics.end() && it->is_object()) {
        out += "Cohen's kappa: " + fixed4(it->at("value").get<double>());
        if (it->value("degenerate", false)) out += " (degenerate: expected agreement is 1)";
        out += "\n";
    }
    if (auto it = metrics.find("pearson"); it != metrics.end() && it->is_number()) {
        out += "Pearson correlation: " + fixed4(it->get<double>()) + "\n";
    }
    if (auto it = metrics.find("frequency"); it != metrics.end() && it->is_object()) {
        out += "\n| Model | Bias | Trials | Flagged | Frequency | Normalized |\n|---|---|---|---|---|---|\n";
        for (const auto& c : it->at("cells")) {
            out += "| " + c.at("model").get<std::string>() + " | " + c.at("bias_id").get<std::string>() + " | " +
                   std::to_string(c.at("trials").get<std::size_t>()) + " | " +
                   std::to_string(c.at("flagged").get<std::size_t>()) + " | " +
                   fixed4(c.at("frequency").get<double>()) + " | " + fixed4(c.at("normalized").get<double>()) + " |\n";
        }
    }
    return out;
}

}  // namespace mindscope::metrics
