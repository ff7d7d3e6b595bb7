#include "mindscope/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "mindscope/cbdc.hpp"
#include "mindscope/dqn.hpp"
#include "mindscope/error.hpp"
#include "mindscope/interpreter.hpp"
#include "mindscope/knowledge.hpp"
#include "mindscope/metrics.hpp"
#include "mindscope/optimizers.hpp"
#include "mindscope/scenario.hpp"
#include "mindscope/util.hpp"

namespace mindscope::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json EngineConfig::to_json() const {
    auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(); };
    return {{"backend", backend},
            {"cassette", opt_path(cassette)},
            {"record", opt_path(record)},
            {"library", library.generic_string()},
            {"weights", opt_path(weights)},
            {"seed", seed},
            {"jobs", jobs},
            {"out", out.generic_string()},
            {"session_id", session_id ? json(*session_id) : json()},
            {"shortlist", shortlist ? json(*shortlist) : json()},
            {"http", {{"base_url", http.base_url}, {"model", http.model}, {"timeout_s", http.timeout.count()}}},
            {"memory", {{"k", memory.k}, {"retrieval_depth", memory.retrieval_depth}}},
            {"monitor",
             {{"max_retries", monitor.max_retries},
              {"macro_window", monitor.macro_window},
              {"micro_enabled", monitor.micro_enabled},
              {"macro_enabled", monitor.macro_enabled}}},
            {"dqn", dqn}};
}

std::string EngineConfig::digest() const { return sha256_hex(to_json().dump()); }

EngineConfig config_from_json(const json& j, EngineConfig c) {
    if (!j.is_object()) throw ConfigError("config document must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "backend") c.backend = v.get<std::string>();
            else if (key == "cassette") c.cassette = v.get<std::string>();
            else if (key == "record") c.record = v.get<std::string>();
            else if (key == "library") c.library = v.get<std::string>();
            else if (key == "weights") c.weights = v.get<std::string>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "jobs") c.jobs = v.get<std::size_t>();
            else if (key == "out") c.out = v.get<std::string>();
            else if (key == "session_id") c.session_id = v.get<std::string>();
            else if (key == "shortlist") c.shortlist = v.get<std::size_t>();
            else if (key == "dqn") c.dqn = v;
            else if (key == "http") {
                c.http.base_url = v.value("base_url", c.http.base_url);
                c.http.api_key = v.value("api_key", c.http.api_key);
                c.http.model = v.value("model", c.http.model);
                c.http.timeout = std::chrono::seconds(v.value("timeout_s", c.http.timeout.count()));
            } else if (key == "memory") {
                c.memory.k = v.value("k", c.memory.k);
                c.memory.retrieval_depth = v.value("retrieval_depth", c.memory.retrieval_depth);
            } else if (key == "monitor") {
                c.monitor.max_retries = v.value("max_retries", c.monitor.max_retries);
                c.monitor.macro_window = v.value("macro_window", c.monitor.macro_window);
                c.monitor.micro_enabled = v.value("micro_enabled", c.monitor.micro_enabled);
                c.monitor.macro_enabled = v.value("macro_enabled", c.monitor.macro_enabled);
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

namespace {

/// Raw flag values; unset flags leave the config untouched.
struct CommonFlags {
    std::string config;
    std::string backend;
    std::string cassette;
    std::string record;
    std::string library;
    std::string weights;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string out;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
    cmd.add_option("--config", f.config, "JSON config document");
    cmd.add_option("--backend", f.backend, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
    cmd.add_option("--cassette", f.cassette, "cassette to replay (scripted backend)");
    cmd.add_option("--record", f.record, "write every completion to this cassette");
    cmd.add_option("--library", f.library, "bias knowledge library (JSON Lines)");
    cmd.add_option("--weights", f.weights, "trained decision weights");
    cmd.add_option("--seed", f.seed, "random seed");
    cmd.add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd.add_option("--out", f.out, "output directory");
}

EngineConfig resolve_config(const CommonFlags& f) {
    EngineConfig c;
    if (!f.config.empty()) {
        json doc;
        try {
            doc = json::parse(read_file(f.config));
        } catch (const json::parse_error& e) {
            throw SyntaxError(f.config + ": " + e.what());
        }
        c = config_from_json(doc, c);
    }
    if (const char* url = std::getenv("MINDSCOPE_BASE_URL"); url && *url) c.http.base_url = url;
    if (const char* key = std::getenv("MINDSCOPE_API_KEY"); key && *key) c.http.api_key = key;
    if (!f.backend.empty()) c.backend = f.backend;
    if (!f.cassette.empty()) c.cassette = f.cassette;
    if (!f.record.empty()) c.record = f.record;
    if (!f.library.empty()) c.library = f.library;
    if (!f.weights.empty()) c.weights = f.weights;
    if (f.seed) c.seed = *f.seed;
    if (f.jobs) c.jobs = *f.jobs;
    if (!f.out.empty()) c.out = f.out;
    if (c.backend != "scripted" && c.backend != "http") throw ConfigError("backend must be scripted or http");
    if (c.jobs == 0) throw ConfigError("jobs must be >= 1");
    c.memory.validate();
    c.monitor.validate();
    return c;
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

/// Owns the backend stack for one run and saves the recording on exit.
class BackendStack {
public:
    explicit BackendStack(const EngineConfig& c) : record_(c.record) {
        if (c.backend == "scripted") {
            if (!c.cassette) throw ConfigError("the scripted backend needs --cassette");
            require_file(*c.cassette, "cassette");
            base_ = std::make_unique<llm::ScriptedBackend>(llm::Cassette::load(*c.cassette));
        } else {
            base_ = std::make_unique<llm::HttpBackend>(c.http);
        }
        if (record_) recorder_ = std::make_unique<llm::RecordingBackend>(*base_);
    }
    ~BackendStack() { save(); }

    llm::Backend& backend() { return recorder_ ? static_cast<llm::Backend&>(*recorder_) : *base_; }

    void save() {
        if (recorder_ && !saved_) {
            saved_ = true;
            recorder_->cassette().save(*record_);
        }
    }

private:
    std::optional<fs::path> record_;
    std::unique_ptr<llm::Backend> base_;
    std::unique_ptr<llm::RecordingBackend> recorder_;
    bool saved_ = false;
};

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

void write_manifest(const EngineConfig& c, const std::string& command, const std::vector<std::string>& args,
                    const std::vector<fs::path>& inputs) {
    json digests = json::object();
    for (const auto& p : inputs)
        if (fs::is_regular_file(p)) digests[p.generic_string()] = sha256_hex(read_file(p));
    write_json(c.out / "manifest.json", {{"command", command},
                                         {"args", json(std::vector<std::string>(args.begin() + 1, args.end()))},
                                         {"config", c.to_json()},
                                         {"config_digest", c.digest()},
                                         {"seeds", {{"seed", c.seed}}},
                                         {"engine_version", kEngineVersion},
                                         {"inputs", digests}});
}

std::vector<json> read_jsonl(const fs::path& p) {
    require_file(p, "input");
    std::vector<json> rows;
    for_each_json_line(p, [&](std::size_t, const json& j) { rows.push_back(j); });
    return rows;
}

int cmd_validate_script(const EngineConfig& c, const std::string& script_path, std::ostream& out) {
    require_file(script_path, "script");
    std::vector<scenario::Violation> violations;
    try {
        violations = scenario::validate_script(scenario::parse_script_structure(read_file(script_path)));
    } catch (const SchemaError& e) {
        violations.push_back({scenario::ViolationKind::Schema, std::nullopt, "", e.what()});
    }
    json list = json::array();
    for (const auto& v : violations) list.push_back(scenario::to_json(v));
    const json report = {{"script", script_path}, {"violations", list}};
    write_json(c.out / "violations.json", report);
    out << report.dump(2) << "\n";
    return violations.empty() ? 0 : 1;
}

int cmd_run_scenario(const EngineConfig& c, const std::string& script_path, std::ostream& out) {
    require_file(script_path, "script");
    const auto script = scenario::parse_script(read_file(script_path));
    BackendStack stack(c);
    interp::SessionConfig sc;
    sc.seed = c.seed;
    sc.session_id = c.session_id.value_or("");
    sc.memory = c.memory;
    sc.monitor = c.monitor;
    llm::CallLog log;
    fs::create_directories(c.out);
    const fs::path transcript_path = c.out / "transcript.jsonl";
    std::ofstream sink(transcript_path, std::ios::binary);
    if (!sink) throw IoError("cannot write " + transcript_path.string());
    try {
        interp::run_session(script, stack.backend(), sc, &sink, &log);
    } catch (...) {
        sink.close();
        write_json(c.out / "calls.json", log.to_json());
        stack.save();
        throw;
    }
    sink.close();
    write_json(c.out / "calls.json", log.to_json());
    stack.save();
    out << transcript_path.generic_string() << "\n";
    return 0;
}

decision::WeightVector load_weights(const EngineConfig& c) {
    if (!c.weights) return decision::WeightVector::uniform();
    require_file(*c.weights, "weights");
    return decision::TrainedDecision::load(*c.weights).weights;
}

int cmd_detect(const EngineConfig& c, const std::string& input_path, std::ostream& out) {
    require_file(input_path, "input");
    require_file(c.library, "library");
    const auto library = knowledge::KnowledgeLibrary::load(c.library);
    const auto input = cbdc::load_detection_input(input_path);
    cbdc::DetectConfig dc;
    dc.session_id = c.session_id.value_or(fs::path(input_path).stem().string());
    dc.weights = load_weights(c);
    dc.shortlist = c.shortlist;
    dc.jobs = c.jobs;
    BackendStack stack(c);
    const fs::path report_path = c.out / "report.json";
    try {
        const auto report = cbdc::detect(stack.backend(), library, input, dc);
        write_file(report_path, report.serialize());
        out << "verdict: " << *report.verdict << "\n";
    } catch (const cbdc::DetectionFailure& e) {
        write_file(report_path, e.partial().serialize());
        stack.save();
        throw;
    }
    stack.save();
    return 0;
}

struct TrainFlags {
    std::string data;
    std::size_t synthesize = 0;
    double noise = 0.5;
    std::string algo = "dqn";
    double holdout = 0.0;
};

int cmd_train(const EngineConfig& c, const TrainFlags& t, std::ostream& out) {
    std::vector<decision::MatchSample> samples;
    if (t.synthesize > 0) {
        decision::SyntheticSpec spec;
        spec.count = t.synthesize;
        spec.noise_sigma = t.noise;
        samples = decision::generate_synthetic(spec, c.seed);
        write_file(c.out / "dataset.jsonl", decision::dataset_to_jsonl(samples));
    } else {
        require_file(t.data, "dataset");
        samples = decision::load_dataset(t.data);
    }
    if (!(t.holdout >= 0.0 && t.holdout < 1.0)) throw ConfigError("holdout must lie in [0, 1)");
    const auto n_test = static_cast<std::size_t>(static_cast<double>(samples.size()) * t.holdout);
    std::vector<decision::MatchSample> train(samples.begin(), samples.end() - static_cast<std::ptrdiff_t>(n_test));
    std::vector<decision::MatchSample> test(samples.end() - static_cast<std::ptrdiff_t>(n_test), samples.end());
    if (train.empty()) throw EmptyInput("no training samples");

    decision::TrainedDecision trained;
    if (to_lower(t.algo) == "dqn") {
        trained = decision::dqn_train(train, decision::dqn_hyperparams_from_json(c.dqn), c.seed);
    } else {
        trained = decision::baseline_optimize(decision::parse_baseline(t.algo), train, {}, c.seed);
    }
    write_json(c.out / "weights.json", trained.to_json());
    json summary = {{"algorithm", trained.algorithm},
                    {"train_samples", train.size()},
                    {"train_accuracy", trained.train_accuracy},
                    {"weights", decision::to_json(trained.weights)}};
    if (!test.empty()) {
        summary["holdout_samples"] = test.size();
        summary["holdout_accuracy"] = decision::decision_accuracy(trained.weights, test);
    }
    write_json(c.out / "training.json", summary);
    out << summary.dump(2) << "\n";
    return 0;
}

struct EvalFlags {
    std::string outcomes;
    std::string agreement;
    std::string scores;
    std::string cases;
    std::string label;
};

int cmd_evaluate(const EngineConfig& c, const EvalFlags& e, std::ostream& out) {
    if (e.outcomes.empty() && e.agreement.empty() && e.scores.empty() && e.cases.empty())
        throw UsageError("evaluate needs --outcomes, --agreement, --scores or --cases");
    json metrics = json::object();
    if (!e.label.empty()) metrics["label"] = e.label;
    try {
        if (!e.outcomes.empty()) {
            std::vector<metrics::LabeledOutcome> rows;
            for (const auto& j : read_jsonl(e.outcomes))
                rows.push_back({j.at("predicted").get<std::string>(), j.at("truth").get<std::string>()});
            metrics["accuracy"] = metrics::accuracy_suite(rows).to_json();
        }
        if (!e.agreement.empty()) {
            std::vector<std::string> a, b;
            for (const auto& j : read_jsonl(e.agreement)) {
                a.push_back(j.at("a").get<std::string>());
                b.push_back(j.at("b").get<std::string>());
            }
            const auto k = metrics::cohen_kappa(a, b);
            metrics["kappa"] = {{"value", k.value}, {"degenerate", k.degenerate}, {"n", a.size()}};
        }
        if (!e.scores.empty()) {
            std::vector<double> x, y;
            for (const auto& j : read_jsonl(e.scores)) {
                x.push_back(j.at("x").get<double>());
                y.push_back(j.at("y").get<double>());
            }
            metrics["pearson"] = metrics::pearson(x, y);
        }
    } catch (const json::exception& ex) {
        throw SchemaError(std::string("bad evaluation record: ") + ex.what());
    }
    if (!e.cases.empty()) {
        require_file(e.cases, "cases");
        std::vector<metrics::FrequencyRecord> records;
        for (const auto& sc : scenario::load_static_cases(e.cases)) {
            if (!sc.presence_of_bias) continue;  // unjudged
            records.push_back({sc.model, sc.evaluation_tag, *sc.presence_of_bias});
        }
        std::optional<knowledge::KnowledgeLibrary> library;
        if (fs::is_regular_file(c.library)) library = knowledge::KnowledgeLibrary::load(c.library);
        const auto table = metrics::bias_frequency(records, library ? &*library : nullptr);
        metrics["frequency"] = table.to_json();
        write_file(c.out / "frequency.csv", table.to_csv());
        write_json(c.out / "frequency.json", table.to_json());
    }
    write_json(c.out / "metrics.json", metrics);
    out << metrics.dump(2) << "\n";
    return 0;
}

int cmd_report(const EngineConfig& c, const std::string& metrics_path, std::ostream& out) {
    require_file(metrics_path, "metrics");
    json metrics;
    try {
        metrics = json::parse(read_file(metrics_path));
    } catch (const json::parse_error& e) {
        throw SyntaxError(metrics_path + ": " + e.what());
    }
    const std::string text = metrics::render_report(metrics);
    write_file(c.out / "report.md", text);
    out << text;
    return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Scenario-driven cognitive bias generation and detection"};
    app.require_subcommand(1);
    CommonFlags flags;

    std::string script_path;
    auto* validate = app.add_subcommand("validate-script", "check a scenario script");
    validate->add_option("script", script_path, "scenario script (JSON)")->required();
    add_common(*validate, flags);

    std::string session_id;
    auto* run = app.add_subcommand("run-scenario", "run a scenario script into a transcript");
    run->add_option("script", script_path, "scenario script (JSON)")->required();
    run->add_option("--session-id", session_id, "session id (default session-<seed>)");
    add_common(*run, flags);

    std::string input_path;
    std::optional<std::size_t> shortlist;
    auto* det = app.add_subcommand("detect", "detect the cognitive bias in a text or transcript");
    det->add_option("--input", input_path, "text or transcript file")->required();
    det->add_option("--shortlist", shortlist, "screen against the top-k search hits only")
        ->check(CLI::PositiveNumber);
    det->add_option("--session-id", session_id, "session id (default: input file stem)");
    add_common(*det, flags);

    TrainFlags train;
    auto* tr = app.add_subcommand("train-decision", "learn decision weights");
    auto* data_opt = tr->add_option("--data", train.data, "labeled match dataset (JSON Lines)");
    auto* synth_opt = tr->add_option("--synthesize", train.synthesize, "generate N synthetic matches instead");
    data_opt->excludes(synth_opt);
    tr->add_option("--noise", train.noise, "score noise sigma for --synthesize")->check(CLI::NonNegativeNumber);
    tr->add_option("--algo", train.algo, "dqn, ga, saa or aco")
        ->check(CLI::IsMember({"dqn", "ga", "saa", "aco"}, CLI::ignore_case));
    tr->add_option("--holdout", train.holdout, "fraction of samples held out for testing");
    add_common(*tr, flags);

    EvalFlags eval;
    auto* ev = app.add_subcommand("evaluate", "compute accuracy, agreement and frequency metrics");
    ev->add_option("--outcomes", eval.outcomes, "JSON Lines of {predicted, truth}");
    ev->add_option("--agreement", eval.agreement, "JSON Lines of {a, b} categorical ratings");
    ev->add_option("--scores", eval.scores, "JSON Lines of {x, y} paired scores");
    ev->add_option("--cases", eval.cases, "judged static cases for the frequency table");
    ev->add_option("--label", eval.label, "row label in rendered reports");
    add_common(*ev, flags);

    std::string metrics_path;
    auto* rep = app.add_subcommand("report", "render a metrics file as a markdown table");
    rep->add_option("metrics", metrics_path, "metrics.json from evaluate")->required();
    add_common(*rep, flags);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::UsageError);
    }

    CLI::App* cmd = app.get_subcommands().front();
    const std::string command = cmd->get_name();
    try {
        if (command == "train-decision" && train.data.empty() && train.synthesize == 0)
            throw UsageError("train-decision needs --data or --synthesize");
        EngineConfig c = resolve_config(flags);
        if (!session_id.empty()) c.session_id = session_id;
        if (shortlist) c.shortlist = shortlist;
        fs::create_directories(c.out);

        std::vector<fs::path> inputs;
        for (const auto* p : {&script_path, &input_path, &train.data, &eval.outcomes, &eval.agreement, &eval.scores,
                              &eval.cases, &metrics_path, &flags.config})
            if (!p->empty()) inputs.emplace_back(*p);
        if (c.cassette) inputs.push_back(*c.cassette);
        if (c.weights) inputs.push_back(*c.weights);
        if (command == "detect" || command == "evaluate") inputs.push_back(c.library);
        write_manifest(c, command, args, inputs);

        if (command == "validate-script") return cmd_validate_script(c, script_path, out);
        if (command == "run-scenario") return cmd_run_scenario(c, script_path, out);
        if (command == "detect") return cmd_detect(c, input_path, out);
        if (command == "train-decision") return cmd_train(c, train, out);
        if (command == "evaluate") return cmd_evaluate(c, eval, out);
        return cmd_report(c, metrics_path, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::UsageError);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::DomainError);
    }
}

}  // namespace mindscope::cli
