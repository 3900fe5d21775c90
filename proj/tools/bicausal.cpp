// bicausal: generate -> run -> analyze, plus Monte Carlo simulate.
//
// Exit codes: 0 ok, 1 I/O failure, 2 validation or usage error,
// 3 partial failure (failed trials, empty report cells).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bicausal/analysis.hpp"
#include "bicausal/config.hpp"
#include "bicausal/gateway.hpp"
#include "bicausal/manifest.hpp"
#include "bicausal/synthetic.hpp"
#include "bicausal/template_engine.hpp"

namespace fs = std::filesystem;
using namespace bicausal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitPartial = 3;

void log_line(const std::string& msg) { std::cerr << "[bicausal] " << msg << '\n'; }

// Flag values land in a JSON patch that overrides the config file. Only
// flags given on the command line are applied.
struct Flags {
    Json patch = Json::object();
    std::vector<std::function<void()>> pending;

    template <typename T>
    void bind(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        auto holder = std::make_shared<T>();
        CLI::Option* opt = app->add_option(name, *holder, help);
        pending.push_back([this, opt, key, holder] {
            if (opt->count() > 0) set_flag(patch, key, Json(*holder));
        });
    }

    void bind_flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
        auto holder = std::make_shared<bool>(false);
        app->add_flag(name, *holder, help);
        pending.push_back([this, key, holder] {
            if (*holder) set_flag(patch, key, true);
        });
    }

    void collect() {
        for (auto& f : pending) f();
    }
};

struct Common {
    std::optional<std::string> config;
    std::string out;
    std::vector<std::string> argv;
};

RunManifest start_manifest(const std::string& sub, const Common& c, const AppConfig& cfg) {
    RunManifest m;
    m.subcommand = sub;
    m.arguments = c.argv;
    m.master_seed = cfg.seed;
    m.config = config_to_json(cfg);
    m.config_hash = io::sha256_hex(m.config.dump());
    m.started_at = utc_timestamp();
    return m;
}

void finish_manifest(RunManifest& m, const fs::path& dir, const std::vector<fs::path>& outputs, int code) {
    for (const auto& p : outputs) m.outputs[p.filename().string()] = digest_of(p);
    m.finished_at = utc_timestamp();
    m.exit_code = code;
    write_manifest(dir, m);
}

std::vector<InterventionPair> generate_from(const AppConfig& cfg) {
    if (cfg.generation.templates.empty()) throw ConfigError("generation.templates is not set");
    if (cfg.generation.attributes.empty()) throw ConfigError("generation.attributes is not set");
    GenerationConfig g;
    g.master_seed = cfg.seed;
    g.non_mode = cfg.generation.non_mode;
    g.limit = cfg.generation.limit;
    g.workers = cfg.generation.workers;
    return generate_dataset(load_templates(cfg.generation.templates), load_attribute_registry(cfg.generation.attributes), g);
}

// ---------------------------------------------------------------------------

int cmd_generate(const Common& c, const Flags& f) {
    const AppConfig cfg = resolve_config(c.config, f.patch);
    const fs::path dir = c.out;
    RunManifest m = start_manifest("generate", c, cfg);
    m.inputs["templates"] = {fs::absolute(cfg.generation.templates).lexically_normal().string(), ""};
    if (fs::is_regular_file(cfg.generation.templates)) m.inputs["templates"] = digest_of(cfg.generation.templates);
    if (!cfg.generation.attributes.empty() && fs::exists(cfg.generation.attributes)) {
        m.inputs["attributes"] = digest_of(cfg.generation.attributes);
    }
    const auto pairs = generate_from(cfg);
    const fs::path out = dir / "dataset.jsonl";
    io::write_file_atomic(out, dataset_to_string(pairs));
    finish_manifest(m, dir, {out}, kExitOk);
    log_line("wrote " + std::to_string(pairs.size()) + " pairs to " + out.string());
    return kExitOk;
}

int cmd_run(const Common& c, const Flags& f, const std::string& dataset_path) {
    const AppConfig cfg = resolve_config(c.config, f.patch);
    const fs::path dir = c.out;
    RunManifest m = start_manifest("run", c, cfg);
    m.inputs["dataset"] = digest_of(dataset_path);
    const auto pairs = read_dataset(dataset_path);
    if (pairs.empty()) throw ValidationError("dataset is empty: no data");

    std::unique_ptr<ResponseSource> source;
    const QueryConfig& q = cfg.query;
    if (q.source == "synthetic") {
        if (q.scm.empty()) throw ConfigError("synthetic source needs query.scm (--scm)");
        m.inputs["scm"] = digest_of(q.scm);
        source = std::make_unique<SyntheticSource>(load_scm(q.scm), cfg.seed, q.model_name);
    } else if (q.source == "replay") {
        if (q.replay_file.empty()) throw ConfigError("replay source needs query.replay_file (--file)");
        m.inputs["replay_file"] = digest_of(q.replay_file);
        source = std::make_unique<ReplaySource>(replay_from_file(q.replay_file));
    } else {
        source = std::make_unique<HttpSource>(q, log_line);
    }

    BatchOptions opt;
    opt.repetitions = q.repetitions;
    opt.concurrency_limit = q.concurrency_limit;
    opt.instruction = q.instruction;
    opt.output = dir / "trials.jsonl";
    opt.log = log_line;
    const auto result = run_batch(pairs, *source, opt);
    log_line("responses: " + std::to_string(result.responses.size()) + " (" + std::to_string(result.issued) +
             " requested, " + std::to_string(result.reused) + " reused)");

    int code = kExitOk;
    if (result.failed > 0) {
        code = kExitPartial;
        std::map<std::string, std::size_t> reasons;
        for (const auto& r : result.responses) {
            if (!r.ok) ++reasons[r.error.substr(0, 80)];
        }
        log_line(std::to_string(result.failed) + " trials failed permanently:");
        for (const auto& [why, n] : reasons) log_line("  " + std::to_string(n) + " x " + why);
    }
    finish_manifest(m, dir, {*opt.output}, code);
    return code;
}

int cmd_analyze(const Common& c, const Flags& f, const std::string& trials_path, const std::string& dataset_path) {
    const AppConfig cfg = resolve_config(c.config, f.patch);
    const fs::path dir = c.out;
    RunManifest m = start_manifest("analyze", c, cfg);
    m.inputs["trials"] = digest_of(trials_path);
    m.inputs["dataset"] = digest_of(dataset_path);

    // the run that produced the trials recorded which dataset it used
    if (const auto run_manifest = read_manifest(fs::path(trials_path).parent_path())) {
        const Json& inputs = run_manifest->value("inputs", Json::object());
        if (inputs.contains("dataset")) {
            const std::string want = inputs["dataset"].value("sha256", "");
            if (want != m.inputs["dataset"].sha256) {
                throw ValidationError("dataset digest " + m.inputs["dataset"].sha256 +
                                      " does not match the one recorded for these trials (" + want + ")");
            }
        }
    }

    const auto pairs = read_dataset(dataset_path);
    const auto responses = replay_from_file(trials_path);
    if (responses.empty()) throw ValidationError("no data: trials file is empty");

    const IceTable table = build_ice_table(responses, pairs, cfg.analysis);
    const ReportSet reports = compute_reports(table, cfg.analysis, pairs);
    auto written = emit_report(reports, dir, cfg.formats, log_line);

    std::string classified;
    for (const auto& t : table.trials) classified += to_json(t).dump() + "\n";
    io::write_file_atomic(dir / "classified.jsonl", classified);
    written.push_back(dir / "classified.jsonl");

    int code = kExitOk;
    for (const auto& w : reports.warnings) log_line("warning: " + w);
    if (reports.empty_cells() > 0) {
        log_line(std::to_string(reports.empty_cells()) + " requested cells are empty");
        code = kExitPartial;
    }
    finish_manifest(m, dir, written, code);
    return code;
}

int cmd_simulate(const Common& c, const Flags& f, const std::optional<std::string>& dataset_path) {
    const AppConfig cfg = resolve_config(c.config, f.patch);
    const fs::path dir = c.out;
    if (cfg.simulation.replications == 0) throw ConfigError("replications must be positive");
    if (cfg.simulation.scm.empty()) throw ConfigError("simulation.scm is not set (--scm)");
    RunManifest m = start_manifest("simulate", c, cfg);
    m.inputs["scm"] = digest_of(cfg.simulation.scm);
    const PlantedScm scm = load_scm(cfg.simulation.scm);

    std::vector<InterventionPair> pairs;
    if (dataset_path) {
        m.inputs["dataset"] = digest_of(*dataset_path);
        pairs = read_dataset(*dataset_path);
    } else {
        pairs = generate_from(cfg);
    }
    PowerOptions opt;
    opt.alpha = cfg.analysis.alpha;
    opt.orientation = cfg.analysis.orientation;
    opt.correction = cfg.analysis.correction;
    opt.scopes = cfg.analysis.scopes;
    opt.log = log_line;
    const auto summary = power_trial(scm, pairs, cfg.simulation.n_pairs, cfg.simulation.replications, opt);

    const fs::path json_out = dir / "simulate.json";
    const fs::path md_out = dir / "simulate.md";
    io::write_file_atomic(json_out, to_json(summary).dump(2) + "\n");
    const std::string md = power_markdown(summary);
    io::write_file_atomic(md_out, md);
    std::cout << md;
    finish_manifest(m, dir, {json_out, md_out}, kExitOk);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bias-intervention causal analysis of LLM hallucinations"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    Common common;
    for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);
    Flags flags;
    std::string dataset;
    std::string trials;
    std::optional<std::string> sim_dataset;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config, "experiment config (JSON)");
        sub->add_option("-o,--out", common.out, "output directory")->required();
        flags.bind<std::uint64_t>(sub, "--seed", "seed", "master seed");
    };
    auto add_analysis = [&](CLI::App* sub) {
        flags.bind<double>(sub, "--alpha", "analysis.alpha", "significance level");
        flags.bind<std::string>(sub, "--orientation", "analysis.orientation",
                                "first_minus_second or second_minus_first");
        flags.bind<std::vector<std::string>>(sub, "--scope", "analysis.scopes", "all, unfairness, common (repeatable)");
        flags.bind_flag(sub, "--continuity-correction", "analysis.continuity_correction", "Edwards correction");
    };

    auto* gen = app.add_subcommand("generate", "build the intervention dataset");
    add_common(gen);
    flags.bind<std::string>(gen, "--templates", "generation.templates", "template file or directory");
    flags.bind<std::string>(gen, "--attributes", "generation.attributes", "attribute registry");
    flags.bind<std::string>(gen, "--non-mode", "generation.non_mode", "neutral, stereotyped or both");
    flags.bind<std::size_t>(gen, "--limit", "generation.limit", "stop after this many pairs");
    flags.bind<unsigned>(gen, "--workers", "generation.workers", "parallel template workers");

    auto* run = app.add_subcommand("run", "collect model answers");
    add_common(run);
    run->add_option("-d,--dataset", dataset, "dataset JSONL")->required();
    flags.bind<std::string>(run, "--source", "query.source", "http, replay or synthetic");
    flags.bind<std::string>(run, "--scm", "query.scm", "planted SCM for the synthetic source");
    flags.bind<std::string>(run, "--file", "query.replay_file", "recorded responses for the replay source");
    flags.bind<std::string>(run, "--endpoint", "query.endpoint_url", "chat-completions URL");
    flags.bind<std::string>(run, "--model", "query.model_name", "model name");
    flags.bind<double>(run, "--temperature", "query.temperature", "sampling temperature");
    flags.bind<unsigned>(run, "--max-tokens", "query.max_tokens", "completion token limit");
    flags.bind<unsigned>(run, "--repetitions", "query.repetitions", "answers per instance");
    flags.bind<unsigned>(run, "--concurrency", "query.concurrency_limit", "requests in flight");
    flags.bind<unsigned>(run, "--max-retries", "query.max_retries", "retries on 429/5xx/transport errors");
    flags.bind<double>(run, "--timeout", "query.timeout_seconds", "per-request timeout in seconds");

    auto* ana = app.add_subcommand("analyze", "classify answers and compute reports");
    add_common(ana);
    ana->add_option("-t,--trials", trials, "trials JSONL")->required();
    ana->add_option("-d,--dataset", dataset, "dataset JSONL")->required();
    add_analysis(ana);
    flags.bind_flag(ana, "--majority-vote", "analysis.majority_vote", "collapse repetitions by majority vote");
    flags.bind_flag(ana, "--strict-parse", "analysis.strict_parse", "answers naming several letters are invalid");
    flags.bind<std::vector<std::string>>(ana, "--format", "analysis.formats", "csv, markdown, json (repeatable)");

    auto* sim = app.add_subcommand("simulate", "power and calibration of the causal test");
    add_common(sim);
    sim->add_option("-d,--dataset", sim_dataset, "dataset JSONL (default: generate from config)");
    flags.bind<std::string>(sim, "--scm", "simulation.scm", "planted SCM");
    flags.bind<std::size_t>(sim, "--n-pairs", "simulation.n_pairs", "matched pairs per replication");
    flags.bind<std::size_t>(sim, "--replications", "simulation.replications", "replications (>= 100)");
    add_analysis(sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    flags.collect();
    try {
        if (*gen) return cmd_generate(common, flags);
        if (*run) return cmd_run(common, flags, dataset);
        if (*ana) return cmd_analyze(common, flags, trials, dataset);
        if (*sim) return cmd_simulate(common, flags, sim_dataset);
    } catch (const TemplateRejected& e) {
        log_line("error: template validation failed");
        for (const auto& r : e.reports()) log_line("  " + r.summary());
        return kExitValidation;
    } catch (const IoError& e) {
        log_line(std::string("error: ") + e.what());
        return kExitIo;
    } catch (const Error& e) {
        log_line(std::string("error: ") + e.what());
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        log_line(std::string("error: ") + e.what());
        return kExitIo;
    }
    return kExitValidation;
}
