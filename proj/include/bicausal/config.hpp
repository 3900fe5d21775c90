#pragma once
// Experiment configuration: built-in defaults, a JSON file, and command-line
// overrides, merged in that order of increasing precedence.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bicausal/analysis.hpp"
#include "bicausal/gateway.hpp"
#include "bicausal/io.hpp"
#include "bicausal/template_engine.hpp"

namespace bicausal {

struct GenerationSection {
    std::filesystem::path templates;
    std::filesystem::path attributes;
    NonMode non_mode = NonMode::Neutral;
    std::optional<std::size_t> limit;
    unsigned workers = 1;
};

struct SimulationSection {
    std::filesystem::path scm;
    std::size_t n_pairs = 500;
    std::size_t replications = 1000;
};

struct AppConfig {
    std::uint64_t seed = 0;
    GenerationSection generation;
    QueryConfig query;
    AnalysisConfig analysis;
    std::vector<Format> formats{Format::Csv, Format::Markdown, Format::Json};
    SimulationSection simulation;
};

// Keys holding file paths. Relative values are resolved against the config
// file's directory (file) or the working directory (flags).
inline const std::vector<std::string> kPathKeys{"generation.templates", "generation.attributes", "query.scm",
                                                "query.replay_file", "simulation.scm"};

inline Json default_config_json() {
    const AppConfig d;
    Json j;
    j["seed"] = d.seed;
    j["generation"] = {{"templates", ""},
                       {"attributes", ""},
                       {"non_mode", to_string(d.generation.non_mode)},
                       {"limit", nullptr},
                       {"workers", d.generation.workers}};
    const QueryConfig& q = d.query;
    j["query"] = {{"source", q.source},
                  {"endpoint_url", q.endpoint_url},
                  {"model_name", q.model_name},
                  {"temperature", q.temperature},
                  {"max_tokens", q.max_tokens},
                  {"request_logprobs", q.request_logprobs},
                  {"repetitions", q.repetitions},
                  {"timeout_seconds", q.timeout_seconds},
                  {"max_retries", q.max_retries},
                  {"retry_backoff_ms", q.retry_backoff_ms},
                  {"concurrency_limit", q.concurrency_limit},
                  {"api_key_env", q.api_key_env},
                  {"prompt_version", q.prompt_version},
                  {"instruction", q.instruction},
                  {"scm", ""},
                  {"replay_file", ""}};
    Json scopes = Json::array();
    for (Scope s : d.analysis.scopes) scopes.push_back(to_string(s));
    j["analysis"] = {{"alpha", d.analysis.alpha},
                     {"scopes", scopes},
                     {"orientation", to_string(d.analysis.orientation)},
                     {"continuity_correction", false},
                     {"majority_vote", d.analysis.majority_vote},
                     {"strict_parse", d.analysis.strict_parse},
                     {"formats", Json::array({"csv", "markdown", "json"})}};
    j["simulation"] = {{"scm", ""}, {"n_pairs", d.simulation.n_pairs}, {"replications", d.simulation.replications}};
    return j;
}

namespace detail {

inline void check_keys(const Json& patch, const Json& schema, const std::string& prefix) {
    if (!patch.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [k, v] : patch.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (!schema.contains(k)) throw ConfigError("unknown config key '" + key + "'");
        if (schema[k].is_object()) check_keys(v, schema[k], key);
    }
}

inline Json* at_path(Json& j, const std::string& dotted) {
    Json* cur = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!cur->is_object() || !cur->contains(part)) return nullptr;
        cur = &(*cur)[part];
        if (dot == std::string::npos) return cur;
        start = dot + 1;
    }
}

inline void resolve_paths(Json& patch, const std::filesystem::path& base) {
    for (const auto& key : kPathKeys) {
        Json* v = at_path(patch, key);
        if (!v || !v->is_string() || v->get<std::string>().empty()) continue;
        std::filesystem::path p = v->get<std::string>();
        if (p.is_relative()) p = base / p;
        *v = p.lexically_normal().string();
    }
}

template <typename T>
T get_as(const Json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

}  // namespace detail

// Recursive object merge; non-object values in `patch` replace `base`.
inline void merge_config(Json& base, const Json& patch) {
    for (const auto& [k, v] : patch.items()) {
        if (v.is_object() && base.contains(k) && base[k].is_object()) {
            merge_config(base[k], v);
        } else {
            base[k] = v;
        }
    }
}

inline Json read_config_file(const std::filesystem::path& path) {
    Json j;
    try {
        j = io::read_json_file(path);
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    detail::check_keys(j, default_config_json(), "");
    detail::resolve_paths(j, std::filesystem::absolute(path).parent_path());
    return j;
}

// Sets a dotted key in a flag patch, e.g. set_flag(p, "query.repetitions", 3).
inline void set_flag(Json& patch, const std::string& dotted, Json value) {
    Json* cur = &patch;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*cur)[part] = std::move(value);
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

inline AppConfig config_from_json(const Json& j) {
    detail::check_keys(j, default_config_json(), "");
    Json full = default_config_json();
    merge_config(full, j);

    AppConfig c;
    using detail::get_as;
    const auto seed = full["seed"];
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
        throw ConfigError("seed must be a non-negative integer");
    }
    c.seed = seed.get<std::uint64_t>();

    const Json& g = full["generation"];
    c.generation.templates = get_as<std::string>(g["templates"], "generation.templates");
    c.generation.attributes = get_as<std::string>(g["attributes"], "generation.attributes");
    try {
        c.generation.non_mode = parse_non_mode(get_as<std::string>(g["non_mode"], "generation.non_mode"));
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    if (!g["limit"].is_null()) {
        const auto lim = get_as<long long>(g["limit"], "generation.limit");
        if (lim < 0) throw ConfigError("generation.limit must be >= 0");
        c.generation.limit = static_cast<std::size_t>(lim);
    }
    const auto workers = get_as<long long>(g["workers"], "generation.workers");
    if (workers < 1) throw ConfigError("generation.workers must be positive");
    c.generation.workers = static_cast<unsigned>(workers);

    const Json& q = full["query"];
    auto positive = [](const Json& v, const std::string& key, long long min) {
        const auto x = get_as<long long>(v, key);
        if (x < min) throw ConfigError(key + " must be >= " + std::to_string(min));
        return static_cast<unsigned>(x);
    };
    c.query.source = get_as<std::string>(q["source"], "query.source");
    c.query.endpoint_url = get_as<std::string>(q["endpoint_url"], "query.endpoint_url");
    c.query.model_name = get_as<std::string>(q["model_name"], "query.model_name");
    c.query.temperature = get_as<double>(q["temperature"], "query.temperature");
    c.query.max_tokens = positive(q["max_tokens"], "query.max_tokens", 1);
    c.query.request_logprobs = get_as<bool>(q["request_logprobs"], "query.request_logprobs");
    c.query.repetitions = positive(q["repetitions"], "query.repetitions", 1);
    c.query.timeout_seconds = get_as<double>(q["timeout_seconds"], "query.timeout_seconds");
    c.query.max_retries = positive(q["max_retries"], "query.max_retries", 0);
    c.query.retry_backoff_ms = positive(q["retry_backoff_ms"], "query.retry_backoff_ms", 0);
    c.query.concurrency_limit = positive(q["concurrency_limit"], "query.concurrency_limit", 1);
    c.query.api_key_env = get_as<std::string>(q["api_key_env"], "query.api_key_env");
    c.query.prompt_version = get_as<std::string>(q["prompt_version"], "query.prompt_version");
    c.query.instruction = get_as<std::string>(q["instruction"], "query.instruction");
    c.query.scm = get_as<std::string>(q["scm"], "query.scm");
    c.query.replay_file = get_as<std::string>(q["replay_file"], "query.replay_file");
    validate(c.query);

    const Json& a = full["analysis"];
    c.analysis.alpha = get_as<double>(a["alpha"], "analysis.alpha");
    check_alpha(c.analysis.alpha);
    c.analysis.scopes.clear();
    for (const auto& s : a["scopes"]) c.analysis.scopes.push_back(parse_scope(get_as<std::string>(s, "analysis.scopes")));
    if (c.analysis.scopes.empty()) throw ConfigError("analysis.scopes must not be empty");
    c.analysis.orientation = parse_orientation(get_as<std::string>(a["orientation"], "analysis.orientation"));
    c.analysis.correction =
        get_as<bool>(a["continuity_correction"], "analysis.continuity_correction") ? Correction::Edwards : Correction::None;
    c.analysis.majority_vote = get_as<bool>(a["majority_vote"], "analysis.majority_vote");
    c.analysis.strict_parse = get_as<bool>(a["strict_parse"], "analysis.strict_parse");
    c.formats = parse_formats(get_as<std::vector<std::string>>(a["formats"], "analysis.formats"));

    const Json& s = full["simulation"];
    c.simulation.scm = get_as<std::string>(s["scm"], "simulation.scm");
    c.simulation.n_pairs = get_as<std::size_t>(s["n_pairs"], "simulation.n_pairs");
    c.simulation.replications = get_as<std::size_t>(s["replications"], "simulation.replications");
    return c;
}

inline Json config_to_json(const AppConfig& c) {
    Json j = default_config_json();
    j["seed"] = c.seed;
    j["generation"]["templates"] = c.generation.templates.string();
    j["generation"]["attributes"] = c.generation.attributes.string();
    j["generation"]["non_mode"] = to_string(c.generation.non_mode);
    j["generation"]["limit"] = c.generation.limit ? Json(*c.generation.limit) : Json(nullptr);
    j["generation"]["workers"] = c.generation.workers;
    Json& q = j["query"];
    q["source"] = c.query.source;
    q["endpoint_url"] = c.query.endpoint_url;
    q["model_name"] = c.query.model_name;
    q["temperature"] = c.query.temperature;
    q["max_tokens"] = c.query.max_tokens;
    q["request_logprobs"] = c.query.request_logprobs;
    q["repetitions"] = c.query.repetitions;
    q["timeout_seconds"] = c.query.timeout_seconds;
    q["max_retries"] = c.query.max_retries;
    q["retry_backoff_ms"] = c.query.retry_backoff_ms;
    q["concurrency_limit"] = c.query.concurrency_limit;
    q["api_key_env"] = c.query.api_key_env;
    q["prompt_version"] = c.query.prompt_version;
    q["instruction"] = c.query.instruction;
    q["scm"] = c.query.scm.string();
    q["replay_file"] = c.query.replay_file.string();
    Json& a = j["analysis"];
    a["alpha"] = c.analysis.alpha;
    a["scopes"] = Json::array();
    for (Scope s : c.analysis.scopes) a["scopes"].push_back(to_string(s));
    a["orientation"] = to_string(c.analysis.orientation);
    a["continuity_correction"] = c.analysis.correction == Correction::Edwards;
    a["majority_vote"] = c.analysis.majority_vote;
    a["strict_parse"] = c.analysis.strict_parse;
    a["formats"] = Json::array();
    for (Format f : c.formats) {
        a["formats"].push_back(f == Format::Csv ? "csv" : f == Format::Markdown ? "markdown" : "json");
    }
    j["simulation"]["scm"] = c.simulation.scm.string();
    j["simulation"]["n_pairs"] = c.simulation.n_pairs;
    j["simulation"]["replications"] = c.simulation.replications;
    return j;
}

// defaults <- file <- flags. Flag paths are taken relative to the working
// directory.
inline AppConfig resolve_config(const std::optional<std::filesystem::path>& file, Json flags = Json::object()) {
    Json merged = default_config_json();
    if (file) merge_config(merged, read_config_file(*file));
    detail::check_keys(flags, default_config_json(), "");
    detail::resolve_paths(flags, std::filesystem::current_path());
    merge_config(merged, flags);
    return config_from_json(merged);
}

}  // namespace bicausal
