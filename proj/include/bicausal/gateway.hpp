#pragma once
// Model access: prompt assembly, an OpenAI-compatible HTTP client, a replay
// source, and the resumable batch runner that drives any source.

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "bicausal/response.hpp"

namespace bicausal {

inline constexpr std::string_view kDefaultInstruction = "Answer with a single letter among A, B, C, D.";

struct QueryConfig {
    std::string source = "synthetic";  // http | replay | synthetic
    std::string endpoint_url;
    std::string model_name;  // synthetic source falls back to the SCM name
    double temperature = 0.0;
    unsigned max_tokens = 16;
    bool request_logprobs = true;
    unsigned repetitions = 1;
    double timeout_seconds = 60.0;
    unsigned max_retries = 3;
    unsigned retry_backoff_ms = 500;
    unsigned concurrency_limit = 4;
    std::string api_key_env = "OPENAI_API_KEY";
    std::string prompt_version = "v1";
    std::string instruction{kDefaultInstruction};
    std::filesystem::path scm;
    std::filesystem::path replay_file;
};

inline void validate(const QueryConfig& c) {
    if (c.source != "http" && c.source != "replay" && c.source != "synthetic") {
        throw ConfigError("query.source must be http, replay or synthetic, got '" + c.source + "'");
    }
    if (c.max_tokens == 0) throw ConfigError("query.max_tokens must be positive");
    if (c.repetitions == 0) throw ConfigError("query.repetitions must be positive");
    if (c.concurrency_limit == 0) throw ConfigError("query.concurrency_limit must be positive");
    if (!(c.temperature >= 0.0)) throw ConfigError("query.temperature must be >= 0");
    if (!(c.timeout_seconds > 0.0)) throw ConfigError("query.timeout_seconds must be positive");
    if (c.source == "http" && c.endpoint_url.empty()) throw ConfigError("query.endpoint_url is required for http");
    if (c.source == "http" && c.model_name.empty()) throw ConfigError("query.model_name is required for http");
}

// ---------------------------------------------------------------------------
// Prompt

// Repetition 0 shows the dataset order. Later repetitions reshuffle both pair
// members with the same seed so ICE compares like with like.
inline OptionOrder presented_options(const InterventionPair& p, Member m, unsigned repetition) {
    const ScenarioInstance& inst = m == Member::First ? p.first : p.second;
    if (repetition == 0) return inst.options;
    return shuffle_options(rng::derive(p.first.shuffle_seed, static_cast<std::uint64_t>(repetition)));
}

inline std::string build_prompt(const ScenarioInstance& inst, const OptionOrder& options,
                                std::string_view instruction) {
    std::string out = inst.context;
    out += "\n\n";
    out += inst.question;
    out += '\n';
    for (std::size_t i = 0; i < options.size(); ++i) {
        out += letter_at(i);
        out += ". ";
        out += to_string(options[i]);
        out += '\n';
    }
    out += instruction;
    return out;
}

struct QueryRequest {
    std::string pair_id;
    Member member = Member::First;
    unsigned repetition_index = 0;
    const ScenarioInstance* instance = nullptr;
    OptionOrder options{};
    std::string prompt;
};

class ResponseSource {
public:
    virtual ~ResponseSource() = default;
    // Must be safe to call from several threads at once.
    virtual RawResponse query(const QueryRequest& req) = 0;
};

inline RawResponse stub_response(const QueryRequest& req) {
    RawResponse r;
    r.pair_id = req.pair_id;
    r.member = req.member;
    r.repetition_index = req.repetition_index;
    r.instance_id = req.instance ? req.instance->instance_id : std::string{};
    r.options = req.options;
    return r;
}

// ---------------------------------------------------------------------------
// HTTP

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/v1/chat/completions"};
    return {url.substr(0, slash), url.substr(slash)};
}

// Fills completion text and token probabilities from a chat-completions
// payload. Throws ValidationError when the payload is not usable.
inline void read_chat_completion(const Json& body, RawResponse& r) {
    if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
        throw ValidationError("payload has no choices");
    }
    const Json& choice = body["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
        throw ValidationError("choice has no message content");
    }
    r.completion_text = choice["message"]["content"].get<std::string>();
    r.token_probs.reset();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
        choice["logprobs"]["content"].is_array()) {
        std::vector<TokenProb> probs;
        for (const auto& t : choice["logprobs"]["content"]) {
            if (!t.contains("logprob") || !t["logprob"].is_number()) throw ValidationError("token without logprob");
            const double lp = t["logprob"].get<double>();
            if (!(lp <= 0.0)) throw ValidationError("positive log-probability from provider");
            probs.push_back({t.value("token", std::string{}), std::exp(lp)});
        }
        check_token_probs(probs);
        r.token_probs = std::move(probs);
    }
    Json meta = Json::object();
    for (const char* k : {"id", "model", "system_fingerprint", "usage"}) {
        if (body.contains(k)) meta[k] = body[k];
    }
    if (choice.contains("finish_reason")) meta["finish_reason"] = choice["finish_reason"];
    r.provider_metadata = std::move(meta);
}

class HttpSource : public ResponseSource {
public:
    explicit HttpSource(QueryConfig cfg, Logger log = {}) : cfg_(std::move(cfg)), log_(std::move(log)) {
        endpoint_ = split_url(cfg_.endpoint_url);
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
    }

    Json request_body(const QueryRequest& req) const {
        Json body;
        body["model"] = cfg_.model_name;
        body["messages"] = Json::array({Json{{"role", "user"}, {"content", req.prompt}}});
        body["temperature"] = cfg_.temperature;
        body["max_tokens"] = cfg_.max_tokens;
        body["logprobs"] = cfg_.request_logprobs;
        return body;
    }

    RawResponse query(const QueryRequest& req) override {
        RawResponse r = stub_response(req);
        r.model = cfg_.model_name;
        const std::string payload = request_body(req).dump();

        httplib::Client cli(endpoint_.base);
        const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
        cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        if (!api_key_.empty()) cli.set_bearer_token_auth(api_key_);

        const auto t0 = std::chrono::steady_clock::now();
        std::string last_error;
        for (unsigned attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                if (log_) log_(req.pair_id + " " + std::string(to_string(req.member)) + " retry " +
                               std::to_string(attempt) + "/" + std::to_string(cfg_.max_retries) + ": " + last_error);
                const auto wait = static_cast<long long>(cfg_.retry_backoff_ms) << std::min(attempt - 1, 6u);
                std::this_thread::sleep_for(std::chrono::milliseconds(wait));
            }
            r.attempts = attempt + 1;
            auto res = cli.Post(endpoint_.path, payload, "application/json");
            if (!res) {
                last_error = "transport: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            if (res->status != 200) {
                r.ok = false;
                r.error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
                return r;
            }
            try {
                read_chat_completion(Json::parse(res->body), r);
                r.ok = true;
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = std::string("malformed provider payload: ") + e.what();
            }
            return r;
        }
        r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        r.ok = false;
        r.error = "gave up after " + std::to_string(r.attempts) + " attempts: " + last_error;
        return r;
    }

private:
    QueryConfig cfg_;
    Logger log_;
    Endpoint endpoint_;
    std::string api_key_;
};

// ---------------------------------------------------------------------------
// Replay

class ReplaySource : public ResponseSource {
public:
    explicit ReplaySource(const std::vector<RawResponse>& recorded) {
        for (const auto& r : recorded) by_key_[key_of(r)] = r;
    }

    RawResponse query(const QueryRequest& req) override {
        const auto it = by_key_.find({req.pair_id, req.member, req.repetition_index});
        if (it == by_key_.end()) {
            RawResponse r = stub_response(req);
            r.ok = false;
            r.error = "no recorded response";
            return r;
        }
        return it->second;
    }

private:
    std::map<ResponseKey, RawResponse> by_key_;
};

// ---------------------------------------------------------------------------
// Batch runner

struct BatchOptions {
    unsigned repetitions = 1;
    unsigned concurrency_limit = 1;
    std::string instruction{kDefaultInstruction};
    // Final sorted output. A sibling "<output>.journal" receives each response
    // as it arrives; both are read back on restart.
    std::optional<std::filesystem::path> output;
    Logger log;
};

struct BatchResult {
    std::vector<RawResponse> responses;  // sorted by key
    std::size_t issued = 0;              // requests made in this call
    std::size_t reused = 0;              // answers carried over from earlier runs
    std::size_t failed = 0;              // failed keys in the final set
};

inline std::filesystem::path journal_path(const std::filesystem::path& output) {
    auto p = output;
    p += ".journal";
    return p;
}

namespace detail {

// A crash can leave a torn last line in the journal; anything before it is kept.
inline void load_previous(const std::filesystem::path& output, std::map<ResponseKey, RawResponse>& done) {
    if (std::filesystem::exists(output)) {
        for (auto& r : replay_from_file(output)) done[key_of(r)] = std::move(r);
    }
    const auto journal = journal_path(output);
    if (!std::filesystem::exists(journal)) return;
    std::ifstream in(journal, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto r = response_from_json(Json::parse(line));
            done[key_of(r)] = std::move(r);
        } catch (const std::exception&) {
            break;
        }
    }
}

}  // namespace detail

inline BatchResult run_batch(const std::vector<InterventionPair>& pairs, ResponseSource& source,
                             const BatchOptions& opt) {
    if (opt.repetitions == 0) throw ConfigError("repetitions must be positive");
    if (opt.concurrency_limit == 0) throw ConfigError("concurrency_limit must be positive");

    struct Task {
        const InterventionPair* pair;
        Member member;
        unsigned rep;
    };
    std::vector<Task> tasks;
    std::set<ResponseKey> wanted;
    for (const auto& p : pairs) {
        for (unsigned rep = 0; rep < opt.repetitions; ++rep) {
            for (Member m : {Member::First, Member::Second}) {
                if (wanted.insert({p.pair_id, m, rep}).second) tasks.push_back({&p, m, rep});
            }
        }
    }

    std::map<ResponseKey, RawResponse> done;
    if (opt.output) detail::load_previous(*opt.output, done);
    for (auto it = done.begin(); it != done.end();) {
        if (!wanted.count(it->first) || !it->second.ok) {
            it = done.erase(it);
        } else {
            ++it;
        }
    }

    std::vector<Task> todo;
    for (const auto& t : tasks) {
        if (!done.count({t.pair->pair_id, t.member, t.rep})) todo.push_back(t);
    }

    BatchResult result;
    result.reused = done.size();

    std::ofstream journal;
    if (opt.output) {
        if (opt.output->has_parent_path()) std::filesystem::create_directories(opt.output->parent_path());
        journal.open(journal_path(*opt.output), std::ios::binary | std::ios::app);
        if (!journal) throw IoError("cannot open journal for " + opt.output->string());
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::size_t completed = 0;
    const std::size_t total = todo.size();
    const std::size_t step = std::max<std::size_t>(1, total / 10);

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= total) return;
            const Task& t = todo[i];
            const ScenarioInstance& inst = t.member == Member::First ? t.pair->first : t.pair->second;
            QueryRequest req;
            req.pair_id = t.pair->pair_id;
            req.member = t.member;
            req.repetition_index = t.rep;
            req.instance = &inst;
            req.options = presented_options(*t.pair, t.member, t.rep);
            req.prompt = build_prompt(inst, req.options, opt.instruction);
            RawResponse r;
            try {
                r = source.query(req);
            } catch (const std::exception& e) {
                r = stub_response(req);
                r.ok = false;
                r.error = e.what();
            }
            r.pair_id = req.pair_id;
            r.member = req.member;
            r.repetition_index = req.repetition_index;
            r.instance_id = inst.instance_id;

            std::lock_guard lock(mu);
            if (journal.is_open()) {
                journal << to_json(r).dump() << '\n';
                journal.flush();
            }
            ++completed;
            if (opt.log && (completed % step == 0 || completed == total)) {
                opt.log("progress " + std::to_string(completed) + "/" + std::to_string(total));
            }
            done[key_of(r)] = std::move(r);
        }
    };

    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(opt.concurrency_limit, total));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        for (unsigned k = 0; k < n_threads; ++k) threads.emplace_back(worker);
    }
    result.issued = total;

    result.responses.reserve(done.size());
    for (auto& [_, r] : done) {
        if (!r.ok) ++result.failed;
        result.responses.push_back(std::move(r));
    }
    if (opt.output) {
        io::write_file_atomic(*opt.output, responses_to_string(result.responses));
        journal.close();
        std::filesystem::remove(journal_path(*opt.output));
    }
    return result;
}

}  // namespace bicausal
