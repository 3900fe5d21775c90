#pragma once
// One recorded model answer and its JSONL form.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bicausal/io.hpp"
#include "bicausal/template_engine.hpp"

namespace bicausal {

using Logger = std::function<void(const std::string&)>;

enum class Member : std::uint8_t { First, Second };

constexpr std::string_view to_string(Member m) noexcept { return m == Member::First ? "first" : "second"; }

inline Member parse_member(std::string_view s) {
    if (s == "first") return Member::First;
    if (s == "second") return Member::Second;
    throw ValidationError("member must be 'first' or 'second', got '" + std::string(s) + "'");
}

struct TokenProb {
    std::string token;
    double prob = 1.0;

    friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

struct RawResponse {
    std::string pair_id;
    Member member = Member::First;
    unsigned repetition_index = 0;
    std::string instance_id;
    std::string model;
    bool ok = true;  // false: transport or provider failure, not an answer
    std::string completion_text;
    std::optional<std::vector<TokenProb>> token_probs;
    OptionOrder options{};  // order actually presented
    double latency_ms = 0.0;
    unsigned attempts = 1;
    Json provider_metadata = Json::object();
    std::string error;

    friend bool operator==(const RawResponse&, const RawResponse&) = default;
};

// Responses are keyed by (pair_id, member, repetition_index).
struct ResponseKey {
    std::string pair_id;
    Member member = Member::First;
    unsigned repetition_index = 0;

    auto tie() const { return std::tie(pair_id, repetition_index, member); }
    friend bool operator<(const ResponseKey& a, const ResponseKey& b) { return a.tie() < b.tie(); }
    friend bool operator==(const ResponseKey&, const ResponseKey&) = default;
};

inline ResponseKey key_of(const RawResponse& r) { return {r.pair_id, r.member, r.repetition_index}; }

inline void check_token_probs(const std::vector<TokenProb>& probs) {
    for (const auto& t : probs) {
        if (!(t.prob > 0.0 && t.prob <= 1.0)) {
            throw ValidationError("token probability outside (0,1]: " + io::format_double(t.prob));
        }
    }
}

inline Json to_json(const RawResponse& r) {
    Json j;
    j["pair_id"] = r.pair_id;
    j["member"] = to_string(r.member);
    j["repetition_index"] = r.repetition_index;
    j["instance_id"] = r.instance_id;
    j["model"] = r.model;
    j["status"] = r.ok ? "ok" : "failed";
    j["completion_text"] = r.completion_text;
    if (r.token_probs) {
        Json arr = Json::array();
        for (const auto& t : *r.token_probs) arr.push_back(Json::array({t.token, t.prob}));
        j["token_probs"] = std::move(arr);
    } else {
        j["token_probs"] = nullptr;
    }
    std::string opts;
    for (Person p : r.options) opts.push_back(static_cast<char>('A' + static_cast<int>(p)));
    j["options"] = opts;
    j["latency_ms"] = r.latency_ms;
    j["attempts"] = r.attempts;
    j["provider_metadata"] = r.provider_metadata;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

// Options are stored compactly: "CADB" means option A is Person-C, etc.
inline OptionOrder parse_option_string(std::string_view s) {
    if (s.size() != 4) throw ValidationError("options must list four persons");
    OptionOrder out{};
    unsigned seen = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const char ch = s[i];
        if (ch < 'A' || ch > 'D') throw ValidationError("bad option person '" + std::string(1, ch) + "'");
        const unsigned bit = 1u << (ch - 'A');
        if (seen & bit) throw ValidationError("options repeat a person");
        seen |= bit;
        out[i] = static_cast<Person>(ch - 'A');
    }
    return out;
}

inline RawResponse response_from_json(const Json& j) {
    try {
        if (!j.is_object()) throw ValidationError("response must be an object");
        for (const char* field : {"pair_id", "member", "repetition_index", "instance_id", "completion_text"}) {
            if (!j.contains(field)) throw ValidationError(std::string("missing ") + field);
        }
        RawResponse r;
        r.pair_id = j.at("pair_id").get<std::string>();
        r.member = parse_member(j.at("member").get<std::string>());
        const auto rep = j.at("repetition_index").get<long long>();
        if (rep < 0) throw ValidationError("negative repetition_index");
        r.repetition_index = static_cast<unsigned>(rep);
        r.instance_id = j.at("instance_id").get<std::string>();
        if (r.instance_id.empty()) throw ValidationError("empty instance_id");
        r.model = j.value("model", std::string{});
        const std::string status = j.value("status", std::string("ok"));
        if (status != "ok" && status != "failed") throw ValidationError("status must be ok or failed");
        r.ok = status == "ok";
        r.completion_text = j.at("completion_text").get<std::string>();
        if (j.contains("token_probs") && !j.at("token_probs").is_null()) {
            std::vector<TokenProb> probs;
            for (const auto& t : j.at("token_probs")) {
                if (!t.is_array() || t.size() != 2) throw ValidationError("token_probs entries are [token, p]");
                probs.push_back({t[0].get<std::string>(), t[1].get<double>()});
            }
            check_token_probs(probs);
            r.token_probs = std::move(probs);
        }
        r.options = parse_option_string(j.value("options", std::string("ABCD")));
        r.latency_ms = j.value("latency_ms", 0.0);
        r.attempts = j.value("attempts", 1u);
        if (j.contains("provider_metadata")) r.provider_metadata = j.at("provider_metadata");
        r.error = j.value("error", std::string{});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad response record: ") + e.what());
    }
}

// File order is preserved. Any schema violation names its line.
inline std::vector<RawResponse> replay_from_file(const std::filesystem::path& path) {
    std::vector<RawResponse> out;
    io::for_each_jsonl(path, [&](std::size_t line, const Json& j) {
        try {
            out.push_back(response_from_json(j));
        } catch (const ValidationError& e) {
            throw ParseError(line, e.what());
        }
    });
    return out;
}

inline std::string responses_to_string(const std::vector<RawResponse>& rs) {
    std::string out;
    for (const auto& r : rs) {
        out += to_json(r).dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace bicausal
