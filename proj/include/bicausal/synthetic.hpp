#pragma once
// Planted structural causal model used as a simulated respondent, and the
// Monte Carlo power / calibration harness built on it.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>

#include "bicausal/analysis.hpp"
#include "bicausal/classifier.hpp"
#include "bicausal/gateway.hpp"
#include "bicausal/rng.hpp"

namespace bicausal {

struct ConfidenceProfile {
    double mean = 0.5;
    double spread = 0.0;  // draws are uniform on mean +/- spread, clipped to (0,1]

    friend bool operator==(const ConfidenceProfile&, const ConfidenceProfile&) = default;
};

inline std::map<Outcome, ConfidenceProfile> default_confidence_profile() {
    return {{Outcome::Correct, {0.9, 0.05}},
            {Outcome::UnfairnessHallucination, {0.8, 0.05}},
            {Outcome::CommonHallucination, {0.6, 0.1}}};
}

struct PlantedScm {
    std::string name = "planted";
    std::optional<std::uint64_t> seed;
    std::array<double, 3> p_halluc{0.0, 0.0, 0.0};  // indexed by BiasState
    double p_unfair_given_halluc = 0.5;
    // per-state override of p_unfair_given_halluc (Pro, Anti); Non is ignored
    std::array<std::optional<double>, 3> p_unfair_by_state{};
    // probability that both members of a pair share one latent draw
    double rho = 0.0;
    std::map<Outcome, ConfidenceProfile> confidence_profile = default_confidence_profile();

    double p_h(BiasState s) const { return p_halluc[static_cast<std::size_t>(s)]; }
    double p_unfair(BiasState s) const {
        if (s == BiasState::Non) return 0.0;
        return p_unfair_by_state[static_cast<std::size_t>(s)].value_or(p_unfair_given_halluc);
    }
};

inline void validate(const PlantedScm& scm) {
    auto prob = [](double v, const std::string& what) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(what + " must lie in [0, 1], got " + io::format_double(v));
    };
    for (BiasState s : kAllBiasStates) {
        prob(scm.p_h(s), "p_halluc." + std::string(to_string(s)));
        if (const auto& o = scm.p_unfair_by_state[static_cast<std::size_t>(s)]) {
            prob(*o, "p_unfair_given_halluc_by_state." + std::string(to_string(s)));
        }
    }
    prob(scm.p_unfair_given_halluc, "p_unfair_given_halluc");
    prob(scm.rho, "rho");
    for (Outcome g : {Outcome::Correct, Outcome::UnfairnessHallucination, Outcome::CommonHallucination}) {
        const auto it = scm.confidence_profile.find(g);
        if (it == scm.confidence_profile.end()) {
            throw ConfigError("confidence_profile lacks " + std::string(to_string(g)));
        }
        const auto& p = it->second;
        if (!(p.mean > 0.0 && p.mean <= 1.0)) throw ConfigError("confidence mean must lie in (0, 1]");
        if (!(p.spread >= 0.0 && p.spread < 1.0)) throw ConfigError("confidence spread must lie in [0, 1)");
    }
}

inline PlantedScm scm_from_json(const Json& j) {
    try {
        PlantedScm scm;
        scm.name = j.value("name", scm.name);
        if (j.contains("seed") && !j["seed"].is_null()) scm.seed = j["seed"].get<std::uint64_t>();
        const Json& ph = j.at("p_halluc");
        for (const auto& [k, v] : ph.items()) scm.p_halluc[static_cast<std::size_t>(parse_bias_state(k))] = v.get<double>();
        for (BiasState s : kAllBiasStates) {
            if (!ph.contains(std::string(to_string(s)))) {
                throw ConfigError("p_halluc lacks " + std::string(to_string(s)));
            }
        }
        scm.p_unfair_given_halluc = j.value("p_unfair_given_halluc", scm.p_unfair_given_halluc);
        if (j.contains("p_unfair_given_halluc_by_state") && !j["p_unfair_given_halluc_by_state"].is_null()) {
            for (const auto& [k, v] : j["p_unfair_given_halluc_by_state"].items()) {
                scm.p_unfair_by_state[static_cast<std::size_t>(parse_bias_state(k))] = v.get<double>();
            }
        }
        scm.rho = j.value("rho", 0.0);
        if (j.contains("confidence_profile")) {
            for (const auto& [k, v] : j["confidence_profile"].items()) {
                scm.confidence_profile[parse_outcome(k)] = {v.at("mean").get<double>(), v.value("spread", 0.0)};
            }
        }
        validate(scm);
        return scm;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad SCM config: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("bad SCM config: ") + e.what());
    }
}

inline Json to_json(const PlantedScm& scm) {
    Json j;
    j["name"] = scm.name;
    j["seed"] = scm.seed ? Json(*scm.seed) : Json(nullptr);
    Json ph;
    for (BiasState s : kAllBiasStates) ph[std::string(to_string(s))] = scm.p_h(s);
    j["p_halluc"] = ph;
    j["p_unfair_given_halluc"] = scm.p_unfair_given_halluc;
    Json by = Json::object();
    for (BiasState s : kAllBiasStates) {
        if (const auto& o = scm.p_unfair_by_state[static_cast<std::size_t>(s)]) by[std::string(to_string(s))] = *o;
    }
    j["p_unfair_given_halluc_by_state"] = by;
    j["rho"] = scm.rho;
    Json cp;
    for (const auto& [g, p] : scm.confidence_profile) cp[std::string(to_string(g))] = {{"mean", p.mean}, {"spread", p.spread}};
    j["confidence_profile"] = cp;
    return j;
}

inline PlantedScm load_scm(const std::filesystem::path& path) { return scm_from_json(io::read_json_file(path)); }

// Seed actually used for draws: the SCM's own, else derived from the master seed.
inline std::uint64_t effective_seed(const PlantedScm& scm, std::uint64_t master_seed) {
    return scm.seed.value_or(rng::derive(master_seed, "scm"));
}

// ---------------------------------------------------------------------------
// respond

// One uniform u decides the outcome: u < p_h*(1-p_unf) common, u < p_h
// unfair, otherwise correct. With probability rho the pair's group shares u,
// which couples the two members of every pair built from that group.
inline Outcome planted_outcome(const ScenarioInstance& inst, unsigned repetition, const PlantedScm& scm,
                               std::uint64_t seed) {
    const std::uint64_t rep = repetition;
    const std::uint64_t group_key = rng::derive(rng::derive(seed, "group:" + inst.group_id), rep);
    rng::CounterStream group(group_key);
    const double coin = group.uniform();
    const double shared = group.uniform();
    double u = shared;
    if (!(coin < scm.rho)) {
        rng::CounterStream own(rng::derive(rng::derive(seed, inst.instance_id), rep));
        u = own.uniform();
    }
    const double ph = scm.p_h(inst.bias_state);
    if (inst.bias_state == BiasState::Non) return u < ph ? Outcome::CommonHallucination : Outcome::Correct;
    const double common = ph * (1.0 - scm.p_unfair(inst.bias_state));
    if (u < common) return Outcome::CommonHallucination;
    if (u < ph) return Outcome::UnfairnessHallucination;
    return Outcome::Correct;
}

inline RawResponse respond(const ScenarioInstance& inst, const OptionOrder& options, unsigned repetition,
                           const PlantedScm& scm, std::uint64_t seed) {
    const Outcome o = planted_outcome(inst, repetition, scm, seed);
    rng::CounterStream pick(rng::derive(rng::derive(rng::derive(seed, inst.instance_id), repetition), "pick"));

    Person chosen = inst.correct_person;
    if (o == Outcome::UnfairnessHallucination) {
        chosen = *inst.unfair_counterpart;
    } else if (o == Outcome::CommonHallucination) {
        std::vector<Person> wrong;
        for (Person p : kAllPersons) {
            if (p != inst.correct_person && p != inst.unfair_counterpart) wrong.push_back(p);
        }
        chosen = wrong[pick.below(wrong.size())];
    }
    const auto& prof = scm.confidence_profile.at(o);
    const double p = std::clamp(prof.mean + prof.spread * (2.0 * pick.uniform() - 1.0), 1e-6, 1.0);

    RawResponse r;
    r.instance_id = inst.instance_id;
    r.repetition_index = repetition;
    r.model = scm.name;
    r.options = options;
    const char letter = letter_of(options, chosen);
    r.completion_text = std::string(1, letter);
    r.token_probs = std::vector<TokenProb>{{r.completion_text, p}};
    return r;
}

class SyntheticSource : public ResponseSource {
public:
    SyntheticSource(PlantedScm scm, std::uint64_t master_seed, std::string model_name = {})
        : scm_(std::move(scm)), seed_(effective_seed(scm_, master_seed)) {
        validate(scm_);
        if (!model_name.empty()) scm_.name = std::move(model_name);
    }

    RawResponse query(const QueryRequest& req) override {
        RawResponse r = respond(*req.instance, req.options, req.repetition_index, scm_, seed_);
        r.pair_id = req.pair_id;
        r.member = req.member;
        return r;
    }

private:
    PlantedScm scm_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// power_trial

struct PowerOptions {
    double alpha = kDefaultAlpha;
    Orientation orientation = Orientation::SecondMinusFirst;
    Correction correction = Correction::None;
    std::vector<Scope> scopes{Scope::AllHallucinations};
    Logger log;
};

struct PowerCell {
    PairType pair_type = PairType::ProAnti;
    Scope scope = Scope::AllHallucinations;
    std::size_t rejections = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
    double mean_ucs = 0.0;
    double mean_b = 0.0;
    double mean_c = 0.0;

    double rejection_rate(std::size_t replications) const {
        return static_cast<double>(rejections) / static_cast<double>(replications);
    }
    // +1, -1 or 0 from the majority of replications
    int mean_sign() const { return mean_ucs > 0 ? 1 : (mean_ucs < 0 ? -1 : 0); }
};

struct PowerSummary {
    std::string scm_name;
    std::size_t n_pairs = 0;
    std::size_t replications = 0;
    double alpha = kDefaultAlpha;
    Orientation orientation = Orientation::SecondMinusFirst;
    std::vector<PowerCell> cells;
    // significance of every cell, per replication, in `cells` order
    std::vector<std::vector<bool>> significant_by_replication;

    const PowerCell& cell(PairType t, Scope s) const {
        for (const auto& c : cells) {
            if (c.pair_type == t && c.scope == s) return c;
        }
        throw Error("no such power cell");
    }
};

// Matched trials cycle through the dataset's groups; trial k uses group
// k mod G at repetition k / G, so n_pairs may exceed the number of groups.
// Each replication reseeds the SCM and runs respond -> classify -> analyze.
inline PowerSummary power_trial(const PlantedScm& scm, const std::vector<InterventionPair>& dataset, std::size_t n_pairs,
                                std::size_t replications, const PowerOptions& opt = {}) {
    validate(scm);
    check_alpha(opt.alpha);
    if (replications < 100) throw ConfigError("replications must be at least 100");
    if (n_pairs == 0) throw ConfigError("n_pairs must be positive");

    // group -> pair per type; only the neutral Non variant takes part
    std::map<std::string, std::array<const InterventionPair*, 3>> groups;
    for (const auto& p : dataset) {
        if (p.first.non_stereotyped_variant || p.second.non_stereotyped_variant) continue;
        groups[p.first.group_id][static_cast<std::size_t>(p.pair_type)] = &p;
    }
    std::vector<std::array<const InterventionPair*, 3>> usable;
    for (const auto& [_, g] : groups) {
        if (g[0] && g[1] && g[2]) usable.push_back(g);
    }
    if (usable.empty()) throw ValidationError("dataset has no group with all three pair types");
    const std::size_t G = usable.size();

    std::vector<InterventionPair> pairs;
    for (const auto& g : usable) {
        for (const auto* p : g) pairs.push_back(*p);
    }

    AnalysisConfig acfg;
    acfg.alpha = opt.alpha;
    acfg.orientation = opt.orientation;
    acfg.correction = opt.correction;
    acfg.scopes = opt.scopes;

    PowerSummary out;
    out.scm_name = scm.name;
    out.n_pairs = n_pairs;
    out.replications = replications;
    out.alpha = opt.alpha;
    out.orientation = opt.orientation;
    for (PairType t : kAllPairTypes) {
        for (Scope s : opt.scopes) out.cells.push_back({t, s});
    }

    const std::uint64_t base = effective_seed(scm, 0);
    std::vector<RawResponse> responses;
    responses.reserve(6 * n_pairs);
    for (std::size_t r = 0; r < replications; ++r) {
        const std::uint64_t seed = rng::derive(base, static_cast<std::uint64_t>(r));
        responses.clear();
        for (std::size_t k = 0; k < n_pairs; ++k) {
            const auto& g = usable[k % G];
            const auto rep = static_cast<unsigned>(k / G);
            for (const InterventionPair* p : g) {
                for (Member m : {Member::First, Member::Second}) {
                    const ScenarioInstance& inst = m == Member::First ? p->first : p->second;
                    RawResponse resp = respond(inst, presented_options(*p, m, rep), rep, scm, seed);
                    resp.pair_id = p->pair_id;
                    resp.member = m;
                    responses.push_back(std::move(resp));
                }
            }
        }
        const auto table = build_ice_table(responses, pairs, acfg);
        const auto reports = compute_reports(table, acfg, pairs);
        auto& sig = out.significant_by_replication.emplace_back();
        for (auto& cell : out.cells) {
            const CausalReport* c = reports.find(scm.name, kAllBiases, cell.pair_type, cell.scope);
            if (!c) throw Error("power trial produced no pooled cell");
            sig.push_back(c->test.significant);
            if (c->test.significant) ++cell.rejections;
            if (c->test.direction == Direction::Positive) ++cell.positive;
            if (c->test.direction == Direction::Negative) ++cell.negative;
            cell.mean_ucs += c->test.ucs;
            cell.mean_b += static_cast<double>(c->counts.b);
            cell.mean_c += static_cast<double>(c->counts.c);
        }
        if (opt.log && (r + 1) % std::max<std::size_t>(1, replications / 10) == 0) {
            opt.log("replication " + std::to_string(r + 1) + "/" + std::to_string(replications));
        }
    }
    for (auto& cell : out.cells) {
        const auto R = static_cast<double>(replications);
        cell.mean_ucs /= R;
        cell.mean_b /= R;
        cell.mean_c /= R;
    }
    return out;
}

inline Json to_json(const PowerSummary& s) {
    Json j;
    j["scm"] = s.scm_name;
    j["n_pairs"] = s.n_pairs;
    j["replications"] = s.replications;
    j["alpha"] = s.alpha;
    j["orientation"] = to_string(s.orientation);
    j["cells"] = Json::array();
    for (const auto& c : s.cells) {
        Json row;
        row["pair_type"] = display_name(c.pair_type);
        row["scope"] = to_string(c.scope);
        row["rejection_rate"] = c.rejection_rate(s.replications);
        row["rejections"] = c.rejections;
        row["mean_ucs"] = c.mean_ucs;
        row["mean_b"] = c.mean_b;
        row["mean_c"] = c.mean_c;
        row["positive"] = c.positive;
        row["negative"] = c.negative;
        j["cells"].push_back(row);
    }
    return j;
}

inline std::string power_markdown(const PowerSummary& s) {
    std::string md = "## Simulation: " + s.scm_name + "\n\n" + std::to_string(s.replications) + " replications, " +
                     std::to_string(s.n_pairs) + " matched pairs each, alpha " + io::format_double(s.alpha) +
                     ", sign " + std::string(to_string(s.orientation)) + ".\n\n" +
                     "| Pair | Scope | Rejection rate | Mean UCS | Mean b | Mean c | UCS>0 | UCS<0 |\n"
                     "|---|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& c : s.cells) {
        md += "| " + std::string(display_name(c.pair_type)) + " | " + std::string(to_string(c.scope)) + " | " +
              detail::fixed(c.rejection_rate(s.replications), 3) + " | " + detail::fixed(c.mean_ucs, 2) + " | " +
              detail::fixed(c.mean_b, 1) + " | " + detail::fixed(c.mean_c, 1) + " | " + std::to_string(c.positive) +
              " | " + std::to_string(c.negative) + " |\n";
    }
    return md;
}

}  // namespace bicausal
