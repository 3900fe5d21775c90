#pragma once
// Aggregation of classified trials into causal, rate and confidence reports,
// and their CSV / Markdown / JSON renderings.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "bicausal/classifier.hpp"
#include "bicausal/io.hpp"
#include "bicausal/response.hpp"
#include "bicausal/scm_stats.hpp"
#include "bicausal/template_engine.hpp"

namespace bicausal {

inline constexpr std::string_view kAllBiases = "All";

enum class Scope : std::uint8_t { AllHallucinations, UnfairnessOnly, CommonOnly };

inline constexpr Scope kAllScopes[] = {Scope::AllHallucinations, Scope::UnfairnessOnly, Scope::CommonOnly};

constexpr std::string_view to_string(Scope s) noexcept {
    switch (s) {
        case Scope::AllHallucinations: return "AllHallucinations";
        case Scope::UnfairnessOnly: return "UnfairnessOnly";
        case Scope::CommonOnly: return "CommonOnly";
    }
    return "?";
}

inline Scope parse_scope(std::string_view s) {
    if (s == "AllHallucinations" || s == "all") return Scope::AllHallucinations;
    if (s == "UnfairnessOnly" || s == "unfairness") return Scope::UnfairnessOnly;
    if (s == "CommonOnly" || s == "common") return Scope::CommonOnly;
    throw ConfigError("unknown scope '" + std::string(s) + "' (all, unfairness, common)");
}

// Which member's hallucination counts as positive in reports.
enum class Orientation : std::uint8_t { FirstMinusSecond, SecondMinusFirst };

constexpr std::string_view to_string(Orientation o) noexcept {
    return o == Orientation::FirstMinusSecond ? "first_minus_second" : "second_minus_first";
}

inline Orientation parse_orientation(std::string_view s) {
    if (s == "first_minus_second") return Orientation::FirstMinusSecond;
    if (s == "second_minus_first") return Orientation::SecondMinusFirst;
    throw ConfigError("orientation must be first_minus_second or second_minus_first");
}

inline DiscordanceCounts oriented(const DiscordanceCounts& c, Orientation o) {
    return o == Orientation::FirstMinusSecond ? c : c.reversed();
}

// H under a scope: 1 iff the outcome is the scoped hallucination type.
inline HallucinationState scoped_h(Outcome o, Scope s) {
    if (o == Outcome::Invalid) throw DomainError("invalid trial has no hallucination state");
    switch (s) {
        case Scope::AllHallucinations: return HallucinationState(is_hallucination(o));
        case Scope::UnfairnessOnly: return HallucinationState(o == Outcome::UnfairnessHallucination);
        case Scope::CommonOnly: return HallucinationState(o == Outcome::CommonHallucination);
    }
    return HallucinationState(false);
}

inline IceValue scoped_ice(Outcome first, Outcome second, Scope s) {
    return compute_ice(scoped_h(first, s), scoped_h(second, s));
}

struct AnalysisConfig {
    double alpha = kDefaultAlpha;
    std::vector<Scope> scopes{Scope::AllHallucinations};
    Orientation orientation = Orientation::SecondMinusFirst;
    Correction correction = Correction::None;
    bool majority_vote = false;
    bool strict_parse = false;
};

// ---------------------------------------------------------------------------
// ICE table

struct CellKey {
    std::string model;
    std::string social_bias;  // category or "All"
    PairType pair_type = PairType::ProAnti;

    auto tie() const { return std::tie(model, social_bias, pair_type); }
    friend bool operator<(const CellKey& a, const CellKey& b) { return a.tie() < b.tie(); }
    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct MatchedTrial {
    std::string pair_id;
    unsigned repetition_index = 0;
    Outcome first = Outcome::Correct;
    Outcome second = Outcome::Correct;
};

struct CellData {
    std::vector<MatchedTrial> matched;
    std::size_t dropped_pairs = 0;
    std::size_t invalid_trials = 0;
};

struct IceTable {
    std::vector<std::string> models;
    std::vector<std::string> categories;  // report order
    std::map<CellKey, CellData> cells;    // per-category and "All"
    std::vector<TrialRecord> trials;      // every classified trial, key order
    std::vector<std::string> orphans;     // responses that match no pair member
    std::size_t failed_trials = 0;

    std::vector<IceValue> ices(const CellKey& key, Scope s) const {
        std::vector<IceValue> out;
        const auto it = cells.find(key);
        if (it == cells.end()) return out;
        out.reserve(it->second.matched.size());
        for (const auto& m : it->second.matched) out.push_back(scoped_ice(m.first, m.second, s));
        return out;
    }
};

inline std::vector<std::string> ordered_categories(std::set<std::string> names) {
    std::vector<std::string> out(names.begin(), names.end());
    std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) { return category_less(a, b); });
    return out;
}

namespace detail {

// Modal outcome; ties prefer Correct, then Common, then Unfairness.
inline Outcome majority(const std::vector<Outcome>& outcomes) {
    std::array<int, 3> n{};
    for (Outcome o : outcomes) ++n[static_cast<int>(o)];
    int best = 0;
    for (int k = 1; k < 3; ++k) {
        if (n[k] > n[best]) best = k;
    }
    return static_cast<Outcome>(best);
}

}  // namespace detail

inline IceTable build_ice_table(const std::vector<RawResponse>& responses, const std::vector<InterventionPair>& pairs,
                                const AnalysisConfig& cfg) {
    IceTable table;
    std::unordered_map<std::string, const InterventionPair*> by_id;
    std::set<std::string> categories;
    for (const auto& p : pairs) {
        by_id.emplace(p.pair_id, &p);
        categories.insert(p.first.category);
    }
    table.categories = ordered_categories(categories);

    // (model, pair_id, repetition) -> member outcomes; nullopt = failed
    using Slot = std::array<std::optional<std::optional<Outcome>>, 2>;
    std::map<std::tuple<std::string, std::string, unsigned>, Slot> slots;
    std::set<std::string> models;

    std::vector<const RawResponse*> sorted;
    sorted.reserve(responses.size());
    for (const auto& r : responses) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const RawResponse* a, const RawResponse* b) {
        return std::tie(a->model, a->pair_id, a->repetition_index, a->member) <
               std::tie(b->model, b->pair_id, b->repetition_index, b->member);
    });

    for (const RawResponse* r : sorted) {
        const auto it = by_id.find(r->pair_id);
        const InterventionPair* p = it == by_id.end() ? nullptr : it->second;
        const ScenarioInstance* inst = nullptr;
        if (p) inst = r->member == Member::First ? &p->first : &p->second;
        if (!inst || inst->instance_id != r->instance_id) {
            table.orphans.push_back(r->pair_id + "/" + std::string(to_string(r->member)) + "/" +
                                    std::to_string(r->repetition_index));
            continue;
        }
        models.insert(r->model);
        auto& slot = slots[{r->model, r->pair_id, r->repetition_index}][r->member == Member::First ? 0 : 1];
        if (!r->ok) {
            ++table.failed_trials;
            slot = std::optional<Outcome>{};
            continue;
        }
        auto rec = classify_response(*inst, *r, cfg.strict_parse);
        slot = rec.outcome;
        table.trials.push_back(std::move(rec));
    }
    table.models.assign(models.begin(), models.end());

    for (const auto& model : table.models) {
        for (const auto& cat : table.categories) {
            for (PairType t : kAllPairTypes) table.cells[{model, cat, t}];
        }
        for (PairType t : kAllPairTypes) table.cells[{model, std::string(kAllBiases), t}];
    }

    auto cells_of = [&](const std::string& model, const InterventionPair& p) {
        return std::array<CellData*, 2>{&table.cells[{model, p.first.category, p.pair_type}],
                                        &table.cells[{model, std::string(kAllBiases), p.pair_type}]};
    };

    if (!cfg.majority_vote) {
        for (const auto& [key, slot] : slots) {
            const auto& [model, pair_id, rep] = key;
            const InterventionPair& p = *by_id.at(pair_id);
            const auto targets = cells_of(model, p);
            int invalid = 0;
            bool usable = true;
            for (const auto& s : slot) {
                if (!s || !*s) {
                    usable = false;
                } else if (**s == Outcome::Invalid) {
                    ++invalid;
                    usable = false;
                }
            }
            for (CellData* c : targets) {
                c->invalid_trials += static_cast<std::size_t>(invalid);
                if (usable) {
                    c->matched.push_back({pair_id, rep, *slot[0].value(), *slot[1].value()});
                } else {
                    ++c->dropped_pairs;
                }
            }
        }
    } else {
        // Collapse repetitions to one modal outcome per member.
        std::map<std::pair<std::string, std::string>, std::array<std::vector<Outcome>, 2>> votes;
        std::map<std::pair<std::string, std::string>, int> invalid;
        for (const auto& [key, slot] : slots) {
            const auto& [model, pair_id, rep] = key;
            auto& v = votes[{model, pair_id}];
            for (int m = 0; m < 2; ++m) {
                if (slot[m] && *slot[m]) {
                    if (**slot[m] == Outcome::Invalid) {
                        ++invalid[{model, pair_id}];
                    } else {
                        v[m].push_back(**slot[m]);
                    }
                }
            }
        }
        for (const auto& [key, v] : votes) {
            const InterventionPair& p = *by_id.at(key.second);
            for (CellData* c : cells_of(key.first, p)) {
                c->invalid_trials += static_cast<std::size_t>(invalid[key]);
                if (v[0].empty() || v[1].empty()) {
                    ++c->dropped_pairs;
                } else {
                    c->matched.push_back({key.second, 0, detail::majority(v[0]), detail::majority(v[1])});
                }
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Reports

struct CausalReport {
    std::string model_name;
    std::string social_bias;
    PairType pair_type = PairType::ProAnti;
    Scope scope = Scope::AllHallucinations;
    Orientation orientation = Orientation::SecondMinusFirst;
    DiscordanceCounts counts;  // already oriented
    CausalTestResult test;
    std::size_t dropped_pairs = 0;
    std::size_t invalid_trials = 0;
    bool empty = false;
};

struct RateReport {
    std::string model_name;
    std::string social_bias;
    BiasState bias_state = BiasState::Pro;
    double rate = 0.0;
    std::size_t n = 0;
    std::size_t hallucinations = 0;
};

struct ConfidenceReport {
    std::string model_name;
    Outcome group = Outcome::Correct;
    double mean_confidence = 0.0;
    std::size_t n = 0;
};

struct ReportSet {
    double alpha = kDefaultAlpha;
    Orientation orientation = Orientation::SecondMinusFirst;
    Correction correction = Correction::None;
    std::vector<Scope> scopes;
    std::vector<std::string> models;
    std::vector<std::string> categories;
    std::vector<CausalReport> causal;
    std::vector<RateReport> rates;
    std::vector<ConfidenceReport> confidence;
    std::vector<std::string> warnings;
    std::vector<std::string> orphans;
    std::size_t failed_trials = 0;

    std::size_t empty_cells() const {
        return static_cast<std::size_t>(
            std::count_if(causal.begin(), causal.end(), [](const CausalReport& c) { return c.empty; }));
    }

    const CausalReport* find(std::string_view model, std::string_view bias, PairType t, Scope s) const {
        for (const auto& c : causal) {
            if (c.model_name == model && c.social_bias == bias && c.pair_type == t && c.scope == s) return &c;
        }
        return nullptr;
    }
};

inline ReportSet compute_reports(const IceTable& table, const AnalysisConfig& cfg, const std::vector<InterventionPair>& pairs) {
    check_alpha(cfg.alpha);
    if (cfg.scopes.empty()) throw ConfigError("at least one scope is required");
    ReportSet out;
    out.alpha = cfg.alpha;
    out.orientation = cfg.orientation;
    out.correction = cfg.correction;
    out.scopes = cfg.scopes;
    out.models = table.models;
    out.categories = table.categories;
    out.orphans = table.orphans;
    out.failed_trials = table.failed_trials;

    std::vector<std::string> biases = table.categories;
    biases.emplace_back(kAllBiases);
    for (const auto& model : table.models) {
        for (const auto& bias : biases) {
            for (PairType t : kAllPairTypes) {
                const CellKey key{model, bias, t};
                const auto it = table.cells.find(key);
                static const CellData none;
                const CellData& cell = it == table.cells.end() ? none : it->second;
                for (Scope s : cfg.scopes) {
                    CausalReport r;
                    r.model_name = model;
                    r.social_bias = bias;
                    r.pair_type = t;
                    r.scope = s;
                    r.orientation = cfg.orientation;
                    r.counts = oriented(tally_discordance(table.ices(key, s)), cfg.orientation);
                    r.test = causal_test(r.counts, cfg.alpha, cfg.correction);
                    r.dropped_pairs = cell.dropped_pairs;
                    r.invalid_trials = cell.invalid_trials;
                    r.empty = r.counts.n_total == 0;
                    out.causal.push_back(r);
                }
            }
        }
    }
    for (const auto& c : out.causal) {
        if (c.empty) {
            out.warnings.push_back("empty cell: " + c.model_name + " / " + c.social_bias + " / " +
                                   std::string(display_name(c.pair_type)) + " / " + std::string(to_string(c.scope)));
        }
    }

    // Rates and confidence count each (model, instance, repetition) once even
    // though instances are shared between pair types.
    std::unordered_map<std::string, const ScenarioInstance*> instances;
    for (const auto& p : pairs) {
        instances.emplace(p.first.instance_id, &p.first);
        instances.emplace(p.second.instance_id, &p.second);
    }
    std::set<std::tuple<std::string, std::string, unsigned>> seen;
    std::map<std::tuple<std::string, std::string, BiasState>, std::pair<std::size_t, std::size_t>> rate_acc;
    std::map<std::pair<std::string, Outcome>, std::pair<double, std::size_t>> conf_acc;
    std::set<std::string> has_probs;
    for (const auto& t : table.trials) {
        if (t.outcome == Outcome::Invalid) continue;
        if (!seen.insert({t.model, t.instance_id, t.repetition_index}).second) continue;
        const ScenarioInstance& inst = *instances.at(t.instance_id);
        const bool h = is_hallucination(t.outcome);
        for (const std::string& bias : {inst.category, std::string(kAllBiases)}) {
            auto& acc = rate_acc[{t.model, bias, inst.bias_state}];
            ++acc.first;
            acc.second += h ? 1 : 0;
        }
        if (t.confidence) {
            has_probs.insert(t.model);
            auto& acc = conf_acc[{t.model, t.outcome}];
            acc.first += *t.confidence;
            ++acc.second;
        }
    }
    for (const auto& model : table.models) {
        for (const auto& bias : biases) {
            for (BiasState s : kAllBiasStates) {
                const auto it = rate_acc.find({model, bias, s});
                if (it == rate_acc.end() || it->second.first == 0) continue;
                RateReport r;
                r.model_name = model;
                r.social_bias = bias;
                r.bias_state = s;
                r.n = it->second.first;
                r.hallucinations = it->second.second;
                r.rate = static_cast<double>(r.hallucinations) / static_cast<double>(r.n);
                out.rates.push_back(r);
            }
        }
        if (!has_probs.count(model)) {
            out.warnings.push_back("confidence skipped for " + model + ": no token probabilities");
            continue;
        }
        for (Outcome g : {Outcome::Correct, Outcome::UnfairnessHallucination, Outcome::CommonHallucination}) {
            const auto it = conf_acc.find({model, g});
            if (it == conf_acc.end() || it->second.second == 0) continue;
            out.confidence.push_back({model, g, it->second.first / static_cast<double>(it->second.second),
                                      it->second.second});
        }
    }
    if (!out.orphans.empty()) {
        out.warnings.push_back(std::to_string(out.orphans.size()) + " responses match no pair member");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Emitters

// Smallest X with survival below alpha, by bisection.
inline double critical_value(double alpha) {
    check_alpha(alpha);
    double lo = 0.0;
    double hi = 1.0;
    while (chi_square_1df_survival(hi) > alpha) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (chi_square_1df_survival(mid) > alpha ? lo : hi) = mid;
    }
    return hi;
}

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string md_cell(const CausalReport* c) {
    if (!c || c->empty) return "n/a";
    const std::string v = fixed(c->test.ucs, 1);
    return c->test.significant ? "**" + v + "**" : v;
}

}  // namespace detail

inline const std::vector<std::string> kCausalColumns{
    "model", "social_bias", "pair_type", "scope", "orientation", "n_total", "b", "c", "n_zero",
    "statistic_x", "p_two_tailed", "p_one_tailed", "ucs", "direction", "significant", "alpha",
    "dropped_pairs", "invalid_trials", "empty"};

inline Json to_json(const CausalReport& c) {
    Json j;
    j["model"] = c.model_name;
    j["social_bias"] = c.social_bias;
    j["pair_type"] = display_name(c.pair_type);
    j["scope"] = to_string(c.scope);
    j["orientation"] = to_string(c.orientation);
    j["n_total"] = c.counts.n_total;
    j["b"] = c.counts.b;
    j["c"] = c.counts.c;
    j["n_zero"] = c.counts.n_zero;
    j["statistic_x"] = c.test.statistic_x;
    j["p_two_tailed"] = c.test.p_two_tailed;
    j["p_one_tailed"] = c.test.p_one_tailed;
    j["ucs"] = c.test.ucs;
    j["direction"] = to_string(c.test.direction);
    j["significant"] = c.test.significant;
    j["alpha"] = c.test.alpha;
    j["dropped_pairs"] = c.dropped_pairs;
    j["invalid_trials"] = c.invalid_trials;
    j["empty"] = c.empty;
    return j;
}

inline Json to_json(const RateReport& r) {
    Json j;
    j["model"] = r.model_name;
    j["social_bias"] = r.social_bias;
    j["bias_state"] = to_string(r.bias_state);
    j["rate"] = r.rate;
    j["n"] = r.n;
    j["hallucinations"] = r.hallucinations;
    return j;
}

inline Json to_json(const ConfidenceReport& r) {
    Json j;
    j["model"] = r.model_name;
    j["group"] = to_string(r.group);
    j["mean_confidence"] = r.mean_confidence;
    j["n"] = r.n;
    return j;
}

// CSV cells reuse the JSON rendering so both formats carry identical values.
inline std::string rows_to_csv(const std::vector<std::string>& columns, const std::vector<Json>& rows) {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            const Json& v = row.at(columns[i]);
            out += detail::csv_field(v.is_string() ? v.get<std::string>() : v.dump());
        }
        out += '\n';
    }
    return out;
}

inline std::string causal_csv(const ReportSet& rs) {
    std::vector<Json> rows;
    for (const auto& c : rs.causal) rows.push_back(to_json(c));
    return rows_to_csv(kCausalColumns, rows);
}

inline std::string rates_csv(const ReportSet& rs) {
    std::vector<Json> rows;
    for (const auto& r : rs.rates) rows.push_back(to_json(r));
    return rows_to_csv({"model", "social_bias", "bias_state", "rate", "n", "hallucinations"}, rows);
}

inline std::string confidence_csv(const ReportSet& rs) {
    std::vector<Json> rows;
    for (const auto& r : rs.confidence) rows.push_back(to_json(r));
    return rows_to_csv({"model", "group", "mean_confidence", "n"}, rows);
}

inline Json report_json(const ReportSet& rs) {
    Json j;
    j["alpha"] = rs.alpha;
    j["orientation"] = to_string(rs.orientation);
    j["continuity_correction"] = rs.correction == Correction::Edwards;
    Json scopes = Json::array();
    for (Scope s : rs.scopes) scopes.push_back(to_string(s));
    j["scopes"] = scopes;
    j["models"] = rs.models;
    j["social_biases"] = rs.categories;
    j["causal"] = Json::array();
    for (const auto& c : rs.causal) j["causal"].push_back(to_json(c));
    j["rates"] = Json::array();
    for (const auto& r : rs.rates) j["rates"].push_back(to_json(r));
    j["confidence"] = Json::array();
    for (const auto& r : rs.confidence) j["confidence"].push_back(to_json(r));
    j["failed_trials"] = rs.failed_trials;
    j["empty_cells"] = rs.empty_cells();
    j["orphans"] = rs.orphans;
    j["warnings"] = rs.warnings;
    return j;
}

inline std::string tables_markdown(const ReportSet& rs) {
    std::string md;
    const std::string crit = detail::fixed(critical_value(rs.alpha), 3);
    const std::string note = "Bold: two-tailed p < " + io::format_double(rs.alpha) + " (X > " + crit +
                             "). Sign follows " + std::string(to_string(rs.orientation)) + "; positive means the " +
                             (rs.orientation == Orientation::SecondMinusFirst ? "second" : "first") +
                             " state of the pair hallucinates more.\n";
    for (Scope s : rs.scopes) {
        md += "## UCS by model and social bias (" + std::string(to_string(s)) + ")\n\n| Model |";
        std::string rule = "|---|";
        for (PairType t : kAllPairTypes) {
            for (const auto& cat : rs.categories) {
                md += " " + std::string(display_name(t)) + " " + cat + " |";
                rule += "---:|";
            }
        }
        md += "\n" + rule + "\n";
        for (const auto& m : rs.models) {
            md += "| " + m + " |";
            for (PairType t : kAllPairTypes) {
                for (const auto& cat : rs.categories) md += " " + detail::md_cell(rs.find(m, cat, t, s)) + " |";
            }
            md += "\n";
        }
        md += "\n" + note + "\n";

        md += "## UCS per model across social biases (" + std::string(to_string(s)) + ")\n\n| Model |";
        rule = "|---|";
        for (PairType t : kAllPairTypes) {
            md += " " + std::string(display_name(t)) + " |";
            rule += "---:|";
        }
        md += "\n" + rule + "\n";
        for (const auto& m : rs.models) {
            md += "| " + m + " |";
            for (PairType t : kAllPairTypes) md += " " + detail::md_cell(rs.find(m, kAllBiases, t, s)) + " |";
            md += "\n";
        }
        md += "\n" + note + "\n";
    }

    md += "## Hallucination rate by bias state\n\n| Model | Social bias | Pro | Anti | Non |\n|---|---|---:|---:|---:|\n";
    std::vector<std::string> biases = rs.categories;
    biases.emplace_back(kAllBiases);
    for (const auto& m : rs.models) {
        for (const auto& b : biases) {
            md += "| " + m + " | " + b + " |";
            for (BiasState st : kAllBiasStates) {
                const auto it = std::find_if(rs.rates.begin(), rs.rates.end(), [&](const RateReport& r) {
                    return r.model_name == m && r.social_bias == b && r.bias_state == st;
                });
                md += " " + (it == rs.rates.end() ? std::string("n/a") : detail::fixed(it->rate, 3)) + " |";
            }
            md += "\n";
        }
    }
    md += "\n## Mean confidence by response type\n\n| Model | Correct | UnfairnessHallucination | CommonHallucination |\n"
          "|---|---:|---:|---:|\n";
    for (const auto& m : rs.models) {
        md += "| " + m + " |";
        for (Outcome g : {Outcome::Correct, Outcome::UnfairnessHallucination, Outcome::CommonHallucination}) {
            const auto it = std::find_if(rs.confidence.begin(), rs.confidence.end(), [&](const ConfidenceReport& r) {
                return r.model_name == m && r.group == g;
            });
            md += " " + (it == rs.confidence.end() ? std::string("n/a") : detail::fixed(it->mean_confidence, 3)) + " |";
        }
        md += "\n";
    }
    if (!rs.warnings.empty()) {
        md += "\n## Warnings\n\n";
        for (const auto& w : rs.warnings) md += "- " + w + "\n";
    }
    return md;
}

enum class Format : std::uint8_t { Csv, Markdown, Json };

inline std::vector<Format> parse_formats(const std::vector<std::string>& names) {
    std::vector<Format> out;
    for (const auto& n : names) {
        if (n == "csv") out.push_back(Format::Csv);
        else if (n == "markdown" || n == "md") out.push_back(Format::Markdown);
        else if (n == "json") out.push_back(Format::Json);
        else throw ConfigError("unknown format '" + n + "' (csv, markdown, json)");
    }
    return out;
}

// Returns the list of files written. An empty report set still produces
// header-only files, and a warning is added to the JSON.
inline std::vector<std::filesystem::path> emit_report(ReportSet rs, const std::filesystem::path& dir,
                                                      const std::vector<Format>& formats = {Format::Csv, Format::Markdown,
                                                                                           Format::Json},
                                                      const Logger& log = {}) {
    if (rs.causal.empty()) {
        rs.warnings.emplace_back("empty report set");
        if (log) log("warning: empty report set, writing header-only files");
    }
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& text) {
        io::write_file_atomic(dir / name, text);
        written.push_back(dir / name);
    };
    for (Format f : formats) {
        switch (f) {
            case Format::Csv:
                put("causal.csv", causal_csv(rs));
                put("rates_long.csv", rates_csv(rs));
                put("confidence_long.csv", confidence_csv(rs));
                break;
            case Format::Markdown: put("tables.md", tables_markdown(rs)); break;
            case Format::Json: put("report.json", report_json(rs).dump(2) + "\n"); break;
        }
    }
    return written;
}

}  // namespace bicausal
