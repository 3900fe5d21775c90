#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "bicausal/analysis.hpp"
#include "bicausal/gateway.hpp"
#include "bicausal/synthetic.hpp"
#include "oracles.hpp"

using namespace bicausal;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

const std::string kDemoDir = std::string(BICAUSAL_SOURCE_DIR) + "/data/demo";

const std::vector<InterventionPair>& demo() {
    static const auto pairs =
        generate_dataset(load_templates(kDemoDir + "/templates"), load_attribute_registry(kDemoDir + "/attributes.json"),
                         {.master_seed = 31});
    return pairs;
}

const InterventionPair& first_of(PairType t, std::string_view category = {}) {
    for (const auto& p : demo()) {
        if (p.pair_type == t && (category.empty() || p.first.category == category)) return p;
    }
    throw std::logic_error("no such pair");
}

std::string answer_text(const ScenarioInstance& inst, const OptionOrder& options, Outcome want) {
    switch (want) {
        case Outcome::Correct: return std::string(1, letter_of(options, inst.correct_person));
        case Outcome::UnfairnessHallucination: return std::string(1, letter_of(options, *inst.unfair_counterpart));
        case Outcome::CommonHallucination:
            for (Person p : kAllPersons) {
                if (p != inst.correct_person && p != inst.unfair_counterpart) return std::string(1, letter_of(options, p));
            }
            break;
        case Outcome::Invalid: return "I would rather not say.";
    }
    throw std::logic_error("unreachable");
}

RawResponse reply(const InterventionPair& p, Member m, unsigned rep, Outcome want, const std::string& model = "m1",
                  std::optional<double> prob = std::nullopt) {
    const ScenarioInstance& inst = m == Member::First ? p.first : p.second;
    RawResponse r;
    r.pair_id = p.pair_id;
    r.member = m;
    r.repetition_index = rep;
    r.instance_id = inst.instance_id;
    r.model = model;
    r.options = presented_options(p, m, rep);
    r.completion_text = answer_text(inst, r.options, want);
    if (prob) r.token_probs = std::vector<TokenProb>{{r.completion_text, *prob}};
    return r;
}

void add_pair(std::vector<RawResponse>& out, const InterventionPair& p, unsigned rep, Outcome a, Outcome b,
              const std::string& model = "m1") {
    out.push_back(reply(p, Member::First, rep, a, model));
    out.push_back(reply(p, Member::Second, rep, b, model));
}

std::vector<RawResponse> synthetic_run(const PlantedScm& scm, unsigned reps, std::uint64_t seed = 4) {
    SyntheticSource src(scm, seed);
    BatchOptions opt;
    opt.repetitions = reps;
    return run_batch(demo(), src, opt).responses;
}

PlantedScm effect_scm() {
    PlantedScm s;
    s.name = "effect";
    s.p_halluc = {0.05, 0.6, 0.3};
    s.p_unfair_given_halluc = 0.6;
    return s;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::path(BICAUSAL_TEST_TMP) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::string cell;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quoted) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cell += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                row.push_back(cell);
                cell.clear();
            } else {
                cell += ch;
            }
        }
        row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("scoped ICE examples", "[analysis][ice]") {
    using O = Outcome;
    REQUIRE(scoped_ice(O::CommonHallucination, O::Correct, Scope::AllHallucinations).value() == 1);
    REQUIRE(scoped_ice(O::CommonHallucination, O::Correct, Scope::UnfairnessOnly).value() == 0);
    REQUIRE(scoped_ice(O::CommonHallucination, O::Correct, Scope::CommonOnly).value() == 1);
    REQUIRE(scoped_ice(O::Correct, O::UnfairnessHallucination, Scope::UnfairnessOnly).value() == -1);
    REQUIRE_THROWS_AS(scoped_h(O::Invalid, Scope::AllHallucinations), DomainError);
}

TEST_CASE("build_ice_table examples", "[analysis][table]") {
    const auto& p = first_of(PairType::ProAnti);
    const AnalysisConfig cfg;
    const CellKey key{"m1", p.first.category, PairType::ProAnti};

    SECTION("(Common, Correct)") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::CommonHallucination, Outcome::Correct);
        const auto t = build_ice_table(rs, demo(), cfg);
        REQUIRE(t.ices(key, Scope::AllHallucinations).at(0).value() == 1);
        REQUIRE(t.ices(key, Scope::UnfairnessOnly).at(0).value() == 0);
        REQUIRE(t.cells.at(key).dropped_pairs == 0);
    }
    SECTION("an Invalid member drops the pair") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::Invalid, Outcome::Correct);
        add_pair(rs, p, 1, Outcome::Correct, Outcome::UnfairnessHallucination);
        const auto t = build_ice_table(rs, demo(), cfg);
        REQUIRE(t.cells.at(key).matched.size() == 1);
        REQUIRE(t.cells.at(key).dropped_pairs == 1);
        REQUIRE(t.cells.at(key).invalid_trials == 1);
        const auto reps = compute_reports(t, cfg, demo());
        REQUIRE(reps.find("m1", p.first.category, PairType::ProAnti, Scope::AllHallucinations)->dropped_pairs == 1);
    }
    SECTION("a failed member drops the pair and is counted") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::Correct, Outcome::Correct);
        rs[1].ok = false;
        rs[1].completion_text.clear();
        rs[1].error = "timeout";
        const auto t = build_ice_table(rs, demo(), cfg);
        REQUIRE(t.failed_trials == 1);
        REQUIRE(t.cells.at(key).dropped_pairs == 1);
    }
    SECTION("orphans are listed and excluded") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::Correct, Outcome::Correct);
        RawResponse stray = rs[0];
        stray.pair_id = "nope";
        rs.push_back(stray);
        RawResponse wrong = rs[1];
        wrong.repetition_index = 1;
        wrong.instance_id = p.first.instance_id;  // second member row pointing at the first instance
        rs.push_back(wrong);
        const auto t = build_ice_table(rs, demo(), cfg);
        REQUIRE(t.orphans.size() == 2);
        REQUIRE(t.cells.at(key).matched.size() == 1);
        REQUIRE(compute_reports(t, cfg, demo()).orphans.size() == 2);
    }
}

TEST_CASE("cell decomposition over all 4x4 outcome pairs", "[analysis][property]") {
    const auto& p = first_of(PairType::ProAnti);
    AnalysisConfig cfg;
    cfg.scopes = {kAllScopes[0], kAllScopes[1], kAllScopes[2]};
    cfg.orientation = Orientation::FirstMinusSecond;
    const CellKey key{"m1", p.first.category, PairType::ProAnti};

    std::vector<RawResponse> all;
    std::size_t unfair_then_common = 0;
    std::size_t valid = 0;
    unsigned rep = 0;
    for (Outcome a : kAllOutcomes) {
        for (Outcome b : kAllOutcomes) {
            std::vector<RawResponse> rs;
            add_pair(rs, p, 0, a, b);
            add_pair(all, p, rep++, a, b);
            const auto t = build_ice_table(rs, demo(), cfg);
            const CellData& cell = t.cells.at(key);
            if (a == Outcome::Invalid || b == Outcome::Invalid) {
                REQUIRE(cell.matched.empty());
                REQUIRE(cell.dropped_pairs == 1);
                continue;
            }
            ++valid;
            unfair_then_common += a == Outcome::UnfairnessHallucination && b == Outcome::CommonHallucination;
            REQUIRE(cell.matched.at(0).first == a);
            REQUIRE(cell.matched.at(0).second == b);
            const int all_ice = t.ices(key, Scope::AllHallucinations)[0].value();
            const int unf = t.ices(key, Scope::UnfairnessOnly)[0].value();
            const int com = t.ices(key, Scope::CommonOnly)[0].value();
            REQUIRE(all_ice == unf + com);
            REQUIRE(all_ice == int(is_hallucination(a)) - int(is_hallucination(b)));
        }
    }

    // Pooled over every combination. The pure b_All >= b_Unfair ordering fails
    // for a first member with an unfair answer against a common one (ICE_All = 0,
    // ICE_Unfair = +1); it holds once those pairs are accounted for.
    const auto rs = compute_reports(build_ice_table(all, demo(), cfg), cfg, demo());
    const auto* a = rs.find("m1", p.first.category, PairType::ProAnti, Scope::AllHallucinations);
    const auto* u = rs.find("m1", p.first.category, PairType::ProAnti, Scope::UnfairnessOnly);
    REQUIRE(a->counts.n_total == valid);
    REQUIRE(a->counts.b + unfair_then_common >= u->counts.b);
    REQUIRE(a->counts.b == 2);  // (Common, Correct), (Unfair, Correct)
    REQUIRE(u->counts.b == 2);  // (Unfair, Correct), (Unfair, Common)

    std::vector<RawResponse> one;
    add_pair(one, p, 0, Outcome::UnfairnessHallucination, Outcome::CommonHallucination);
    const auto single = compute_reports(build_ice_table(one, demo(), cfg), cfg, demo());
    REQUIRE(single.find("m1", p.first.category, PairType::ProAnti, Scope::AllHallucinations)->counts.b == 0);
    REQUIRE(single.find("m1", p.first.category, PairType::ProAnti, Scope::UnfairnessOnly)->counts.b == 1);
}

TEST_CASE("compute_reports examples", "[analysis][reports]") {
    const auto& p = first_of(PairType::ProAnti);
    const std::string cat = p.first.category;

    SECTION("b = 30, c = 10") {
        std::vector<RawResponse> rs;
        for (unsigned r = 0; r < 30; ++r) add_pair(rs, p, r, Outcome::CommonHallucination, Outcome::Correct);
        for (unsigned r = 30; r < 40; ++r) add_pair(rs, p, r, Outcome::Correct, Outcome::UnfairnessHallucination);
        for (unsigned r = 40; r < 50; ++r) add_pair(rs, p, r, Outcome::Correct, Outcome::Correct);

        AnalysisConfig cfg;
        cfg.orientation = Orientation::FirstMinusSecond;
        auto out = compute_reports(build_ice_table(rs, demo(), cfg), cfg, demo());
        const auto* c = out.find("m1", cat, PairType::ProAnti, Scope::AllHallucinations);
        REQUIRE(c->counts == DiscordanceCounts{30, 10, 10, 50});
        // (30 - 10)^2 / 40: the statistic is 10 even though b - c is 20
        REQUIRE(c->counts.b - c->counts.c == 20);
        REQUIRE(c->test.ucs == Approx(10.0).margin(1e-12));
        REQUIRE(c->test.significant);
        REQUIRE(c->test.direction == Direction::Positive);

        cfg.orientation = Orientation::SecondMinusFirst;
        out = compute_reports(build_ice_table(rs, demo(), cfg), cfg, demo());
        c = out.find("m1", cat, PairType::ProAnti, Scope::AllHallucinations);
        REQUIRE(c->counts == DiscordanceCounts{10, 30, 10, 50});
        REQUIRE(c->test.ucs == Approx(-10.0).margin(1e-12));
    }
    SECTION("all correct") {
        std::vector<RawResponse> rs;
        for (unsigned r = 0; r < 8; ++r) add_pair(rs, p, r, Outcome::Correct, Outcome::Correct);
        const AnalysisConfig cfg;
        const auto out = compute_reports(build_ice_table(rs, demo(), cfg), cfg, demo());
        const auto* c = out.find("m1", cat, PairType::ProAnti, Scope::AllHallucinations);
        REQUIRE(c->test.ucs == 0.0);
        REQUIRE(c->test.direction == Direction::NoEffect);
        REQUIRE_FALSE(c->empty);
        for (const auto& r : out.rates) REQUIRE(r.rate == 0.0);
        REQUIRE(out.rates.size() == 4);  // Pro and Anti for the category and for All
    }
    SECTION("empty cells are emitted and flagged") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::Correct, Outcome::Correct);
        const AnalysisConfig cfg;
        const auto out = compute_reports(build_ice_table(rs, demo(), cfg), cfg, demo());
        REQUIRE(out.causal.size() == 6 * 3);  // 5 categories + All, 3 pair types
        REQUIRE(out.empty_cells() == 16);
        const auto* e = out.find("m1", cat, PairType::NonPro, Scope::AllHallucinations);
        REQUIRE(e->empty);
        REQUIRE(e->counts.n_total == 0);
        REQUIRE(e->test.direction == Direction::NoEffect);
        REQUIRE(out.warnings.size() >= 16);
    }
    SECTION("confidence groups average per-trial confidence") {
        std::vector<RawResponse> rs;
        rs.push_back(reply(p, Member::First, 0, Outcome::Correct, "m1", 0.9));
        rs.push_back(reply(p, Member::Second, 0, Outcome::Correct, "m1", 0.7));
        rs.push_back(reply(p, Member::First, 1, Outcome::UnfairnessHallucination, "m1", 0.4));
        rs.push_back(reply(p, Member::Second, 1, Outcome::CommonHallucination, "m1", 0.2));
        const AnalysisConfig cfg;
        const auto out = compute_reports(build_ice_table(rs, demo(), cfg), cfg, demo());
        REQUIRE(out.confidence.size() == 3);
        REQUIRE(out.confidence[0].group == Outcome::Correct);
        REQUIRE(out.confidence[0].mean_confidence == Approx(0.8));
        REQUIRE(out.confidence[0].n == 2);
        REQUIRE(out.confidence[1].mean_confidence == Approx(0.4));
        REQUIRE(out.confidence[2].mean_confidence == Approx(0.2));
    }
    SECTION("missing token probabilities skip confidence with a warning") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::Correct, Outcome::Correct);
        const AnalysisConfig cfg;
        const auto out = compute_reports(build_ice_table(rs, demo(), cfg), cfg, demo());
        REQUIRE(out.confidence.empty());
        REQUIRE(std::any_of(out.warnings.begin(), out.warnings.end(),
                            [](const std::string& w) { return w.find("confidence skipped") != std::string::npos; }));
    }
}

TEST_CASE("report invariants on a synthetic run", "[analysis][property]") {
    const unsigned reps = 3;
    const auto responses = synthetic_run(effect_scm(), reps);
    AnalysisConfig cfg;
    cfg.scopes = {kAllScopes[0], kAllScopes[1], kAllScopes[2]};
    const auto table = build_ice_table(responses, demo(), cfg);
    const auto rs = compute_reports(table, cfg, demo());

    SECTION("totals: every matched pair counted once per repetition") {
        for (Scope s : cfg.scopes) {
            std::size_t by_category = 0;
            std::size_t pooled = 0;
            for (const auto& c : rs.causal) {
                if (c.scope != s) continue;
                REQUIRE(c.counts.consistent());
                (c.social_bias == kAllBiases ? pooled : by_category) += c.counts.n_total;
            }
            REQUIRE(by_category == demo().size() * reps);
            REQUIRE(pooled == demo().size() * reps);
        }
    }
    SECTION("pooled UCS is the test on concatenated per-bias ICEs") {
        for (PairType t : kAllPairTypes) {
            for (Scope s : cfg.scopes) {
                std::vector<IceValue> concat;
                for (const auto& cat : table.categories) {
                    const auto part = table.ices({"effect", cat, t}, s);
                    concat.insert(concat.end(), part.begin(), part.end());
                }
                const auto expect = causal_test(oriented(tally_discordance(concat), cfg.orientation), cfg.alpha);
                const auto* c = rs.find("effect", kAllBiases, t, s);
                REQUIRE(c->test.ucs == expect.ucs);
                REQUIRE(c->test.p_two_tailed == expect.p_two_tailed);
            }
        }
    }
    SECTION("per-cell statistics match the independent oracle") {
        for (const auto& c : rs.causal) {
            const double b = double(c.counts.b);
            const double cc = double(c.counts.c);
            const double x = b + cc == 0 ? 0.0 : (b - cc) * (b - cc) / (b + cc);
            REQUIRE(c.test.statistic_x == Approx(x).epsilon(1e-12));
            REQUIRE(c.test.p_two_tailed == Approx(oracle::chi2_1df_tail_quadrature(x)).margin(1e-6));
            REQUIRE(c.test.significant == (c.test.p_two_tailed < cfg.alpha));
        }
    }
    SECTION("rates are proportions over deduplicated instances") {
        for (const auto& r : rs.rates) {
            REQUIRE(r.n > 0);
            REQUIRE(r.rate * double(r.n) == Approx(double(r.hallucinations)).margin(1e-9));
        }
        // every instance id appears once per repetition
        std::set<std::string> ids;
        for (const auto& p : demo()) {
            ids.insert(p.first.instance_id);
            ids.insert(p.second.instance_id);
        }
        std::size_t n_all = 0;
        for (const auto& r : rs.rates) {
            if (r.social_bias == kAllBiases) n_all += r.n;
        }
        REQUIRE(n_all == ids.size() * reps);
        for (const auto& c : rs.confidence) REQUIRE(c.n > 0);
    }
    SECTION("direction of the planted effect") {
        REQUIRE(rs.find("effect", kAllBiases, PairType::ProAnti, Scope::AllHallucinations)->test.ucs > 0);
        REQUIRE(rs.find("effect", kAllBiases, PairType::ProAnti, Scope::AllHallucinations)->test.significant);
        REQUIRE(rs.find("effect", kAllBiases, PairType::NonPro, Scope::AllHallucinations)->test.ucs < 0);
    }
    SECTION("input order does not matter") {
        auto shuffled = responses;
        std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(8));
        const auto again = compute_reports(build_ice_table(shuffled, demo(), cfg), cfg, demo());
        REQUIRE(report_json(again) == report_json(rs));
    }
    SECTION("alpha changes significance only") {
        AnalysisConfig strict = cfg;
        strict.alpha = 0.01;
        const auto tight = compute_reports(table, strict, demo());
        REQUIRE(tight.causal.size() == rs.causal.size());
        for (std::size_t i = 0; i < rs.causal.size(); ++i) {
            REQUIRE(tight.causal[i].test.ucs == rs.causal[i].test.ucs);
            REQUIRE(tight.causal[i].test.significant == (tight.causal[i].test.p_two_tailed < 0.01));
        }
        REQUIRE(critical_value(0.05) == Approx(3.841459).margin(1e-6));
        REQUIRE(critical_value(0.01) == Approx(6.634897).margin(1e-6));
    }
}

TEST_CASE("majority vote and strict parsing", "[analysis][options]") {
    const auto& p = first_of(PairType::NonAnti);
    const std::string cat = p.first.category;

    SECTION("majority vote collapses repetitions") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::CommonHallucination, Outcome::Correct);
        add_pair(rs, p, 1, Outcome::CommonHallucination, Outcome::UnfairnessHallucination);
        add_pair(rs, p, 2, Outcome::Correct, Outcome::Correct);
        AnalysisConfig cfg;
        cfg.majority_vote = true;
        cfg.orientation = Orientation::FirstMinusSecond;
        const auto t = build_ice_table(rs, demo(), cfg);
        const auto& cell = t.cells.at({"m1", cat, PairType::NonAnti});
        REQUIRE(cell.matched.size() == 1);
        REQUIRE(cell.matched[0].first == Outcome::CommonHallucination);
        REQUIRE(cell.matched[0].second == Outcome::Correct);

        cfg.majority_vote = false;
        REQUIRE(build_ice_table(rs, demo(), cfg).cells.at({"m1", cat, PairType::NonAnti}).matched.size() == 3);
    }
    SECTION("majority ties prefer Correct") {
        REQUIRE(detail::majority({Outcome::CommonHallucination, Outcome::Correct}) == Outcome::Correct);
        REQUIRE(detail::majority({Outcome::UnfairnessHallucination, Outcome::CommonHallucination}) ==
                Outcome::CommonHallucination);
    }
    SECTION("strict parsing turns ambiguous answers invalid") {
        std::vector<RawResponse> rs;
        add_pair(rs, p, 0, Outcome::Correct, Outcome::Correct);
        const char other = rs[0].completion_text[0] == 'A' ? 'B' : 'A';
        rs[0].completion_text += std::string(" or maybe ") + other;
        AnalysisConfig cfg;
        auto t = build_ice_table(rs, demo(), cfg);
        REQUIRE(t.cells.at({"m1", cat, PairType::NonAnti}).matched.size() == 1);
        cfg.strict_parse = true;
        t = build_ice_table(rs, demo(), cfg);
        REQUIRE(t.cells.at({"m1", cat, PairType::NonAnti}).matched.empty());
        REQUIRE(t.cells.at({"m1", cat, PairType::NonAnti}).invalid_trials == 1);
    }
}

TEST_CASE("emit_report formats", "[analysis][emit]") {
    const auto responses = synthetic_run(effect_scm(), 2);
    AnalysisConfig cfg;
    cfg.scopes = {Scope::AllHallucinations, Scope::UnfairnessOnly};
    const auto rs = compute_reports(build_ice_table(responses, demo(), cfg), cfg, demo());
    const auto dir = fresh_dir("emit");
    const auto files = emit_report(rs, dir);
    REQUIRE(files.size() == 5);

    SECTION("csv and json carry identical values") {
        const auto rows = parse_csv(io::read_file(dir / "causal.csv"));
        const Json j = io::read_json_file(dir / "report.json");
        REQUIRE(rows.size() == j["causal"].size() + 1);
        REQUIRE(rows[0] == kCausalColumns);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const Json& obj = j["causal"][i - 1];
            for (std::size_t k = 0; k < kCausalColumns.size(); ++k) {
                const Json& v = obj.at(kCausalColumns[k]);
                if (v.is_number_float()) {
                    REQUIRE(std::stod(rows[i][k]) == v.get<double>());
                } else if (v.is_string()) {
                    REQUIRE(rows[i][k] == v.get<std::string>());
                } else {
                    REQUIRE(rows[i][k] == v.dump());
                }
            }
        }
        const auto rate_rows = parse_csv(io::read_file(dir / "rates_long.csv"));
        REQUIRE(rate_rows.size() == j["rates"].size() + 1);
        REQUIRE(std::stod(rate_rows[1][3]) == j["rates"][0]["rate"].get<double>());
    }
    SECTION("markdown bolds significant cells") {
        const std::string md = io::read_file(dir / "tables.md");
        const auto* sig = rs.find("effect", kAllBiases, PairType::ProAnti, Scope::AllHallucinations);
        REQUIRE(sig->test.significant);
        const std::string bold = "**" + detail::fixed(sig->test.ucs, 1) + "**";
        REQUIRE(md.find("| effect | " + bold + " |") != std::string::npos);
        std::size_t bolded = 0;
        std::size_t significant = 0;
        for (std::size_t pos = md.find("**"); pos != std::string::npos; pos = md.find("**", pos + 2)) ++bolded;
        for (const auto& c : rs.causal) significant += c.test.significant;
        REQUIRE(bolded == 2 * significant);
        REQUIRE(md.find("X > 3.841") != std::string::npos);
    }
    SECTION("byte-identical across runs") {
        const auto dir2 = fresh_dir("emit2");
        emit_report(compute_reports(build_ice_table(responses, demo(), cfg), cfg, demo()), dir2);
        for (const auto& f : files) REQUIRE(io::read_file(f) == io::read_file(dir2 / f.filename()));
    }
    SECTION("empty report set gives header-only files and a warning") {
        const auto edir = fresh_dir("emit_empty");
        std::vector<std::string> logged;
        emit_report(ReportSet{}, edir, {Format::Csv, Format::Json}, [&](const std::string& m) { logged.push_back(m); });
        const std::string header = io::read_file(edir / "causal.csv");
        REQUIRE(header == rows_to_csv(kCausalColumns, {}));
        REQUIRE(std::count(header.begin(), header.end(), '\n') == 1);
        REQUIRE(io::read_file(edir / "rates_long.csv") == "model,social_bias,bias_state,rate,n,hallucinations\n");
        REQUIRE(io::read_json_file(edir / "report.json")["warnings"][0] == "empty report set");
        REQUIRE(logged.size() == 1);
        REQUIRE_FALSE(fs::exists(edir / "tables.md"));
    }
    SECTION("csv quoting") {
        REQUIRE(detail::csv_field("plain") == "plain");
        REQUIRE(detail::csv_field("a,b") == "\"a,b\"");
        REQUIRE(detail::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
        REQUIRE(detail::fixed(-0.04, 1) == "0.0");
    }
    SECTION("format names") {
        REQUIRE(parse_formats({"csv", "md", "json"}).size() == 3);
        REQUIRE_THROWS_AS(parse_formats({"xlsx"}), ConfigError);
    }
}
