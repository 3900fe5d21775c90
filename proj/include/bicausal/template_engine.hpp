#pragma once
// Scenario templates, bias interventions and intervention pairs.
//
// A template is a scenario with two attribute-bearing persons (Person-A via
// [ATTR1], Person-B via [ATTR2]) and at least one attribute-free person. An
// intervention fills the two attribute slots from an AttributePair so that
// the scenario is Pro-stereotype, Anti-stereotype or Non-stereotype, and
// shuffles the four answer options with a seeded permutation.
//
// The three intervention criteria are enforced mechanically:
//   effectiveness  bias state recomputable from the assigned attributes
//   precision      contexts of a pair differ only inside declared slots
//   consistency    equal token counts outside the slots

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "bicausal/errors.hpp"
#include "bicausal/io.hpp"
#include "bicausal/rng.hpp"
#include "bicausal/scm_stats.hpp"

namespace bicausal {

inline constexpr int kTemplateSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Social bias categories. The five built-ins are listed in report order;
// any other non-empty name is accepted as a user-defined category.

inline constexpr std::array<std::string_view, 5> kBuiltinCategories{"Age", "Disability", "SES", "Religion",
                                                                    "Gender"};

inline bool is_builtin_category(std::string_view name) {
    return std::find(kBuiltinCategories.begin(), kBuiltinCategories.end(), name) != kBuiltinCategories.end();
}

// Ordering used for report columns: built-ins first in fixed order, then
// user categories alphabetically.
inline bool category_less(std::string_view a, std::string_view b) {
    const auto rank = [](std::string_view n) {
        auto it = std::find(kBuiltinCategories.begin(), kBuiltinCategories.end(), n);
        return static_cast<std::size_t>(it - kBuiltinCategories.begin());
    };
    const auto ra = rank(a);
    const auto rb = rank(b);
    if (ra != rb) return ra < rb;
    return a < b;
}

// ---------------------------------------------------------------------------
// Persons and options

enum class Person : std::uint8_t { A, B, C, D };

inline constexpr std::array<Person, 4> kAllPersons{Person::A, Person::B, Person::C, Person::D};

constexpr std::string_view to_string(Person p) noexcept {
    switch (p) {
        case Person::A: return "Person-A";
        case Person::B: return "Person-B";
        case Person::C: return "Person-C";
        case Person::D: return "Person-D";
    }
    return "?";
}

inline std::optional<Person> parse_person(std::string_view s) noexcept {
    for (Person p : kAllPersons) {
        if (to_string(p) == s) return p;
    }
    return std::nullopt;
}

constexpr bool bears_attribute(Person p) noexcept { return p == Person::A || p == Person::B; }

constexpr char letter_at(std::size_t index) noexcept { return static_cast<char>('A' + index); }

// Four options in display order; options[i] is shown with letter 'A' + i.
using OptionOrder = std::array<Person, 4>;

inline std::optional<std::size_t> index_of_letter(char letter) noexcept {
    if (letter >= 'A' && letter <= 'D') return static_cast<std::size_t>(letter - 'A');
    return std::nullopt;
}

inline char letter_of(const OptionOrder& options, Person p) {
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (options[i] == p) return letter_at(i);
    }
    throw ValidationError("person " + std::string(to_string(p)) + " missing from options");
}

inline OptionOrder shuffle_options(std::uint64_t seed) {
    return rng::shuffled(OptionOrder{Person::A, Person::B, Person::C, Person::D}, seed);
}

// ---------------------------------------------------------------------------

// Which attribute placement makes the scenario Pro-stereotype.
enum class Alignment : std::uint8_t {
    StereotypedOnCorrect,  // the stereotyped attribute on the correct person is Pro
    StereotypedOnOther,    // the stereotyped attribute on the other bearer is Pro
};

constexpr std::string_view to_string(Alignment a) noexcept {
    return a == Alignment::StereotypedOnCorrect ? "stereotyped_on_correct" : "stereotyped_on_other";
}

inline std::optional<Alignment> parse_alignment(std::string_view s) noexcept {
    if (s == "stereotyped_on_correct") return Alignment::StereotypedOnCorrect;
    if (s == "stereotyped_on_other") return Alignment::StereotypedOnOther;
    return std::nullopt;
}

// Which attribute both persons receive in the Non-stereotype state.
enum class NonMode : std::uint8_t { Neutral, Stereotyped, Both };

inline NonMode parse_non_mode(std::string_view s) {
    if (s == "neutral") return NonMode::Neutral;
    if (s == "stereotyped") return NonMode::Stereotyped;
    if (s == "both") return NonMode::Both;
    throw ConfigError("non_stereotype_attribute must be neutral, stereotyped or both, got '" + std::string(s) + "'");
}

constexpr std::string_view to_string(NonMode m) noexcept {
    switch (m) {
        case NonMode::Neutral: return "neutral";
        case NonMode::Stereotyped: return "stereotyped";
        case NonMode::Both: return "both";
    }
    return "?";
}

struct AttributePair {
    std::string id;
    std::string category;
    std::string stereotyped_attr;
    std::string neutral_attr;
    std::string stereotype_description;
    std::optional<std::string> stereotype_tag;
};

struct Template {
    int schema_version = kTemplateSchemaVersion;
    std::string id;
    std::string category;
    std::string body;
    std::string question;
    std::string correct_person;          // label, validated
    std::vector<std::string> persons;    // labels, validated
    std::string stereotype_alignment;    // raw, validated
    // [WORDk] name -> bias-state key ("Pro", "Anti", "Non", optional
    // "NonStereotyped") -> text
    std::map<std::string, std::map<std::string, std::string>> referents;
    std::optional<std::string> stereotype_tag;
};

// ---------------------------------------------------------------------------
// Body compilation

struct Segment {
    bool is_slot = false;
    std::string text;  // literal text, or slot name without brackets
};

namespace detail {

inline bool is_slot_name(std::string_view s) {
    if (s.empty()) return false;
    std::size_t i = 0;
    while (i < s.size() && s[i] >= 'A' && s[i] <= 'Z') ++i;
    if (i == 0) return false;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    return i == s.size();
}

inline bool is_word_slot(std::string_view s) {
    return s.size() > 4 && s.substr(0, 4) == "WORD" && is_slot_name(s) &&
           std::all_of(s.begin() + 4, s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

}  // namespace detail

// Splits a body into literal and slot segments. Anything of the form
// [UPPER123] is a slot marker; other brackets are literal text.
inline std::vector<Segment> compile_body(std::string_view body) {
    std::vector<Segment> out;
    std::string literal;
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '[') {
            const auto close = body.find(']', i + 1);
            if (close != std::string_view::npos) {
                const auto name = body.substr(i + 1, close - i - 1);
                if (detail::is_slot_name(name)) {
                    if (!literal.empty()) out.push_back({false, std::move(literal)});
                    literal.clear();
                    out.push_back({true, std::string(name)});
                    i = close + 1;
                    continue;
                }
            }
        }
        literal.push_back(body[i]);
        ++i;
    }
    if (!literal.empty()) out.push_back({false, std::move(literal)});
    return out;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string criterion;  // effectiveness | precision | consistency | schema
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
    std::string template_id;
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }

    bool has(std::string_view message_fragment) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) {
            return v.message.find(message_fragment) != std::string::npos;
        });
    }

    std::string summary() const {
        std::string out = "template '" + template_id + "':";
        for (const auto& v : violations) out += "\n  " + v.criterion + ": " + v.message;
        return out;
    }
};

inline constexpr std::array<std::string_view, 4> kReferentStateKeys{"Pro", "Anti", "Non", "NonStereotyped"};

inline ValidationReport validate_template(const Template& t) {
    ValidationReport report{t.id, {}};
    auto add = [&](std::string_view criterion, std::string message) {
        report.violations.push_back({std::string(criterion), std::move(message)});
    };

    if (t.schema_version != kTemplateSchemaVersion) {
        add("schema", "unsupported schema_version " + std::to_string(t.schema_version));
    }
    if (t.id.empty()) add("schema", "id must be non-empty");
    if (t.category.empty()) add("schema", "category must be non-empty");
    if (t.question.empty()) add("schema", "question must be non-empty");

    // Slots
    const auto segments = compile_body(t.body);
    std::map<std::string, int> slot_counts;
    for (const auto& s : segments) {
        if (s.is_slot) ++slot_counts[s.text];
    }
    for (std::string_view attr : {"ATTR1", "ATTR2"}) {
        const int n = slot_counts.count(std::string(attr)) ? slot_counts[std::string(attr)] : 0;
        if (n == 0) {
            add("precision", "precision: intervention slot absent ([" + std::string(attr) + "])");
        } else if (n > 1) {
            add("precision", "intervention slot [" + std::string(attr) + "] appears " + std::to_string(n) +
                                 " times; expected exactly once");
        }
    }
    for (const auto& [name, count] : slot_counts) {
        if (name == "ATTR1" || name == "ATTR2") continue;
        if (!detail::is_word_slot(name)) {
            add("precision", "unknown slot marker [" + name + "]");
            continue;
        }
        auto it = t.referents.find(name);
        if (it == t.referents.end()) {
            add("consistency", "referent slot [" + name + "] has no declared values");
            continue;
        }
        for (std::string_view key : {"Pro", "Anti", "Non"}) {
            if (!it->second.count(std::string(key))) {
                add("consistency", "referent slot [" + name + "] lacks a value for " + std::string(key));
            }
        }
    }
    for (const auto& [name, values] : t.referents) {
        if (!slot_counts.count(name)) add("consistency", "referent '" + name + "' declared but not used in body");
        for (const auto& [key, _] : values) {
            if (std::find(kReferentStateKeys.begin(), kReferentStateKeys.end(), key) == kReferentStateKeys.end()) {
                add("consistency", "referent '" + name + "' has unknown state key '" + key + "'");
            }
        }
    }

    // Persons
    std::set<std::string> seen;
    bool has_a = false, has_b = false, has_free = false;
    for (const auto& label : t.persons) {
        const auto p = parse_person(label);
        if (!p) {
            add("schema", "unknown person label '" + label + "'");
            continue;
        }
        if (!seen.insert(label).second) add("schema", "duplicate person label '" + label + "'");
        has_a |= *p == Person::A;
        has_b |= *p == Person::B;
        has_free |= !bears_attribute(*p);
    }
    if (!has_a || !has_b) add("schema", "persons must include Person-A and Person-B");
    if (!has_free) add("effectiveness", "at least one attribute-free person (Person-C or Person-D) is required");
    if (t.persons.size() != 4 || seen.size() != 4) {
        add("schema", "exactly four distinct option persons are required");
    }

    const auto correct = parse_person(t.correct_person);
    if (!correct) {
        add("schema", "unknown correct_person '" + t.correct_person + "'");
    } else if (!bears_attribute(*correct)) {
        add("effectiveness", "correct person must bear an attribute");
    }
    if (!parse_alignment(t.stereotype_alignment)) {
        add("effectiveness", "stereotype_alignment must be stereotyped_on_correct or stereotyped_on_other");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Instances and pairs

struct ScenarioInstance {
    std::string instance_id;
    std::string template_id;
    std::string group_id;  // template + attribute pair; shared by all states
    std::string category;
    BiasState bias_state = BiasState::Non;
    bool non_stereotyped_variant = false;  // Non state built from the stereotyped attribute
    std::string context;
    std::string question;
    OptionOrder options{};
    Person correct_person = Person::A;
    char correct_letter = 'A';
    std::map<Person, std::string> person_attributes;  // Person-A and Person-B only
    std::optional<Person> unfair_counterpart;
    std::uint64_t shuffle_seed = 0;
    std::string stereotyped_attr;
    std::string neutral_attr;
    Alignment alignment = Alignment::StereotypedOnCorrect;
    std::map<std::string, std::string> slot_fills;

    friend bool operator==(const ScenarioInstance&, const ScenarioInstance&) = default;
};

struct InterventionPair {
    std::string pair_id;
    PairType pair_type = PairType::ProAnti;
    ScenarioInstance first;
    ScenarioInstance second;

    friend bool operator==(const InterventionPair&, const InterventionPair&) = default;
};

namespace detail {

inline bool tags_compatible(const Template& t, const AttributePair& a) {
    return !t.stereotype_tag || !a.stereotype_tag || *t.stereotype_tag == *a.stereotype_tag;
}

inline std::string state_suffix(BiasState s, bool non_stereotyped_variant) {
    std::string out(to_string(s));
    if (non_stereotyped_variant) out += "~stereotyped";
    return out;
}

inline std::string render(const std::vector<Segment>& segments, const std::map<std::string, std::string>& fills) {
    std::string out;
    for (const auto& s : segments) {
        if (!s.is_slot) {
            out += s.text;
        } else {
            out += fills.at(s.text);
        }
    }
    return out;
}

}  // namespace detail

inline bool attribute_matches(const Template& t, const AttributePair& a) {
    return t.category == a.category && detail::tags_compatible(t, a);
}

// Sets B to `target` for one template and attribute pair.
//
// For Non, `non_stereotyped_variant` selects the stereotyped attribute on
// both persons instead of the neutral one.
inline ScenarioInstance apply_intervention(const Template& t, const AttributePair& pair, BiasState target,
                                           std::uint64_t seed, bool non_stereotyped_variant = false) {
    const auto report = validate_template(t);
    if (!report.ok()) throw ValidationError(report.summary());
    if (pair.category != t.category) {
        throw ValidationError("attribute pair '" + pair.id + "' has category " + pair.category + " but template '" +
                              t.id + "' is " + t.category);
    }
    if (pair.stereotyped_attr == pair.neutral_attr) {
        throw ValidationError("attribute pair '" + pair.id + "' uses the same text for both attributes");
    }
    if (target != BiasState::Pro && target != BiasState::Anti && target != BiasState::Non) {
        throw ValidationError("unknown target bias state");
    }

    const Person correct = *parse_person(t.correct_person);
    const Person other = correct == Person::A ? Person::B : Person::A;
    const Alignment alignment = *parse_alignment(t.stereotype_alignment);
    const bool variant = target == BiasState::Non && non_stereotyped_variant;

    ScenarioInstance inst;
    inst.template_id = t.id;
    inst.group_id = t.id + "/" + pair.id;
    inst.instance_id = inst.group_id + "/" + detail::state_suffix(target, variant);
    inst.category = t.category;
    inst.bias_state = target;
    inst.non_stereotyped_variant = variant;
    inst.question = t.question;
    inst.correct_person = correct;
    inst.shuffle_seed = seed;
    inst.stereotyped_attr = pair.stereotyped_attr;
    inst.neutral_attr = pair.neutral_attr;
    inst.alignment = alignment;

    // Pro puts the stereotyped attribute where the alignment says; Anti swaps.
    const bool stereo_on_correct_is_pro = alignment == Alignment::StereotypedOnCorrect;
    switch (target) {
        case BiasState::Pro:
        case BiasState::Anti: {
            const bool stereo_on_correct = (target == BiasState::Pro) == stereo_on_correct_is_pro;
            inst.person_attributes[correct] = stereo_on_correct ? pair.stereotyped_attr : pair.neutral_attr;
            inst.person_attributes[other] = stereo_on_correct ? pair.neutral_attr : pair.stereotyped_attr;
            inst.unfair_counterpart = other;
            break;
        }
        case BiasState::Non: {
            const auto& both = variant ? pair.stereotyped_attr : pair.neutral_attr;
            inst.person_attributes[correct] = both;
            inst.person_attributes[other] = both;
            break;
        }
    }

    inst.slot_fills["ATTR1"] = inst.person_attributes[Person::A];
    inst.slot_fills["ATTR2"] = inst.person_attributes[Person::B];
    const std::string state_key = variant ? "NonStereotyped" : std::string(to_string(target));
    for (const auto& [name, values] : t.referents) {
        auto it = values.find(state_key);
        if (it == values.end() && variant) it = values.find("Non");
        inst.slot_fills[name] = it->second;
    }

    inst.context = detail::render(compile_body(t.body), inst.slot_fills);
    inst.options = shuffle_options(seed);
    inst.correct_letter = letter_of(inst.options, correct);
    return inst;
}

inline std::string pair_id_for(const std::string& group_id, PairType type, bool non_stereotyped_variant) {
    std::string out = group_id + "/" + std::string(to_string(type));
    if (non_stereotyped_variant) out += "~stereotyped";
    return out;
}

// One instance per bias state, then the three ordered pairs. With
// NonMode::Both the stereotyped Non variant contributes two extra pairs.
inline std::vector<InterventionPair> build_pairs(const Template& t, const AttributePair& pair, std::uint64_t seed,
                                                 NonMode non_mode = NonMode::Neutral) {
    auto instance_seed = [&](std::string_view label) { return rng::derive(seed, label); };
    const auto pro = apply_intervention(t, pair, BiasState::Pro, instance_seed("Pro"));
    const auto anti = apply_intervention(t, pair, BiasState::Anti, instance_seed("Anti"));

    std::vector<InterventionPair> out;
    const std::string& group = pro.group_id;
    out.push_back({pair_id_for(group, PairType::ProAnti, false), PairType::ProAnti, pro, anti});
    auto emit_non = [&](const ScenarioInstance& non, bool suffixed) {
        out.push_back({pair_id_for(group, PairType::NonPro, suffixed), PairType::NonPro, non, pro});
        out.push_back({pair_id_for(group, PairType::NonAnti, suffixed), PairType::NonAnti, non, anti});
    };
    switch (non_mode) {
        case NonMode::Neutral:
            emit_non(apply_intervention(t, pair, BiasState::Non, instance_seed("Non")), false);
            break;
        case NonMode::Stereotyped:
            emit_non(apply_intervention(t, pair, BiasState::Non, instance_seed("Non"), true), false);
            break;
        case NonMode::Both:
            emit_non(apply_intervention(t, pair, BiasState::Non, instance_seed("Non")), false);
            emit_non(apply_intervention(t, pair, BiasState::Non, instance_seed("Non~stereotyped"), true), true);
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mechanized intervention criteria

namespace detail {

struct SlotSpan {
    std::string slot;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Matches `context` against the template skeleton, allowing each slot to
// take any of its declared candidate values. Returns the slot spans of the
// first successful parse.
inline std::optional<std::vector<SlotSpan>> match_skeleton(
    std::string_view context, const std::vector<Segment>& segments,
    const std::map<std::string, std::vector<std::string>>& candidates) {
    std::vector<SlotSpan> spans;
    // depth-first with backtracking; skeletons are short
    std::function<bool(std::size_t, std::size_t)> go = [&](std::size_t seg, std::size_t pos) -> bool {
        if (seg == segments.size()) return pos == context.size();
        const auto& s = segments[seg];
        if (!s.is_slot) {
            if (context.substr(pos, s.text.size()) != s.text) return false;
            return go(seg + 1, pos + s.text.size());
        }
        auto it = candidates.find(s.text);
        if (it == candidates.end()) return false;
        for (const auto& value : it->second) {
            if (context.substr(pos, value.size()) != value) continue;
            spans.push_back({s.text, pos, pos + value.size()});
            if (go(seg + 1, pos + value.size())) return true;
            spans.pop_back();
        }
        return false;
    };
    if (!go(0, 0)) return std::nullopt;
    return spans;
}

inline std::map<std::string, std::vector<std::string>> slot_candidates(const Template& t, const ScenarioInstance& i) {
    std::map<std::string, std::vector<std::string>> out;
    out["ATTR1"] = {i.stereotyped_attr, i.neutral_attr};
    out["ATTR2"] = {i.stereotyped_attr, i.neutral_attr};
    for (const auto& [name, values] : t.referents) {
        for (const auto& [_, v] : values) out[name].push_back(v);
    }
    // try longer candidates first so a prefix never shadows the real fill
    for (auto& [_, vs] : out) {
        std::sort(vs.begin(), vs.end(), [](const std::string& a, const std::string& b) {
            return a.size() != b.size() ? a.size() > b.size() : a < b;
        });
        vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    }
    return out;
}

inline std::size_t tokens_outside(std::string_view text, const std::vector<SlotSpan>& spans) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const bool overlaps = std::any_of(spans.begin(), spans.end(), [&](const SlotSpan& s) {
            return start < s.end && s.begin < i;
        });
        if (!overlaps) ++count;
    }
    return count;
}

}  // namespace detail

// Recomputes B from the attributes actually assigned to the two bearers.
inline BiasState recompute_bias_state(const ScenarioInstance& inst) {
    const Person other = inst.correct_person == Person::A ? Person::B : Person::A;
    const auto& on_correct = inst.person_attributes.at(inst.correct_person);
    const auto& on_other = inst.person_attributes.at(other);
    if (on_correct == on_other) return BiasState::Non;
    const bool stereo_on_correct = on_correct == inst.stereotyped_attr;
    const bool pro = stereo_on_correct == (inst.alignment == Alignment::StereotypedOnCorrect);
    return pro ? BiasState::Pro : BiasState::Anti;
}

struct CriteriaResult {
    bool effectiveness = true;
    bool precision = true;
    bool consistency = true;
    std::vector<std::string> failures;

    bool ok() const noexcept { return effectiveness && precision && consistency; }
};

inline bool instance_well_formed(const ScenarioInstance& i, std::string* why) {
    std::set<Person> distinct(i.options.begin(), i.options.end());
    if (distinct.size() != 4) {
        if (why) *why = i.instance_id + ": options are not four distinct persons";
        return false;
    }
    const auto idx = index_of_letter(i.correct_letter);
    if (!idx || i.options[*idx] != i.correct_person) {
        if (why) *why = i.instance_id + ": correct_letter does not point at the correct person";
        return false;
    }
    if ((i.bias_state == BiasState::Non) == i.unfair_counterpart.has_value()) {
        if (why) *why = i.instance_id + ": unfair_counterpart presence disagrees with bias state";
        return false;
    }
    if (i.context.find('[') != std::string::npos) {
        for (const auto& seg : compile_body(i.context)) {
            if (seg.is_slot) {
                if (why) *why = i.instance_id + ": unsubstituted slot [" + seg.text + "]";
                return false;
            }
        }
    }
    return true;
}

// Checks one generated pair against the template it came from.
inline CriteriaResult check_intervention_criteria(const Template& t, const InterventionPair& p) {
    CriteriaResult r;
    auto fail = [&](bool& flag, std::string msg) {
        flag = false;
        r.failures.push_back(p.pair_id + ": " + std::move(msg));
    };

    // Effectiveness
    const auto [s1, s2] = states_of(p.pair_type);
    if (p.first.bias_state != s1 || p.second.bias_state != s2) fail(r.effectiveness, "bias states do not match pair type");
    if (p.first.template_id != p.second.template_id || p.first.template_id != t.id) {
        fail(r.effectiveness, "members come from different templates");
    }
    for (const auto* inst : {&p.first, &p.second}) {
        if (recompute_bias_state(*inst) != inst->bias_state) {
            fail(r.effectiveness, inst->instance_id + ": attributes imply " +
                                      std::string(to_string(recompute_bias_state(*inst))));
        }
        std::string why;
        if (!instance_well_formed(*inst, &why)) fail(r.effectiveness, why);
    }

    // Precision: both contexts parse against the same skeleton, and the
    // attribute slots hold exactly the assigned attributes.
    const auto segments = compile_body(t.body);
    const auto m1 = detail::match_skeleton(p.first.context, segments, detail::slot_candidates(t, p.first));
    const auto m2 = detail::match_skeleton(p.second.context, segments, detail::slot_candidates(t, p.second));
    if (!m1 || !m2) {
        fail(r.precision, "context differs from the template outside its slots");
    } else {
        for (const auto& [inst, spans] : {std::pair{&p.first, &*m1}, std::pair{&p.second, &*m2}}) {
            for (const auto& span : *spans) {
                const auto got = inst->context.substr(span.begin, span.end - span.begin);
                if (span.slot == "ATTR1" && got != inst->person_attributes.at(Person::A)) {
                    fail(r.precision, inst->instance_id + ": [ATTR1] holds '" + got + "'");
                }
                if (span.slot == "ATTR2" && got != inst->person_attributes.at(Person::B)) {
                    fail(r.precision, inst->instance_id + ": [ATTR2] holds '" + got + "'");
                }
            }
        }
        if (p.first.question != p.second.question) fail(r.precision, "questions differ");

        // Consistency
        const auto n1 = detail::tokens_outside(p.first.context, *m1);
        const auto n2 = detail::tokens_outside(p.second.context, *m2);
        if (n1 != n2) {
            fail(r.consistency, "token counts outside slots differ (" + std::to_string(n1) + " vs " +
                                    std::to_string(n2) + ")");
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Dataset generation

struct GenerationConfig {
    std::uint64_t master_seed = 0;
    NonMode non_mode = NonMode::Neutral;
    std::optional<std::size_t> limit;  // truncate after this many pairs
    unsigned workers = 1;
};

struct TemplateRejected : ValidationError {
    explicit TemplateRejected(std::vector<ValidationReport> reports)
        : ValidationError(make_message(reports)), reports_(std::move(reports)) {}

    const std::vector<ValidationReport>& reports() const noexcept { return reports_; }

private:
    static std::string make_message(const std::vector<ValidationReport>& reports) {
        std::string out = "template validation failed";
        for (const auto& r : reports) out += "\n" + r.summary();
        return out;
    }
    std::vector<ValidationReport> reports_;
};

// Seed of one (template, attribute pair) group. Keyed by ids so that adding
// templates or attributes never perturbs existing instances.
inline std::uint64_t group_seed(std::uint64_t master, std::string_view template_id, std::string_view attribute_id) {
    return rng::derive(rng::derive(master, template_id), attribute_id);
}

// Output ordered by (template id, attribute id, pair type).
inline std::vector<InterventionPair> generate_dataset(std::vector<Template> templates,
                                                      std::vector<AttributePair> registry,
                                                      const GenerationConfig& cfg) {
    std::vector<ValidationReport> bad;
    for (const auto& t : templates) {
        auto rep = validate_template(t);
        if (!rep.ok()) bad.push_back(std::move(rep));
    }
    if (!bad.empty()) throw TemplateRejected(std::move(bad));
    {
        std::set<std::string> ids;
        for (const auto& t : templates) {
            if (!ids.insert(t.id).second) throw ValidationError("duplicate template id '" + t.id + "'");
        }
        ids.clear();
        for (const auto& a : registry) {
            if (!ids.insert(a.id).second) throw ValidationError("duplicate attribute pair id '" + a.id + "'");
        }
    }
    std::sort(templates.begin(), templates.end(), [](const Template& a, const Template& b) { return a.id < b.id; });
    std::sort(registry.begin(), registry.end(),
              [](const AttributePair& a, const AttributePair& b) { return a.id < b.id; });

    for (const auto& t : templates) {
        const bool any = std::any_of(registry.begin(), registry.end(),
                                     [&](const AttributePair& a) { return attribute_matches(t, a); });
        if (!any) {
            throw ValidationError("no attribute pairs registered for category " + t.category + " (template '" +
                                  t.id + "')");
        }
    }

    auto per_template = [&](const Template& t) {
        std::vector<InterventionPair> out;
        for (const auto& a : registry) {
            if (!attribute_matches(t, a)) continue;
            auto pairs = build_pairs(t, a, group_seed(cfg.master_seed, t.id, a.id), cfg.non_mode);
            for (auto& p : pairs) out.push_back(std::move(p));
        }
        return out;
    };

    std::vector<std::vector<InterventionPair>> chunks(templates.size());
    const unsigned workers = std::max(1u, cfg.workers);
    for (std::size_t start = 0; start < templates.size(); start += workers) {
        std::vector<std::future<std::vector<InterventionPair>>> running;
        const std::size_t stop = std::min(templates.size(), start + workers);
        for (std::size_t i = start; i < stop; ++i) {
            running.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, per_template,
                                         std::cref(templates[i])));
        }
        for (std::size_t i = start; i < stop; ++i) chunks[i] = running[i - start].get();
    }

    std::vector<InterventionPair> out;
    for (auto& c : chunks) {
        for (auto& p : c) {
            if (cfg.limit && out.size() >= *cfg.limit) break;
            out.push_back(std::move(p));
        }
    }
    if (out.empty()) throw ValidationError("no data generated");
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline Json to_json(const AttributePair& a) {
    Json j;
    j["id"] = a.id;
    j["category"] = a.category;
    j["stereotyped_attr"] = a.stereotyped_attr;
    j["neutral_attr"] = a.neutral_attr;
    j["stereotype_description"] = a.stereotype_description;
    if (a.stereotype_tag) j["stereotype"] = *a.stereotype_tag;
    return j;
}

inline AttributePair attribute_pair_from_json(const Json& j) {
    try {
        AttributePair a;
        a.category = j.at("category").get<std::string>();
        a.stereotyped_attr = j.at("stereotyped_attr").get<std::string>();
        a.neutral_attr = j.at("neutral_attr").get<std::string>();
        a.stereotype_description = j.value("stereotype_description", std::string{});
        a.id = j.value("id", a.category + ":" + a.stereotyped_attr + "|" + a.neutral_attr);
        if (j.contains("stereotype")) a.stereotype_tag = j.at("stereotype").get<std::string>();
        if (a.stereotyped_attr.empty() || a.neutral_attr.empty()) {
            throw ValidationError("attribute pair '" + a.id + "' has an empty attribute");
        }
        if (a.stereotyped_attr == a.neutral_attr) {
            throw ValidationError("attribute pair '" + a.id + "': stereotyped_attr equals neutral_attr");
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("attribute pair: ") + e.what());
    }
}

inline Json to_json(const Template& t) {
    Json j;
    j["schema_version"] = t.schema_version;
    j["id"] = t.id;
    j["category"] = t.category;
    if (t.stereotype_tag) j["stereotype"] = *t.stereotype_tag;
    j["body"] = t.body;
    j["question"] = t.question;
    j["correct_person"] = t.correct_person;
    j["persons"] = t.persons;
    j["stereotype_alignment"] = t.stereotype_alignment;
    Json refs = Json::object();
    for (const auto& [name, values] : t.referents) {
        Json v = Json::object();
        for (const auto& [k, s] : values) v[k] = s;
        refs[name] = v;
    }
    j["referents"] = refs;
    return j;
}

inline Template template_from_json(const Json& j) {
    try {
        Template t;
        if (!j.contains("schema_version")) throw ValidationError("template is missing schema_version");
        t.schema_version = j.at("schema_version").get<int>();
        t.id = j.at("id").get<std::string>();
        t.category = j.at("category").get<std::string>();
        t.body = j.at("body").get<std::string>();
        t.question = j.at("question").get<std::string>();
        t.correct_person = j.at("correct_person").get<std::string>();
        t.persons = j.value("persons", std::vector<std::string>{"Person-A", "Person-B", "Person-C", "Person-D"});
        t.stereotype_alignment = j.at("stereotype_alignment").get<std::string>();
        if (j.contains("stereotype")) t.stereotype_tag = j.at("stereotype").get<std::string>();
        if (j.contains("referents")) {
            for (const auto& [name, values] : j.at("referents").items()) {
                for (const auto& [k, s] : values.items()) t.referents[name][k] = s.get<std::string>();
            }
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        const std::string id = j.is_object() && j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                                                          : std::string("<unknown>");
        throw ValidationError("template '" + id + "': " + e.what());
    }
}

inline Json to_json(const ScenarioInstance& i) {
    Json j;
    j["instance_id"] = i.instance_id;
    j["template_id"] = i.template_id;
    j["group_id"] = i.group_id;
    j["category"] = i.category;
    j["bias_state"] = to_string(i.bias_state);
    if (i.non_stereotyped_variant) j["non_stereotyped_variant"] = true;
    j["context"] = i.context;
    j["question"] = i.question;
    Json opts = Json::array();
    for (std::size_t k = 0; k < i.options.size(); ++k) {
        opts.push_back({{"letter", std::string(1, letter_at(k))}, {"person", to_string(i.options[k])}});
    }
    j["options"] = opts;
    j["correct_person"] = to_string(i.correct_person);
    j["correct_letter"] = std::string(1, i.correct_letter);
    Json attrs = Json::object();
    for (const auto& [p, a] : i.person_attributes) attrs[std::string(to_string(p))] = a;
    j["person_attributes"] = attrs;
    j["unfair_counterpart"] = i.unfair_counterpart ? Json(to_string(*i.unfair_counterpart)) : Json(nullptr);
    j["shuffle_seed"] = i.shuffle_seed;
    j["stereotyped_attr"] = i.stereotyped_attr;
    j["neutral_attr"] = i.neutral_attr;
    j["stereotype_alignment"] = to_string(i.alignment);
    Json fills = Json::object();
    for (const auto& [k, v] : i.slot_fills) fills[k] = v;
    j["slot_fills"] = fills;
    return j;
}

inline Person person_from_json(const Json& j) {
    const auto p = parse_person(j.get<std::string>());
    if (!p) throw ValidationError("unknown person label '" + j.get<std::string>() + "'");
    return *p;
}

inline ScenarioInstance instance_from_json(const Json& j) {
    ScenarioInstance i;
    i.instance_id = j.at("instance_id").get<std::string>();
    i.template_id = j.at("template_id").get<std::string>();
    i.group_id = j.value("group_id", i.template_id);
    i.category = j.at("category").get<std::string>();
    i.bias_state = parse_bias_state(j.at("bias_state").get<std::string>());
    i.non_stereotyped_variant = j.value("non_stereotyped_variant", false);
    i.context = j.at("context").get<std::string>();
    i.question = j.at("question").get<std::string>();
    const auto& opts = j.at("options");
    if (!opts.is_array() || opts.size() != 4) throw ValidationError(i.instance_id + ": options must have 4 entries");
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& o = opts[k];
        if (o.at("letter").get<std::string>() != std::string(1, letter_at(k))) {
            throw ValidationError(i.instance_id + ": option letters must run A..D");
        }
        i.options[k] = person_from_json(o.at("person"));
    }
    i.correct_person = person_from_json(j.at("correct_person"));
    const auto letter = j.at("correct_letter").get<std::string>();
    if (letter.size() != 1) throw ValidationError(i.instance_id + ": bad correct_letter");
    i.correct_letter = letter[0];
    for (const auto& [k, v] : j.at("person_attributes").items()) {
        const auto p = parse_person(k);
        if (!p) throw ValidationError(i.instance_id + ": unknown person '" + k + "'");
        i.person_attributes[*p] = v.get<std::string>();
    }
    if (!j.at("unfair_counterpart").is_null()) i.unfair_counterpart = person_from_json(j.at("unfair_counterpart"));
    i.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    i.stereotyped_attr = j.at("stereotyped_attr").get<std::string>();
    i.neutral_attr = j.at("neutral_attr").get<std::string>();
    const auto al = parse_alignment(j.at("stereotype_alignment").get<std::string>());
    if (!al) throw ValidationError(i.instance_id + ": bad stereotype_alignment");
    i.alignment = *al;
    if (j.contains("slot_fills")) {
        for (const auto& [k, v] : j.at("slot_fills").items()) i.slot_fills[k] = v.get<std::string>();
    }
    std::string why;
    if (!instance_well_formed(i, &why)) throw ValidationError(why);
    return i;
}

inline Json to_json(const InterventionPair& p) {
    Json j;
    j["pair_id"] = p.pair_id;
    j["pair_type"] = to_string(p.pair_type);
    j["first"] = to_json(p.first);
    j["second"] = to_json(p.second);
    return j;
}

inline InterventionPair pair_from_json(const Json& j) {
    InterventionPair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.pair_type = parse_pair_type(j.at("pair_type").get<std::string>());
    p.first = instance_from_json(j.at("first"));
    p.second = instance_from_json(j.at("second"));
    const auto [s1, s2] = states_of(p.pair_type);
    if (p.first.bias_state != s1 || p.second.bias_state != s2) {
        throw ValidationError(p.pair_id + ": member bias states do not match " + std::string(to_string(p.pair_type)));
    }
    if (p.first.template_id != p.second.template_id) {
        throw ValidationError(p.pair_id + ": members come from different templates");
    }
    return p;
}

// One InterventionPair per line, UTF-8, '\n' terminated.
inline void write_dataset(std::ostream& out, const std::vector<InterventionPair>& pairs) {
    for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

inline std::string dataset_to_string(const std::vector<InterventionPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += to_json(p).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<InterventionPair> read_dataset(const std::filesystem::path& path) {
    std::vector<InterventionPair> out;
    io::for_each_jsonl(path, [&](std::size_t line, const Json& j) {
        try {
            out.push_back(pair_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line, e.what());
        } catch (const ValidationError& e) {
            throw ParseError(line, e.what());
        }
    });
    return out;
}

// Templates: every *.json file in a directory (sorted), or a single file.
inline std::vector<Template> load_templates(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& e : std::filesystem::directory_iterator(path)) {
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    std::vector<Template> out;
    for (const auto& f : files) out.push_back(template_from_json(io::read_json_file(f)));
    return out;
}

// Attribute registry: {"schema_version": 1, "attribute_pairs": [...]}.
inline std::vector<AttributePair> load_attribute_registry(const std::filesystem::path& path) {
    const Json j = io::read_json_file(path);
    const Json& list = j.is_array() ? j : j.at("attribute_pairs");
    std::vector<AttributePair> out;
    for (const auto& a : list) out.push_back(attribute_pair_from_json(a));
    return out;
}

}  // namespace bicausal
