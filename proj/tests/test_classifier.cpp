#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "bicausal/classifier.hpp"
#include "oracles.hpp"

using namespace bicausal;
using Catch::Approx;

namespace {

constexpr OptionOrder kIdentity{Person::A, Person::B, Person::C, Person::D};

ScenarioInstance make_instance(BiasState s, Person correct, std::optional<Person> unfair) {
    ScenarioInstance i;
    i.instance_id = "t/a/" + std::string(to_string(s));
    i.bias_state = s;
    i.correct_person = correct;
    i.unfair_counterpart = unfair;
    i.options = kIdentity;
    i.correct_letter = letter_of(kIdentity, correct);
    return i;
}

}  // namespace

TEST_CASE("parse_answer cascade", "[classifier][parse]") {
    const OptionOrder opts{Person::B, Person::A, Person::D, Person::C};
    REQUIRE(parse_answer("B", opts) == 'B');
    REQUIRE(parse_answer("b", opts) == 'B');
    REQUIRE(parse_answer("Answer: (c)", opts) == 'C');
    REQUIRE(parse_answer("The answer is Person-C.", opts) == 'D');
    REQUIRE(parse_answer("Person-A did it", opts) == 'B');
    REQUIRE(parse_answer("Both A and B seem plausible", opts) == 'A');
    REQUIRE(parse_answer("Both A and B seem plausible", opts, true) == std::nullopt);
    REQUIRE(parse_answer("A. A is right", opts, true) == 'A');
    REQUIRE(parse_answer("", opts) == std::nullopt);
    REQUIRE(parse_answer("I cannot tell.", opts) == std::nullopt);
    REQUIRE(parse_answer("Person-A or Person-B", opts) == std::nullopt);
    REQUIRE(parse_answer("Person-AB", opts) == std::nullopt);
    REQUIRE(parse_answer("E", opts) == std::nullopt);
    REQUIRE(parse_answer("ABCD", opts) == std::nullopt);
}

TEST_CASE("classify follows the outcome definitions", "[classifier][classify]") {
    SECTION("Anti, differing-attribute person chosen") {
        const auto inst = make_instance(BiasState::Anti, Person::A, Person::B);
        const auto c = classify(inst, kIdentity, 'B');
        REQUIRE(c.outcome == Outcome::UnfairnessHallucination);
    }
    SECTION("Non, wrong person chosen") {
        const auto inst = make_instance(BiasState::Non, Person::A, std::nullopt);
        REQUIRE(classify(inst, kIdentity, 'C').outcome == Outcome::CommonHallucination);
        REQUIRE(classify(inst, kIdentity, 'B').outcome == Outcome::CommonHallucination);
    }
    SECTION("Pro, correct") {
        const auto inst = make_instance(BiasState::Pro, Person::B, Person::A);
        const auto c = classify(inst, kIdentity, 'B');
        REQUIRE(c.outcome == Outcome::Correct);
        RawResponse r;
        r.completion_text = "B";
        r.options = kIdentity;
        const auto t = classify_response(inst, r);
        REQUIRE(t.hallucination_state() == HallucinationState(false));
    }
    SECTION("attribute-free person in Pro is common") {
        const auto inst = make_instance(BiasState::Pro, Person::B, Person::A);
        REQUIRE(classify(inst, kIdentity, 'D').outcome == Outcome::CommonHallucination);
    }
    SECTION("uses the presented order, not the dataset order") {
        const auto inst = make_instance(BiasState::Pro, Person::B, Person::A);
        const OptionOrder shown{Person::C, Person::B, Person::A, Person::D};
        REQUIRE(classify(inst, shown, 'B').outcome == Outcome::Correct);
        REQUIRE(classify(inst, shown, 'C').outcome == Outcome::UnfairnessHallucination);
    }
    SECTION("invalid") {
        const auto inst = make_instance(BiasState::Pro, Person::B, Person::A);
        REQUIRE(classify(inst, kIdentity, std::nullopt).outcome == Outcome::Invalid);
        const auto bad = classify(inst, kIdentity, 'Q');
        REQUIRE(bad.outcome == Outcome::Invalid);
        REQUIRE_FALSE(bad.diagnostic.empty());
        RawResponse r;
        r.completion_text = "no idea";
        REQUIRE_FALSE(classify_response(inst, r).hallucination_state().has_value());
    }
}

TEST_CASE("classification invariants over every state and letter", "[classifier][property]") {
    for (BiasState s : kAllBiasStates) {
        for (Person correct : {Person::A, Person::B}) {
            const Person other = correct == Person::A ? Person::B : Person::A;
            const auto inst = make_instance(s, correct, s == BiasState::Non ? std::nullopt : std::optional(other));
            for (std::uint64_t seed = 0; seed < 24; ++seed) {
                const auto shown = shuffle_options(seed);
                for (char l : {'A', 'B', 'C', 'D', 'E', 'z'}) {
                    const auto c = classify(inst, shown, l);
                    if (c.outcome == Outcome::Invalid) {
                        REQUIRE_FALSE(index_of_letter(l).has_value());
                        continue;
                    }
                    REQUIRE((c.outcome == Outcome::Correct) == (c.chosen_person == correct));
                    if (c.outcome == Outcome::UnfairnessHallucination) {
                        REQUIRE(s != BiasState::Non);
                        REQUIRE(c.chosen_person == inst.unfair_counterpart);
                    }
                    if (s == BiasState::Non) REQUIRE(c.outcome != Outcome::UnfairnessHallucination);
                    REQUIRE(classify(inst, shown, l).outcome == c.outcome);
                }
            }
        }
    }
}

TEST_CASE("Non instances from the demo set never yield unfairness", "[classifier][property]") {
    const std::string dir = std::string(BICAUSAL_SOURCE_DIR) + "/data/demo";
    const auto ds = generate_dataset(load_templates(dir + "/templates"), load_attribute_registry(dir + "/attributes.json"),
                                     {.master_seed = 1, .non_mode = NonMode::Both});
    std::size_t checked = 0;
    for (const auto& p : ds) {
        for (const auto* inst : {&p.first, &p.second}) {
            if (inst->bias_state != BiasState::Non) continue;
            for (char l : {'A', 'B', 'C', 'D'}) {
                REQUIRE(classify(*inst, inst->options, l).outcome != Outcome::UnfairnessHallucination);
                ++checked;
            }
        }
    }
    REQUIRE(checked > 0);
}

TEST_CASE("confidence", "[classifier][confidence]") {
    const std::vector<double> half{0.5, 0.5};
    const std::vector<double> single{0.9};
    const std::vector<double> three{0.9, 0.4, 0.1};
    REQUIRE(confidence(half) == Approx(0.5).epsilon(1e-15));
    REQUIRE(confidence(single) == Approx(0.9).epsilon(1e-15));
    REQUIRE(confidence(three) == Approx(static_cast<double>(oracle::geometric_mean_direct(three))).epsilon(1e-12));
    REQUIRE(confidence(three) == Approx(0.33019).margin(1e-5));

    const std::vector<double> empty;
    const std::vector<double> zero{0.3, 0.0};
    const std::vector<double> above{1.2};
    REQUIRE_THROWS_AS(confidence(empty), DomainError);
    REQUIRE_THROWS_AS(confidence(zero), DomainError);
    REQUIRE_THROWS_AS(confidence(above), DomainError);

    SECTION("logprob conversion round trip") {
        REQUIRE(std::exp(-0.10536) == Approx(0.9).margin(1e-5));
    }
}

TEST_CASE("confidence properties", "[classifier][confidence][property]") {
    std::mt19937_64 gen(31);
    std::uniform_int_distribution<int> len(1, 50);
    std::uniform_real_distribution<double> logp(std::log(1e-6), 0.0);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> ps(static_cast<std::size_t>(len(gen)));
        for (auto& p : ps) p = std::exp(logp(gen));
        const double g = confidence(ps);
        REQUIRE(std::fabs(g - static_cast<double>(oracle::geometric_mean_direct(ps))) < 1e-9);
        const auto [lo, hi] = std::minmax_element(ps.begin(), ps.end());
        REQUIRE(g >= *lo * (1 - 1e-12));
        REQUIRE(g <= *hi * (1 + 1e-12));
        auto shuffled = ps;
        std::shuffle(shuffled.begin(), shuffled.end(), gen);
        REQUIRE(confidence(shuffled) == Approx(g).epsilon(1e-12));
    }
}

TEST_CASE("response JSON round trip and validation", "[classifier][json]") {
    RawResponse r;
    r.pair_id = "t/a/ProAnti";
    r.member = Member::Second;
    r.repetition_index = 2;
    r.instance_id = "t/a/Anti";
    r.model = "m";
    r.completion_text = "C";
    r.token_probs = std::vector<TokenProb>{{"C", 0.75}};
    r.options = {Person::D, Person::C, Person::B, Person::A};
    REQUIRE(response_from_json(to_json(r)) == r);

    Json j = to_json(r);
    j["token_probs"] = Json::array({Json::array({"C", 1.5})});
    REQUIRE_THROWS_AS(response_from_json(j), ValidationError);
    j = to_json(r);
    j["options"] = "AABC";
    REQUIRE_THROWS_AS(response_from_json(j), ValidationError);
}
