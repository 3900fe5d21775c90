#include <catch_amalgamated.hpp>

#include "bicausal/config.hpp"

using namespace bicausal;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& name, const Json& j) {
    const fs::path dir = fs::path(BICAUSAL_TEST_TMP) / "config" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    io::write_file_atomic(dir / "config.json", j.dump(2));
    return dir / "config.json";
}

}  // namespace

TEST_CASE("defaults", "[config]") {
    const auto c = resolve_config(std::nullopt);
    REQUIRE(c.seed == AppConfig{}.seed);
    REQUIRE(c.query.source == "synthetic");
    REQUIRE(c.query.temperature == 0.0);
    REQUIRE(c.query.repetitions == 1);
    REQUIRE(c.query.concurrency_limit == 4);
    REQUIRE(c.analysis.alpha == 0.05);
    REQUIRE(c.analysis.orientation == Orientation::SecondMinusFirst);
    REQUIRE(c.analysis.scopes == std::vector<Scope>{Scope::AllHallucinations});
    REQUIRE(c.formats.size() == 3);
    REQUIRE(config_from_json(config_to_json(c)).query.instruction == c.query.instruction);
}

TEST_CASE("precedence is defaults, then file, then flags", "[config]") {
    const auto file = write_config("precedence", {{"seed", 17},
                                                  {"query", {{"repetitions", 5}, {"max_retries", 7}}},
                                                  {"analysis", {{"alpha", 0.01}}}});
    Json flags;
    set_flag(flags, "query.repetitions", 2);
    set_flag(flags, "analysis.orientation", "first_minus_second");
    const auto c = resolve_config(file, flags);

    REQUIRE(c.seed == 17);                         // file over default
    REQUIRE(c.query.repetitions == 2);             // flag over file
    REQUIRE(c.query.max_retries == 7);             // file kept where no flag
    REQUIRE(c.query.concurrency_limit == 4);       // default kept
    REQUIRE(c.analysis.alpha == 0.01);
    REQUIRE(c.analysis.orientation == Orientation::FirstMinusSecond);

    // every key set in the file survives a round trip unchanged
    const Json back = config_to_json(c);
    REQUIRE(back["query"]["max_retries"] == 7);
    REQUIRE(back["query"]["repetitions"] == 2);
}

TEST_CASE("relative paths", "[config]") {
    const auto file = write_config("paths", {{"generation", {{"templates", "tpl"}, {"attributes", "/abs/attrs.json"}}},
                                             {"query", {{"scm", "../scm.json"}}}});
    const fs::path dir = fs::absolute(file).parent_path();
    auto c = resolve_config(file);
    REQUIRE(c.generation.templates == (dir / "tpl").lexically_normal());
    REQUIRE(c.generation.attributes == fs::path("/abs/attrs.json"));
    REQUIRE(c.query.scm == (dir / "../scm.json").lexically_normal());

    Json flags;
    set_flag(flags, "query.scm", "local.json");
    c = resolve_config(file, flags);
    REQUIRE(c.query.scm == (fs::current_path() / "local.json").lexically_normal());
}

TEST_CASE("bad configuration is rejected", "[config]") {
    SECTION("unknown keys") {
        REQUIRE_THROWS_AS(resolve_config(write_config("u1", {{"sede", 1}})), ConfigError);
        REQUIRE_THROWS_WITH(resolve_config(write_config("u2", {{"query", {{"temprature", 0}}}})),
                            Catch::Matchers::ContainsSubstring("query.temprature"));
        Json flags;
        set_flag(flags, "analysis.bogus", true);
        REQUIRE_THROWS_AS(resolve_config(std::nullopt, flags), ConfigError);
    }
    SECTION("wrong types and ranges") {
        auto bad = [](Json j) { return config_from_json(j); };
        REQUIRE_THROWS_AS(bad({{"seed", -1}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"seed", "abc"}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"query", {{"repetitions", 0}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"query", {{"repetitions", "three"}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"query", {{"concurrency_limit", 0}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"query", {{"source", "http"}}}}), ConfigError);  // no endpoint
        REQUIRE_THROWS_AS(bad({{"analysis", {{"alpha", 1.5}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"analysis", {{"scopes", Json::array()}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"analysis", {{"scopes", {"everything"}}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"analysis", {{"orientation", "sideways"}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"analysis", {{"formats", {"pdf"}}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"generation", {{"non_mode", "sometimes"}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"generation", {{"workers", 0}}}}), ConfigError);
        REQUIRE_THROWS_AS(bad({{"query", 3}}), ConfigError);
    }
    SECTION("unreadable or malformed file") {
        REQUIRE_THROWS_AS(resolve_config(fs::path(BICAUSAL_TEST_TMP) / "config" / "missing.json"), IoError);
        const fs::path dir = fs::path(BICAUSAL_TEST_TMP) / "config" / "garbled";
        fs::create_directories(dir);
        io::write_file_atomic(dir / "config.json", "{ \"seed\": ");
        REQUIRE_THROWS_AS(resolve_config(dir / "config.json"), ConfigError);
    }
}

TEST_CASE("shipped demo config loads", "[config][demo]") {
    const auto c = resolve_config(fs::path(BICAUSAL_SOURCE_DIR) / "data/demo/config.json");
    REQUIRE(fs::is_directory(c.generation.templates));
    REQUIRE(fs::exists(c.generation.attributes));
    REQUIRE(fs::exists(c.query.scm));
    REQUIRE(fs::exists(c.simulation.scm));
    REQUIRE(c.analysis.scopes.size() == 3);
}
