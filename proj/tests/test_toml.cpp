#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "scorebreak/detail/toml.hpp"

using scorebreak::Error;
using scorebreak::ErrorKind;
namespace toml = scorebreak::toml;

namespace {

toml::Value parse_str(const std::string& text) {
    std::istringstream in(text);
    return toml::parse(in);
}

void expect_invalid(const std::string& text) {
    REQUIRE_THROWS_MATCHES(parse_str(text), Error, Catch::Matchers::Predicate<Error>([](
                               const Error& e) { return e.kind() == ErrorKind::InvalidSpec; }));
}

}  // namespace

TEST_CASE("scalar kinds") {
    auto v = parse_str(
        "count = 12\n"
        "big = 9007199254740995\n"     // past 2^53, must survive intact
        "neg = -3\n"
        "ratio = 0.25\n"
        "sci = 1.5e-3\n"
        "flag = true\n"
        "off = false\n"
        "name = \"hello world\"\n");
    REQUIRE(v.at("count").as_integer("count") == 12);
    REQUIRE(v.at("big").as_integer("big") == 9007199254740995LL);
    REQUIRE(v.at("neg").as_integer("neg") == -3);
    REQUIRE(v.at("ratio").as_number("ratio") == 0.25);
    REQUIRE(v.at("sci").as_number("sci") == 1.5e-3);
    REQUIRE(v.at("flag").as_bool("flag"));
    REQUIRE_FALSE(v.at("off").as_bool("off"));
    REQUIRE(v.at("name").as_string("name") == "hello world");
    // Integers coerce to numbers, not the other way round.
    REQUIRE(v.at("count").as_number("count") == 12.0);
    REQUIRE_THROWS_AS(v.at("ratio").as_integer("ratio"), Error);
}

TEST_CASE("string escapes") {
    auto v = parse_str("s = \"a\\\"b\\\\c\\nd\\te\"\n");
    REQUIRE(v.at("s").as_string("s") == "a\"b\\c\nd\te");
}

TEST_CASE("tables and dotted keys") {
    auto v = parse_str(
        "[outer]\n"
        "x = 1\n"
        "[outer.inner]\n"
        "y = 2\n"
        "[targets.\"alu mix\"]\n"
        "loop31 = 0.5\n");
    REQUIRE(v.at("outer").at("x").as_integer("x") == 1);
    REQUIRE(v.at("outer").at("inner").at("y").as_integer("y") == 2);
    REQUIRE(v.at("targets").at("alu mix").at("loop31").as_number("loop31") == 0.5);
}

TEST_CASE("array of tables") {
    auto v = parse_str(
        "[[correlation]]\n"
        "a = \"C_Ia\"\n"
        "rho = 0.9\n"
        "[[correlation]]\n"
        "a = \"C_Id\"\n"
        "rho = 0.8\n");
    const auto& arr = v.at("correlation").as_array("correlation");
    REQUIRE(arr.size() == 2);
    REQUIRE(arr[0].at("a").as_string("a") == "C_Ia");
    REQUIRE(arr[1].at("rho").as_number("rho") == 0.8);
}

TEST_CASE("inline arrays") {
    auto v = parse_str("xs = [1, 2, 3]\nys = [0.5, \"two\", true,]\nempty = []\n");
    const auto& xs = v.at("xs").as_array("xs");
    REQUIRE(xs.size() == 3);
    REQUIRE(xs[2].as_integer("x") == 3);
    const auto& ys = v.at("ys").as_array("ys");
    REQUIRE(ys[1].as_string("y") == "two");
    REQUIRE(ys[2].as_bool("y"));
    REQUIRE(v.at("empty").as_array("empty").empty());
}

TEST_CASE("comments and blank lines") {
    auto v = parse_str(
        "# leading comment\n"
        "\n"
        "a = 1  # trailing comment\n"
        "b = \"has # inside\"  # real comment\n");
    REQUIRE(v.at("a").as_integer("a") == 1);
    REQUIRE(v.at("b").as_string("b") == "has # inside");
}

TEST_CASE("malformed input is rejected with InvalidSpec") {
    expect_invalid("a = \n");                      // missing value
    expect_invalid("a = \"unterminated\n");        // unterminated string
    expect_invalid("= 3\n");                       // missing key
    expect_invalid("a = 1\na = 2\n");              // duplicate key
    expect_invalid("[t]\nx = 1\n[t]\nx = 2\n");    // duplicate table key
    expect_invalid("a = [1, 2\n");                 // unterminated array
    expect_invalid("a = zzz\n");                   // unknown scalar
    expect_invalid("[unclosed\n");                 // bad header
    expect_invalid("a = 1 trailing\n");            // junk after value
}

TEST_CASE("missing keys and kind mismatches throw") {
    auto v = parse_str("a = 1\n");
    REQUIRE(v.has("a"));
    REQUIRE_FALSE(v.has("b"));
    REQUIRE_THROWS_AS(v.at("b"), Error);
    REQUIRE_THROWS_AS(v.at("a").as_string("a"), Error);
    REQUIRE_THROWS_AS(v.at("a").as_array("a"), Error);
}

TEST_CASE("parse_file reports missing files") {
    REQUIRE_THROWS_MATCHES(toml::parse_file("/nonexistent/spec.toml"), Error,
                           Catch::Matchers::Predicate<Error>([](const Error& e) {
                               return e.kind() == ErrorKind::IoError;
                           }));
}
