#include "polarlens/toml_lite.hpp"

#include "polarlens/common.hpp"

#include "doctest.h"

#include <string>

using namespace polarlens;

TEST_CASE("toml parses sections, dotted keys and scalar types") {
    auto t = TomlTable::parse_string(R"(
seed = 42
name = "hello world"
ratio = 0.25
big = 1e3
flag = true
off = false

[inputs]
tweets = "data/tweets.jsonl"

[gam]
n_basis = 8
val_frac = 0.1

[a.b]
c = 7
)");
    CHECK(t.get_int("seed") == 42);
    CHECK(t.get_string("name") == "hello world");
    CHECK(t.get_double("ratio") == doctest::Approx(0.25));
    CHECK(t.get_double("big") == doctest::Approx(1000.0));
    CHECK(t.get_bool("flag"));
    CHECK_FALSE(t.get_bool("off"));
    CHECK(t.get_string("inputs.tweets") == "data/tweets.jsonl");
    CHECK(t.get_int("gam.n_basis") == 8);
    CHECK(t.get_double("gam.val_frac") == doctest::Approx(0.1));
    CHECK(t.get_int("a.b.c") == 7);
    CHECK(t.contains("gam.n_basis"));
    CHECK_FALSE(t.contains("gam.nope"));
}

TEST_CASE("toml integers widen to double but not the reverse") {
    auto t = TomlTable::parse_string("n = 3\nx = 1.5\n");
    CHECK(t.get_double("n") == doctest::Approx(3.0));
    CHECK(t.get_int("n") == 3);
    CHECK_THROWS_AS((void)t.get_int("x"), config_error);
}

TEST_CASE("toml strings handle common escapes and comments") {
    auto t = TomlTable::parse_string("s = \"a\\tb\\\\c\\\"d\\n\" # trailing comment\n"
                                     "# full line comment\n"
                                     "plain = \"caf\xc3\xa9\"\n");
    CHECK(t.get_string("s") == "a\tb\\c\"d\n");
    CHECK(t.get_string("plain") == "caf\xc3\xa9");
    CHECK_THROWS_AS((void)TomlTable::parse_string("u = \"\\u00e9\"\n"), config_error);
}

TEST_CASE("toml arrays of strings parse") {
    auto t = TomlTable::parse_string("xs = [\"a\", \"b\", \"c\"]\nempty = []\n");
    CHECK(t.get_string_array("xs") == std::vector<std::string>{"a", "b", "c"});
    CHECK(t.get_string_array("empty").empty());
}

TEST_CASE("toml fallback getters use the fallback only when absent") {
    auto t = TomlTable::parse_string("present = 5\n");
    CHECK(t.get_int_or("present", 9) == 5);
    CHECK(t.get_int_or("absent", 9) == 9);
    CHECK(t.get_double_or("absent", 0.5) == doctest::Approx(0.5));
    CHECK(t.get_string_or("absent", "x") == "x");
    CHECK(t.get_bool_or("absent", true));
}

TEST_CASE("toml missing key and type mismatch raise config_error") {
    auto t = TomlTable::parse_string("n = 1\ns = \"x\"\n");
    CHECK_THROWS_AS((void)t.get_string("nope"), config_error);
    CHECK_THROWS_AS((void)t.get_int("s"), config_error);
    CHECK_THROWS_AS((void)t.get_bool("n"), config_error);
    CHECK_THROWS_AS((void)t.get_string_array("n"), config_error);
}

TEST_CASE("toml rejects malformed syntax loudly") {
    CHECK_THROWS_AS((void)TomlTable::parse_string("key with space = 1\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("k = \n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("k = \"unterminated\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("[unclosed\nk = 1\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("k = {a = 1}\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("k = 1979-05-27\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("[[tables]]\nk = 1\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("k = 1 trailing\n"), config_error);
}

TEST_CASE("toml duplicate keys are rejected") {
    CHECK_THROWS_AS((void)TomlTable::parse_string("k = 1\nk = 2\n"), config_error);
    CHECK_THROWS_AS((void)TomlTable::parse_string("[s]\nk = 1\n[s]\nk = 2\n"), config_error);
}

TEST_CASE("toml parse errors carry the origin and line") {
    try {
        (void)TomlTable::parse_string("ok = 1\nbad line\n", "myfile.toml");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("myfile.toml") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("set_override parses values with the same grammar") {
    auto t = TomlTable::parse_string("[gam]\nn_basis = 8\n");
    t.set_override("gam.n_basis", "12");
    CHECK(t.get_int("gam.n_basis") == 12);
    t.set_override("providers.mode", "stub");
    CHECK(t.get_string("providers.mode") == "stub");
    t.set_override("flag", "true");
    CHECK(t.get_bool("flag"));
    t.set_override("ratio", "0.75");
    CHECK(t.get_double("ratio") == doctest::Approx(0.75));
    t.set_override("quoted", "\"a b\"");
    CHECK(t.get_string("quoted") == "a b");
}

TEST_CASE("toml parse_file reports unreadable files as config errors") {
    CHECK_THROWS_AS((void)TomlTable::parse_file("/nonexistent/nowhere.toml"), config_error);
}
