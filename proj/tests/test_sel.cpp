#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "gen_helpers.hpp"
#include "urtf/sel.hpp"

using namespace urtf;
using sel::parse_sel;
using sel::linearize_sel;

TEST_CASE("parse: nested example with one association") {
    auto rec = parse_sel("((LOC: California)(LOC: Ontario(Located_In: California)))");
    REQUIRE(rec.groups.size() == 2);
    CHECK(rec.groups[0].spot_name == "LOC");
    CHECK(rec.groups[0].info_span == "California");
    CHECK(rec.groups[0].assos.empty());
    REQUIRE(rec.groups[1].assos.size() == 1);
    CHECK(rec.groups[1].assos[0].asso_name == "Located_In");
    CHECK(rec.groups[1].assos[0].info_span == "California");
}

TEST_CASE("parse: empty record") {
    CHECK(parse_sel("()").groups.empty());
    CHECK(parse_sel("").groups.empty());
    CHECK(parse_sel("  ( ) ").groups.empty());
}

TEST_CASE("parse: duplicate groups preserved") {
    auto rec = parse_sel("((A: x)(A: x))");
    REQUIRE(rec.groups.size() == 2);
    CHECK(rec.groups[0] == rec.groups[1]);
}

TEST_CASE("parse: wrapped and bare forms agree") {
    auto wrapped = parse_sel("((PER: Alekseev(Live_In: Soviet))(LOC: Soviet))");
    auto bare = parse_sel("(PER: Alekseev(Live_In: Soviet))(LOC: Soviet)");
    CHECK(wrapped == bare);
    CHECK(parse_sel("(A: x)") == parse_sel("((A: x))"));
}

TEST_CASE("parse: whitespace insignificant, names and spans trimmed") {
    auto rec = parse_sel("  (  ( PER :  Alekseev ( Live_In : Soviet ) ) )");
    REQUIRE(rec.groups.size() == 1);
    CHECK(rec.groups[0].spot_name == "PER");
    CHECK(rec.groups[0].info_span == "Alekseev");
    CHECK(rec.groups[0].assos[0].info_span == "Soviet");
}

TEST_CASE("parse: spans keep colons, names reject them") {
    auto rec = parse_sel("((TIME: 12:30))");
    CHECK(rec.groups[0].info_span == "12:30");
}

TEST_CASE("parse errors carry fault kind and offset") {
    auto expect = [](const std::string& text, sel::ParseFault want) {
        try {
            parse_sel(text);
            FAIL("expected ParseError for: " << text);
        } catch (const sel::ParseError& e) {
            CHECK(e.fault() == want);
            CHECK(e.offset() <= text.size());
        }
    };
    expect("((A: x)", sel::ParseFault::UnbalancedParens);
    expect("((A x))", sel::ParseFault::MissingColon);
    expect("((: x))", sel::ParseFault::EmptyName);
    expect("((A: x(B: y(C: z))))", sel::ParseFault::NestingTooDeep);
}

TEST_CASE("mutation fuzz: fault offset never exceeds input length") {
    std::mt19937_64 rng(7);
    std::string base = linearize_sel(testgen::random_record(rng, 6));
    const std::string junk = "():(abc ";
    for (std::size_t i = 0; i < base.size(); ++i) {
        for (char c : junk) {
            std::string mutated = base;
            mutated[i] = c;
            try {
                (void)parse_sel(mutated);
            } catch (const sel::ParseError& e) {
                CHECK(e.offset() <= mutated.size());
            }
        }
    }
}

TEST_CASE("linearize: canonical forms") {
    CHECK(linearize_sel({}) == "()");
    sel::SelRecord rec;
    rec.groups.push_back({"PER", "Alekseev", {{"Live_In", "Soviet"}}});
    CHECK(linearize_sel(rec) == "((PER: Alekseev(Live_In: Soviet)))");
}

TEST_CASE("linearize: invalid names rejected") {
    sel::SelRecord rec;
    rec.groups.push_back({"A(B", "x", {}});
    CHECK_THROWS_AS(linearize_sel(rec), sel::InvalidName);
    rec.groups[0].spot_name = "";
    CHECK_THROWS_AS(linearize_sel(rec), sel::InvalidName);
}

TEST_CASE("round trip: random records within depth 2") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 10000; ++i) {
        auto rec = testgen::random_record(rng);
        auto text = linearize_sel(rec);
        CHECK(parse_sel(text) == rec);
    }
}

TEST_CASE("parse determinism") {
    const std::string text = "((LOC: California)(LOC: Ontario(Located_In: California)))";
    CHECK(parse_sel(text) == parse_sel(text));
}

TEST_CASE("validate_record reports unknown names in document order") {
    auto rec = parse_sel("((LOC: x)(LOC: y(Located_In: x)))");
    sel::Schema schema{{"LOC"}, {"Located_In"}};
    CHECK(validate_record(rec, schema).empty());

    auto bad = parse_sel("((PER: p)(LOC: y(Near: x))(ORG: o))");
    auto v = validate_record(bad, schema);
    REQUIRE(v.size() == 3);
    CHECK(v[0].name == "PER");
    CHECK(v[1].name == "Near");
    CHECK(v[2].name == "ORG");
    CHECK(v[0].kind == sel::Violation::Kind::UnknownSpot);
    CHECK(v[1].kind == sel::Violation::Kind::UnknownAsso);
}

TEST_CASE("extract_class_set: union of names, order-invariant") {
    auto rec = parse_sel("((LOC: x)(LOC: y(Located_In: x)))");
    CHECK(sel::extract_class_set(rec) == std::set<std::string>{"LOC", "Located_In"});
    CHECK(sel::extract_class_set({}).empty());

    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        auto r = testgen::random_record(rng, 8);
        auto shuffled = r;
        std::shuffle(shuffled.groups.begin(), shuffled.groups.end(), rng);
        CHECK(sel::extract_class_set(r) == sel::extract_class_set(shuffled));
    }
}
