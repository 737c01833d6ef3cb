#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "urtf/metrics.hpp"

using namespace urtf;
using namespace urtf::metrics;
using sel::parse_sel;

static const std::string kGaleSentence =
    "Gale-force winds were reported in California late Wednesday, where gusts "
    "reached 69 mph at Ontario and 57 mph at El Toro.";

TEST_CASE("reconstruct_offsets: cursor grounding on the storm sentence") {
    auto rec = parse_sel("((LOC: California)(LOC: Ontario))");
    auto g = reconstruct_offsets(rec, kGaleSentence);
    REQUIRE(g.size() == 2);
    CHECK(g[0].start == static_cast<std::int64_t>(kGaleSentence.find("California")));
    CHECK(g[0].end == g[0].start + 10);
    CHECK(g[1].start == static_cast<std::int64_t>(kGaleSentence.find("Ontario")));
}

TEST_CASE("reconstruct_offsets: absent span flagged (-1,-1)") {
    auto rec = parse_sel("((LOC: Narnia))");
    auto g = reconstruct_offsets(rec, kGaleSentence);
    CHECK(g[0].start == -1);
    CHECK(g[0].end == -1);
}

TEST_CASE("reconstruct_offsets: repeated utterances advance the cursor") {
    auto rec = parse_sel("((W: a)(W: a))");
    auto g = reconstruct_offsets(rec, "a b a");
    CHECK(g[0].start == 0);
    CHECK(g[1].start == 4);
}

TEST_CASE("to_tuples: NER on the full storm record") {
    auto rec = parse_sel(
        "((LOC: California)(LOC: Ontario(Located_In: California))(LOC: El Toro))");
    auto tuples = to_tuples(rec, kGaleSentence, TaskKind::NER);
    REQUIRE(tuples.size() == 3);
    for (const auto& t : tuples) {
        CHECK(t.elements.size() == 1);
        CHECK(t.elements[0].label == "LOC");
        CHECK(t.elements[0].start >= 0);
    }
}

TEST_CASE("to_tuples: empty record gives empty multiset for every kind") {
    for (auto kind : {TaskKind::NER, TaskKind::RTE, TaskKind::EVT_TRG, TaskKind::EVT_ARG,
                      TaskKind::SENTI})
        CHECK(to_tuples({}, kGaleSentence, kind).empty());
}

TEST_CASE("to_tuples: duplicate groups give duplicate tuples") {
    auto rec = parse_sel("((W: a)(W: a))");
    auto tuples = to_tuples(rec, "a a", TaskKind::NER);
    REQUIRE(tuples.size() == 2);
    CHECK(tuples[0].elements[0].label == tuples[1].elements[0].label);
}

TEST_CASE("to_tuples: RTE resolves tail type from the matching spot group") {
    auto rec = parse_sel("((LOC: California)(LOC: Ontario(Located_In: California)))");
    auto tuples = to_tuples(rec, kGaleSentence, TaskKind::RTE);
    REQUIRE(tuples.size() == 1);
    REQUIRE(tuples[0].elements.size() == 3);
    CHECK(tuples[0].elements[0].label == "LOC");       // head: Ontario's group
    CHECK(tuples[0].elements[1].label == "Located_In");
    CHECK(tuples[0].elements[2].label == "LOC");       // tail typed via California spot
    CHECK(tuples[0].elements[2].start ==
          static_cast<std::int64_t>(kGaleSentence.find("California")));
}

TEST_CASE("to_tuples: RTE unresolvable tail stays untyped") {
    auto rec = parse_sel("((LOC: Ontario(Located_In: Mars)))");
    auto tuples = to_tuples(rec, kGaleSentence, TaskKind::RTE);
    REQUIRE(tuples.size() == 1);
    CHECK(tuples[0].elements[2].label == "");
}

TEST_CASE("to_tuples: event argument and sentiment arities") {
    auto rec = parse_sel("((Attack: bombed(Victim: soldiers)))");
    auto evt = to_tuples(rec, "they bombed the soldiers", TaskKind::EVT_ARG);
    REQUIRE(evt.size() == 1);
    REQUIRE(evt[0].elements.size() == 2);
    CHECK(evt[0].elements[0].label == "Attack");
    CHECK(evt[0].elements[1].label == "Victim");

    auto srec = parse_sel("((food: pizza(positive: delicious)))");
    auto senti = to_tuples(srec, "the pizza was delicious", TaskKind::SENTI);
    REQUIRE(senti.size() == 1);
    REQUIRE(senti[0].elements.size() == 3);
    CHECK(senti[0].elements[2].label == "positive");
}

TEST_CASE("match_multisets: hand cases") {
    auto rec = parse_sel("((A: a)(B: b)(C: c))");
    auto tuples = to_tuples(rec, "a b c", TaskKind::NER);
    auto exact = match_multisets(tuples, tuples);
    CHECK(exact.tp == 3);
    CHECK(exact.fp == 0);
    CHECK(exact.fn == 0);
    CHECK(micro_f1(exact).f1 == doctest::Approx(1.0));

    auto none = match_multisets(tuples, {});
    CHECK(none.tp == 0);
    CHECK(none.fn == 3);

    auto dup_gold = to_tuples(parse_sel("((W: a)(W: a))"), "a a", TaskKind::NER);
    auto single = to_tuples(parse_sel("((W: a))"), "a a", TaskKind::NER);
    auto c = match_multisets(dup_gold, single);
    CHECK(c.tp == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 1);
}

TEST_CASE("match_multisets equals brute-force maximum matching") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> size(0, 6), label(0, 3), offset(0, 4);
    for (int trial = 0; trial < 1000; ++trial) {
        auto random_multiset = [&] {
            std::vector<GroundedTuple> v;
            int n = size(rng);
            for (int i = 0; i < n; ++i) {
                std::int64_t s = offset(rng);
                v.push_back({TaskKind::NER,
                             {{"L" + std::to_string(label(rng)), s, s + 1 + label(rng)}}});
            }
            return v;
        };
        auto gold = random_multiset();
        auto pred = random_multiset();
        auto counts = match_multisets(gold, pred);
        CHECK(counts.tp == oracle::max_exact_matching(gold, pred));
        CHECK(counts.tp + counts.fp == pred.size());
        CHECK(counts.tp + counts.fn == gold.size());
    }
}

TEST_CASE("micro_f1: aggregation before division") {
    PrfScore s = micro_f1(std::vector<Counts>{{1, 0, 0}, {0, 1, 1}});
    CHECK(s.precision == doctest::Approx(0.5));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(0.5));

    PrfScore empty = micro_f1(std::vector<Counts>{});
    CHECK(empty.f1 == 0.0);

    PrfScore single = micro_f1(std::vector<Counts>{{2, 1, 3}});
    PrfScore direct = micro_f1(Counts{2, 1, 3});
    CHECK(single.f1 == doctest::Approx(direct.f1));
}

TEST_CASE("score_grouped: single bucket equals global score; empty bucket zero") {
    std::vector<ScoredInstance> data{
        {"a b c", parse_sel("((A: a)(B: b))"), parse_sel("((A: a))")},
        {"x y", parse_sel("((A: x))"), parse_sel("((A: x)(B: y))")},
    };
    auto global = score_dataset(data, TaskKind::NER);

    auto one_bucket = score_grouped(data, TaskKind::NER, {});
    REQUIRE(one_bucket.size() == 1);
    CHECK(one_bucket.begin()->second.f1 == doctest::Approx(global.f1));
    CHECK(one_bucket.begin()->second.tp == global.tp);

    auto buckets = score_grouped(data, TaskKind::NER, {2, 10});
    REQUIRE(buckets.size() == 3);
    CHECK(buckets.at("[0,2)").tp == 1);     // the 1-entity instance
    CHECK(buckets.at("[2,10)").tp == 1);    // the 2-entity instance
    CHECK(buckets.at("[10,inf)").tp == 0);  // empty bucket
    CHECK(buckets.at("[10,inf)").f1 == 0.0);
}

TEST_CASE("F1(gold, gold) = 1 for every task kind") {
    auto rec = parse_sel(
        "((LOC: California)(LOC: Ontario(Located_In: California))(LOC: El Toro))");
    for (auto kind : {TaskKind::NER, TaskKind::RTE, TaskKind::EVT_TRG, TaskKind::EVT_ARG,
                      TaskKind::SENTI}) {
        std::vector<ScoredInstance> data{{kGaleSentence, rec, rec}};
        if (to_tuples(rec, kGaleSentence, kind).empty()) continue;
        CHECK(score_dataset(data, kind).f1 == doctest::Approx(1.0));
    }
}
