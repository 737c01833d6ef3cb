#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "urtf/synth.hpp"

using namespace urtf;
using namespace urtf::synth;

TEST_CASE("gen_distribution: deterministic, sizes respected, bad config rejected") {
    DistConfig cfg;
    auto a = gen_distribution(cfg, 1);
    auto b = gen_distribution(cfg, 1);
    CHECK(a.spot_pool == b.spot_pool);
    CHECK(a.rules == b.rules);
    CHECK(a.spot_pool.size() == 40);
    CHECK(a.asso_pool.size() == 10);

    DistConfig bad;
    bad.vocab_size = 0;
    CHECK_THROWS_AS(gen_distribution(bad, 1), std::invalid_argument);
}

TEST_CASE("gen_instance: zero spots gives the empty record") {
    auto dist = gen_distribution({}, 3);
    auto inst = gen_instance(dist, 0, 0, 7);
    CHECK(inst.sel == "()");
    CHECK(inst.text.empty());
    CHECK(inst.schema.spots.empty());
}

TEST_CASE("gen_instance: invariants hold over many samples") {
    auto dist = gen_distribution({}, 11);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> spots(1, 4), assos(0, 3);
    for (int i = 0; i < 10000; ++i) {
        auto inst = gen_instance(dist, spots(rng), assos(rng), i);
        auto rec = sel::parse_sel(inst.sel);
        CHECK(sel::linearize_sel(rec) == inst.sel);
        CHECK(sel::validate_record(rec, inst.schema).empty());
        auto classes = sel::extract_class_set(rec);
        for (const auto& g : rec.groups) {
            CHECK(inst.text.find(g.info_span) != std::string::npos);
            for (const auto& a : g.assos)
                CHECK(inst.text.find(a.info_span) != std::string::npos);
        }
        for (const auto& c : classes)
            CHECK((inst.schema.spots.contains(c) || inst.schema.assos.contains(c)));
    }
}

TEST_CASE("corpus write/read round trip and byte stability") {
    auto dist = gen_distribution({}, 5);
    auto corpus = gen_corpus(dist, 50, 21);
    std::string path = "/tmp/urtf_test_corpus.jsonl";
    write_corpus(corpus, path);
    CHECK(read_corpus(path) == corpus);

    std::string path2 = "/tmp/urtf_test_corpus2.jsonl";
    write_corpus(corpus, path2);
    std::ifstream a(path), b(path2);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("malformed line reported with its number, stream skips it") {
    std::string path = "/tmp/urtf_bad_corpus.jsonl";
    {
        std::ofstream out(path);
        auto dist = gen_distribution({}, 5);
        out << to_json_line(gen_instance(dist, 2, 1, 1)) << "\n";
        out << "this is not json\n";
        out << to_json_line(gen_instance(dist, 1, 0, 2)) << "\n";
    }
    CHECK_THROWS_AS(read_corpus(path), LineParseFailure);
    try {
        read_corpus(path);
    } catch (const LineParseFailure& e) {
        CHECK(e.line() == 2);
    }

    std::size_t bad_line = 0, n = 0;
    std::size_t parsed = stream_corpus(
        path, [&](Instance&&) { ++n; },
        [&](std::size_t line, const std::string&) { bad_line = line; });
    CHECK(parsed == 2);
    CHECK(n == 2);
    CHECK(bad_line == 2);
    std::remove(path.c_str());
}

TEST_CASE("empty file gives empty stream") {
    std::string path = "/tmp/urtf_empty.jsonl";
    { std::ofstream out(path); }
    CHECK(read_corpus(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("paired task serialization round trip") {
    auto dist = gen_distribution({}, 5);
    PairedTask task{gen_instance(dist, 2, 1, 1), gen_instance(dist, 1, 0, 2), "Spot00"};
    auto line = to_json_line(task);
    CHECK(paired_task_from_json_line(line, 1) == task);
}
