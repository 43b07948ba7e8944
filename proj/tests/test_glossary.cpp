#include <doctest.h>

#include <random>

#include "orepipe/glossary.hpp"
#include "test_util.hpp"

using namespace orepipe;
using testutil::TempDir;
using testutil::write_file;

namespace {

Glossary make_glossary(std::initializer_list<const char*> keywords) {
    Glossary g;
    for (const char* kw : keywords) g.entries.push_back({kw, std::nullopt});
    return g;
}

Document doc(const std::string& id, const std::string& text) {
    return {id, text, "s", "c", {}};
}

}  // namespace

TEST_CASE("load_glossary: tab-separated definitions, comments skipped") {
    TempDir dir;
    write_file(dir.file("g.tsv"),
               "# mining terms\ncrusher\tmachine that breaks rock\ngold\n");
    Glossary g = load_glossary(dir.file("g.tsv"));
    REQUIRE(g.entries.size() == 2);
    CHECK(g.entries[0].keyword == "crusher");
    CHECK(g.entries[0].definition == "machine that breaks rock");
    CHECK_FALSE(g.entries[1].definition.has_value());
}

TEST_CASE("load_glossary: case-insensitive duplicate is an error") {
    TempDir dir;
    write_file(dir.file("g.tsv"), "Gold\ngold\n");
    CHECK_THROWS_WITH_AS(load_glossary(dir.file("g.tsv")),
                         doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("load_glossary: empty file is an error") {
    TempDir dir;
    write_file(dir.file("g.tsv"), "");
    CHECK_THROWS_WITH_AS(load_glossary(dir.file("g.tsv")),
                         doctest::Contains("empty glossary"), std::runtime_error);
}

TEST_CASE("match_keywords: hand-counted occurrences") {
    Glossary g = make_glossary({"crusher", "conveyor", "gold"});
    auto r = match_keywords(doc("1", "The crusher jammed near the conveyor"), g);
    CHECK(r.matched);
    CHECK(r.counts.size() == 2);
    CHECK(r.counts.at("crusher") == 1);
    CHECK(r.counts.at("conveyor") == 1);
}

TEST_CASE("match_keywords: word boundary blocks substrings") {
    Glossary g = make_glossary({"gold"});
    auto r = match_keywords(doc("1", "goldfish"), g);
    CHECK_FALSE(r.matched);
    CHECK(r.counts.empty());
}

TEST_CASE("match_keywords: case-insensitive counting") {
    Glossary g = make_glossary({"gold"});
    auto r = match_keywords(doc("1", "Gold gold GOLD"), g);
    CHECK(r.counts.at("gold") == 3);
}

TEST_CASE("match_keywords: multi-word keywords match contiguous tokens") {
    Glossary g = make_glossary({"ball mill"});
    CHECK(match_keywords(doc("1", "the Ball Mill runs"), g).matched);
    CHECK_FALSE(match_keywords(doc("2", "the ball big mill"), g).matched);
    // Non-overlapping counting: "x x x" holds one "x x", not two.
    Glossary g2 = make_glossary({"x x"});
    CHECK(match_keywords(doc("3", "x x x"), g2).counts.at("x x") == 1);
}

TEST_CASE("filter_by_keywords: keeps matches in input order") {
    Glossary g = make_glossary({"coal"});
    Dataset d;
    d.documents = {doc("1", "nothing here"), doc("2", "coal seam"),
                   doc("3", "still nothing"), doc("4", "more coal"),
                   doc("5", "plain")};
    Dataset f = filter_by_keywords(d, g);
    REQUIRE(f.size() == 2);
    CHECK(f.documents[0].id == "2");
    CHECK(f.documents[1].id == "4");
}

TEST_CASE("filter_by_keywords: no matches yields empty dataset") {
    Glossary g = make_glossary({"zzzz"});
    Dataset d;
    d.documents = {doc("1", "a"), doc("2", "b")};
    CHECK(filter_by_keywords(d, g).empty());
}

TEST_CASE("filter_by_keywords: output invariant to batch size") {
    std::mt19937_64 rng(3);
    std::vector<std::string> vocab;
    for (int i = 0; i < 50; ++i) vocab.push_back(testutil::random_word(rng));
    Glossary g = make_glossary({});
    g.entries.push_back({vocab[0], std::nullopt});
    g.entries.push_back({vocab[1], std::nullopt});

    Dataset d;
    for (int i = 0; i < 10000; ++i)
        d.documents.push_back(doc(std::to_string(i),
                                  testutil::random_sentence(rng, 8, vocab)));

    // Oracle run: one batch spanning the whole dataset.
    Dataset oracle = filter_by_keywords(d, g, d.size());
    for (std::size_t batch : {std::size_t{1}, std::size_t{7}, std::size_t{1000}}) {
        Dataset got = filter_by_keywords(d, g, batch);
        REQUIRE(got.size() == oracle.size());
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got.documents[i].id == oracle.documents[i].id);
    }
}

TEST_CASE("filter_by_keywords: idempotent and a subsequence (property)") {
    std::mt19937_64 rng(5);
    std::vector<std::string> vocab;
    for (int i = 0; i < 30; ++i) vocab.push_back(testutil::random_word(rng));
    Glossary g = make_glossary({});
    g.entries.push_back({vocab[2], std::nullopt});

    Dataset d;
    for (int i = 0; i < 500; ++i)
        d.documents.push_back(doc(std::to_string(i),
                                  testutil::random_sentence(rng, 6, vocab)));
    Dataset once = filter_by_keywords(d, g);
    Dataset twice = filter_by_keywords(once, g);
    REQUIRE(once.size() == twice.size());
    // Subsequence check: filtered ids appear in d in the same relative order.
    std::size_t cursor = 0;
    for (const Document& kept : once.documents) {
        while (cursor < d.size() && d.documents[cursor].id != kept.id) ++cursor;
        CHECK(cursor < d.size());
        ++cursor;
    }
}

TEST_CASE("keyword_frequencies: planted counts recovered exactly") {
    Glossary g = make_glossary({"crusher", "gold"});
    Dataset d;
    // Plant 40 "crusher" and 10 "gold" across documents.
    for (int i = 0; i < 10; ++i) {
        std::string text = "filler";
        for (int j = 0; j < 4; ++j) text += " crusher rock";
        if (i < 10) text += " gold";
        d.documents.push_back(doc(std::to_string(i), text));
    }
    auto ranked = keyword_frequencies(d, g);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0] == std::pair<std::string, std::uint64_t>{"crusher", 40});
    CHECK(ranked[1] == std::pair<std::string, std::uint64_t>{"gold", 10});
}

TEST_CASE("keyword_frequencies: ties break alphabetically, coal first") {
    Glossary g = make_glossary({"drill", "coal"});
    Dataset d;
    d.documents.push_back(doc("1", "coal and drill"));
    auto ranked = keyword_frequencies(d, g);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].first == "coal");
    CHECK(ranked[1].first == "drill");
}

TEST_CASE("keyword_frequencies: totals equal sum of per-doc counts (property)") {
    std::mt19937_64 rng(9);
    std::vector<std::string> vocab;
    for (int i = 0; i < 20; ++i) vocab.push_back(testutil::random_word(rng));
    Glossary g = make_glossary({});
    for (int i = 0; i < 5; ++i) g.entries.push_back({vocab[i], std::nullopt});

    Dataset d;
    for (int i = 0; i < 300; ++i)
        d.documents.push_back(doc(std::to_string(i),
                                  testutil::random_sentence(rng, 12, vocab)));

    std::uint64_t ranked_total = 0;
    for (const auto& [kw, count] : keyword_frequencies(d, g)) ranked_total += count;

    std::uint64_t per_doc_total = 0;
    for (const Document& document : d.documents)
        for (const auto& [kw, count] : match_keywords(document, g).counts)
            per_doc_total += count;
    CHECK(ranked_total == per_doc_total);
}
