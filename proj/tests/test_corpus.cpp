#include <doctest.h>

#include <random>

#include "orepipe/corpus.hpp"
#include "test_util.hpp"

using namespace orepipe;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("read_jsonl: empty file yields empty dataset") {
    TempDir dir;
    write_file(dir.file("empty.jsonl"), "");
    Dataset d = read_jsonl(dir.file("empty.jsonl"));
    CHECK(d.empty());
}

TEST_CASE("read_jsonl: two lines in file order, defaults applied") {
    TempDir dir;
    write_file(dir.file("two.jsonl"),
               "{\"id\":\"a\",\"text\":\"first\"}\n"
               "{\"text\":\"second\",\"source\":\"c4\"}\n");
    Dataset d = read_jsonl(dir.file("two.jsonl"));
    REQUIRE(d.size() == 2);
    CHECK(d.documents[0].id == "a");
    CHECK(d.documents[0].source == "unknown");
    CHECK(d.documents[1].id == "2");  // auto-assigned line number
    CHECK(d.documents[1].text == "second");
    CHECK(d.documents[1].source == "c4");
    CHECK(d.documents[1].category == "unknown");
}

TEST_CASE("read_jsonl: malformed line fails fast naming the line") {
    TempDir dir;
    write_file(dir.file("bad.jsonl"),
               "{\"text\":\"ok\"}\n{\"text\":\"ok2\"}\nnot json\n");
    CHECK_THROWS_WITH_AS(read_jsonl(dir.file("bad.jsonl")),
                         doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("read_jsonl: duplicate id is an error") {
    TempDir dir;
    write_file(dir.file("dup.jsonl"),
               "{\"id\":\"x\",\"text\":\"a\"}\n{\"id\":\"x\",\"text\":\"b\"}\n");
    CHECK_THROWS_WITH_AS(read_jsonl(dir.file("dup.jsonl")),
                         doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("read_jsonl: missing file and empty text") {
    TempDir dir;
    CHECK_THROWS_AS(read_jsonl(dir.file("nope.jsonl")), std::runtime_error);
    write_file(dir.file("blank.jsonl"), "{\"text\":\"   \"}\n");
    CHECK_THROWS_AS(read_jsonl(dir.file("blank.jsonl")), std::runtime_error);
}

TEST_CASE("write_jsonl round-trip is the identity, unicode intact") {
    TempDir dir;
    Dataset d;
    d.documents.push_back({"1", "plain text", "c4", "open_data", {}});
    Document u{"2", "\xc3\xb6rde\xc4\x9fi", "arxiv", "open_data", {}};
    u.extra["lang"] = "tr";
    d.documents.push_back(u);

    write_jsonl(d, dir.file("rt.jsonl"));
    Dataset back = read_jsonl(dir.file("rt.jsonl"));
    REQUIRE(back.size() == 2);
    CHECK(back.documents[0] == d.documents[0]);
    CHECK(back.documents[1] == d.documents[1]);
    CHECK(back.documents[1].text == "\xc3\xb6rde\xc4\x9fi");
}

TEST_CASE("write_jsonl: empty dataset writes empty file") {
    TempDir dir;
    write_jsonl(Dataset{}, dir.file("empty.jsonl"));
    CHECK(testutil::read_file(dir.file("empty.jsonl")).empty());
}

TEST_CASE("token_count: whitespace runs") {
    Dataset d;
    d.documents.push_back({"1", "The crusher jammed", "", "", {}});
    CHECK(token_count(d) == 3);
    CHECK(token_count(Dataset{}) == 0);

    Dataset four;
    for (int i = 0; i < 4; ++i)
        four.documents.push_back({std::to_string(i), "a b c d e", "", "", {}});
    CHECK(token_count(four) == 20);
}

TEST_CASE("token_count: additive over concatenation (property)") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Dataset a, b;
        for (int i = 0; i < 20; ++i) {
            std::string text = testutil::random_word(rng);
            for (int w = 0; w < static_cast<int>(rng() % 8); ++w)
                text += " " + testutil::random_word(rng);
            ((rng() & 1) ? a : b)
                .documents.push_back({std::to_string(trial * 100 + i), text, "", "", {}});
        }
        Dataset both = a;
        both.documents.insert(both.documents.end(), b.documents.begin(),
                              b.documents.end());
        CHECK(token_count(both) == token_count(a) + token_count(b));
    }
}

TEST_CASE("composition_report: grouping and totals") {
    Dataset d;
    for (int i = 0; i < 3; ++i)
        d.documents.push_back({"a" + std::to_string(i), "x", "s", "A", {}});
    for (int i = 0; i < 2; ++i)
        d.documents.push_back({"b" + std::to_string(i), "x y", "s", "B", {}});
    CompositionReport r = composition_report(d);
    CHECK(r.rows_per_category["A"] == 3);
    CHECK(r.rows_per_category["B"] == 2);
    CHECK(r.total_rows == 5);
    CHECK(r.total_tokens == 3 * 1 + 2 * 2);
}

TEST_CASE("composition_report: totals equal the published corpus arithmetic") {
    // Counts-only reproduction: 76,229 open-data rows + 91,628 thesis rows.
    CompositionReport r;
    r.rows_per_category["open_data"] = 76229;
    r.rows_per_category["thesis_reports"] = 91628;
    std::size_t total = 0;
    for (const auto& [cat, rows] : r.rows_per_category) total += rows;
    CHECK(total == 167857);
}

TEST_CASE("composition_report: totals match dataset length (property)") {
    std::mt19937_64 rng(11);
    Dataset d;
    for (int i = 0; i < 200; ++i) {
        d.documents.push_back({std::to_string(i), "t",
                               "s", std::string(1, static_cast<char>('A' + rng() % 5)),
                               {}});
    }
    CompositionReport r = composition_report(d);
    CHECK(r.total_rows == d.size());
    std::size_t sum = 0;
    for (const auto& [cat, rows] : r.rows_per_category) sum += rows;
    CHECK(sum == d.size());
}
