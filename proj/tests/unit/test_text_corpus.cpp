#include <doctest.h>

#include "destigma/corpus.hpp"
#include "destigma/error.hpp"
#include "destigma/text.hpp"
#include "test_support.hpp"

#include <random>

using namespace destigma;
using nlohmann::json;

TEST_CASE("whitespace helpers handle unicode spaces") {
    CHECK(text::split_whitespace("a b\tc  d") == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(text::count_words("  one two\nthree ") == 3);
    CHECK(text::count_words("") == 0);
    CHECK(text::collapse_whitespace("  a \n\n b c ") == "a b c");
    CHECK(text::trim("\t x y \n") == "x y");
    CHECK(text::to_lower_ascii("ÀbC") == "Àbc");
    CHECK(text::starts_with_ci("Hello", "HE"));
    CHECK_FALSE(text::starts_with_ci("He", "Hello"));
    CHECK(text::join({"a", "b", "c"}, ", ") == "a, b, c");
}

TEST_CASE("decode_utf8 reports lengths and replaces bad bytes") {
    std::size_t len = 0;
    CHECK(text::decode_utf8("é", 0, len) == U'é');
    CHECK(len == 2);
    CHECK(text::decode_utf8("\xe2\x80\x94", 0, len) == U'—');
    CHECK(len == 3);
    CHECK(text::decode_utf8("\xff", 0, len) == U'�');
    CHECK(len == 1);
}

TEST_CASE("parse_raw_post follows the schema") {
    SourceSchema schema;
    auto p = parse_raw_post(json{{"id", "abc"},
                                 {"subreddit", "news"},
                                 {"author", "u1"},
                                 {"title", "T"},
                                 {"selftext", "Body"},
                                 {"created_utc", 1600000000}},
                            schema);
    REQUIRE(p);
    CHECK(p->id == "abc");
    CHECK(p->body == "Body");
    CHECK(p->created_utc == 1600000000);

    SUBCASE("string timestamps are accepted") {
        auto q = parse_raw_post(json{{"id", "x"}, {"created_utc", "1600000000"}}, schema);
        REQUIRE(q);
        CHECK(q->created_utc == 1600000000);
    }
    SUBCASE("missing id or negative time is malformed") {
        CHECK_FALSE(parse_raw_post(json{{"created_utc", 1}}, schema));
        CHECK_FALSE(parse_raw_post(json{{"id", "x"}, {"created_utc", -5}}, schema));
        CHECK_FALSE(parse_raw_post(json::array(), schema));
    }
    SUBCASE("custom field names") {
        SourceSchema s2;
        s2.body_field = "body";
        s2.created_field = "created";
        auto q = parse_raw_post(json{{"id", "x"}, {"body", "hello"}, {"created", 3}}, s2);
        REQUIRE(q);
        CHECK(q->body == "hello");
    }
}

TEST_CASE("RawPost round-trips through JSON") {
    RawPost p{"id1", "sub", "me", "Title", "Body text", 42};
    const RawPost back = json(p).get<RawPost>();
    CHECK(back.id == p.id);
    CHECK(back.subreddit == p.subreddit);
    CHECK(back.author == p.author);
    CHECK(back.title == p.title);
    CHECK(back.body == p.body);
    CHECK(back.created_utc == p.created_utc);
}

TEST_CASE("clean_filter applies the exclusion rules") {
    CorpusRules rules;
    RawPost base{"1", "s", "author", "a title here", "one two three four five six seven eight", 0};

    SUBCASE("accepted with combined word count") {
        auto r = clean_filter(base, rules);
        REQUIRE(r);
        CHECK(r.accepted->combined_word_count == 11);
        CHECK(r.accepted->text() == "a title here one two three four five six seven eight");
    }
    SUBCASE("removed and deleted bodies") {
        for (const char* marker : {"[removed]", "[deleted]"}) {
            auto p = base;
            p.body = marker;
            auto r = clean_filter(p, rules);
            CHECK_FALSE(r);
            CHECK(r.reason == RejectReason::RemovedBody);
        }
    }
    SUBCASE("markers are case sensitive") {
        auto p = base;
        p.body = "[Removed] and then some more words to pass the length rule";
        CHECK(clean_filter(p, rules));
    }
    SUBCASE("deleted author") {
        auto p = base;
        p.author = "[deleted]";
        CHECK(clean_filter(p, rules).reason == RejectReason::DeletedAuthor);
    }
    SUBCASE("nine words is too short, ten is enough") {
        auto p = base;
        p.title = "";
        p.body = "1 2 3 4 5 6 7 8 9";
        CHECK(clean_filter(p, rules).reason == RejectReason::TooShort);
        p.body += " 10";
        CHECK(clean_filter(p, rules));
    }
    SUBCASE("configurable minimum") {
        auto p = base;
        rules.min_words = 50;
        CHECK(clean_filter(p, rules).reason == RejectReason::TooShort);
    }
}

TEST_CASE("clean_filter on random posts matches a direct rule check") {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> bodies{"[removed]", "[deleted]", "", "x"};
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    for (int i = 0; i < 300; ++i) {
        RawPost p;
        p.id = std::to_string(i);
        p.author = (rng() % 7 == 0) ? "[deleted]" : "user";
        const int tw = static_cast<int>(rng() % 6);
        const int bw = static_cast<int>(rng() % 12);
        for (int w = 0; w < tw; ++w) p.title += (w ? " " : "") + std::string("t");
        if (rng() % 5 == 0) {
            p.body = bodies[rng() % 2];
        } else {
            for (int w = 0; w < bw; ++w) p.body += (w ? " " : "") + std::string("b");
        }
        const bool removed = p.body == "[removed]" || p.body == "[deleted]";
        const bool expect_accept = !removed && p.author != "[deleted]" && (tw + bw) >= 10;
        const auto r = clean_filter(p);
        CHECK(static_cast<bool>(r) == expect_accept);
        (r ? accepted : rejected) += 1;
    }
    CHECK(accepted + rejected == 300);
}

TEST_CASE("load_corpus skips malformed lines and enforces the malformed share") {
    testing::TempDir dir;
    std::string ok;
    for (int i = 0; i < 20; ++i) {
        ok += json{{"id", std::to_string(i)}, {"created_utc", i}, {"title", "t"}}.dump() + "\n";
    }
    testing::write_text(dir / "good.jsonl", ok + "{broken\n\n");
    auto loaded = load_corpus(dir / "good.jsonl");
    CHECK(loaded.posts.size() == 20);
    CHECK(loaded.stats.lines == 21);
    CHECK(loaded.stats.malformed_lines == std::vector<std::size_t>{21});

    testing::write_text(dir / "bad.jsonl", ok + "x\ny\nz\n");
    CHECK_THROWS_AS(load_corpus(dir / "bad.jsonl"), Error);
    try {
        load_corpus(dir / "bad.jsonl");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MalformedInput);
    }
    try {
        load_corpus(dir / "missing.jsonl");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::Io);
    }
}

TEST_CASE("fixture corpus has the documented shape") {
    auto loaded = load_corpus(testing::fixture("corpus50.jsonl"));
    CHECK(loaded.stats.lines == 57);
    CHECK(loaded.stats.malformed_lines.size() == 1);
    std::size_t kept = 0;
    for (const auto& p : loaded.posts) {
        kept += clean_filter(p) ? 1 : 0;
    }
    CHECK(kept == 50);
}
