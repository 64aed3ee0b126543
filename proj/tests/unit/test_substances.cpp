#include <doctest.h>

#include "destigma/error.hpp"
#include "destigma/stigma.hpp"
#include "destigma/substances.hpp"
#include "test_support.hpp"

#include <fstream>

using namespace destigma;
using nlohmann::json;
using testing::error_code_of;

namespace {

const SubstanceLexicon& bundled() {
    static const auto lex = SubstanceLexicon::from_csv(testing::asset("lexicons/substances.csv"));
    return lex;
}

}  // namespace

TEST_CASE("category names") {
    CHECK(all_substance_categories().size() == kSubstanceCategoryCount);
    for (auto c : all_substance_categories()) {
        CHECK(parse_substance_category(substance_category_name(c)) == c);
        CHECK(json(c).get<SubstanceCategory>() == c);
    }
    CHECK(substance_category_name(SubstanceCategory::ReversalAgents) == "Reversal Agents");
    CHECK(parse_substance_category("reversalagents") == SubstanceCategory::ReversalAgents);
    CHECK_FALSE(parse_substance_category("Vitamins"));
}

TEST_CASE("word-aligned, case-insensitive, longest match") {
    SubstanceLexicon lex;
    lex.add("crack", SubstanceCategory::Stimulants);
    lex.add("crack cocaine", SubstanceCategory::Stimulants);
    lex.add("k2", SubstanceCategory::SyntheticCannabinoids);
    lex.add("spice", SubstanceCategory::SyntheticCannabinoids);
    lex.add_generic("drugs");

    const auto m = lex.matches("CRACK Cocaine and k2, not crackers or spiced; drugs!");
    REQUIRE(m.size() == 3);
    CHECK(m[0].term == "crack cocaine");
    CHECK(m[0].word_index == 0);
    CHECK(m[1].term == "k2");
    CHECK(m[2].term == "drugs");
    CHECK_FALSE(m[2].category);

    CHECK(lex.tag("only drugs here") == std::set<SubstanceCategory>{SubstanceCategory::Unspecified});
    CHECK(lex.tag("nothing") == std::set<SubstanceCategory>{SubstanceCategory::Unspecified});
    CHECK(lex.tag("spice and crack") ==
          std::set<SubstanceCategory>{SubstanceCategory::Stimulants, SubstanceCategory::SyntheticCannabinoids});
    CHECK(substance_words("Al-Anon's 3 K2!") == std::vector<std::string>{"al", "anon", "s", "3", "k2"});
}

TEST_CASE("bundled lexicon covers every category") {
    const auto& lex = bundled();
    CHECK(lex.size() > 150);
    std::set<SubstanceCategory> seen;
    std::ifstream in(testing::asset("lexicons/substances.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (auto c = parse_substance_category(line.substr(comma + 1))) seen.insert(*c);
    }
    for (auto c : all_substance_categories()) {
        if (c != SubstanceCategory::Unspecified) {
            CHECK(seen.count(c) == 1);
        }
    }
    CHECK(lex.tag("Narcan saved him") == std::set<SubstanceCategory>{SubstanceCategory::ReversalAgents});
    // Ambiguous everyday words are not substance terms.
    CHECK(lex.tag("I need to tweak my speed settings") == std::set<SubstanceCategory>{SubstanceCategory::Unspecified});
}

TEST_CASE("crosstab bookkeeping") {
    Crosstab t;
    t.add(StigmaType::Directed, {SubstanceCategory::Cannabis, SubstanceCategory::Stimulants});
    t.add(StigmaType::SelfStigma, {SubstanceCategory::Cannabis});
    CHECK(t.cell(SubstanceCategory::Cannabis, StigmaType::Directed) == 1);
    CHECK(t.row_total(SubstanceCategory::Cannabis) == 2);
    CHECK(t.column_total(StigmaType::Directed) == 2);
    CHECK(error_code_of([&] { t.add(StigmaType::None, {SubstanceCategory::Cannabis}); }) == Errc::Precondition);
    CHECK(error_code_of([&] { t.add(StigmaType::Directed, {}); }) == Errc::Precondition);
    const auto j = t.to_json();
    REQUIRE(j.size() == kSubstanceCategoryCount);
    CHECK(j[1]["category"] == "Cannabis");
    CHECK(j[1]["Self"] == 1);
    CHECK(j[1]["Total"] == 2);
}

TEST_CASE("thirty hand-labelled posts reproduce the reference table") {
    std::ifstream in(testing::fixture("substance_posts.jsonl"));
    std::string line;
    Crosstab t;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = json::parse(line);
        CAPTURE(j["id"].get<std::string>());
        std::set<SubstanceCategory> expected;
        for (const auto& c : j["categories"]) expected.insert(*parse_substance_category(c.get<std::string>()));
        const auto tagged = bundled().tag(j["text"].get<std::string>());
        CHECK(tagged == expected);
        t.add(*parse_stigma_type_name(j["type"].get<std::string>()), tagged);
        ++n;
    }
    CHECK(n == 30);
    CHECK(t.to_csv() == testing::read_text(testing::fixture("substance_crosstab.csv")));
}
