#include <doctest.h>

#include "destigma/error.hpp"
#include "destigma/hashing.hpp"
#include "destigma/prompt.hpp"
#include "test_support.hpp"

using namespace destigma;

using testing::error_code_of;

TEST_CASE("slots are substituted") {
    PromptTemplate t("t", "Hello {{name}}, you are {{age}}.");
    CHECK(render_prompt(t, {{"name", "Ana"}, {"age", "30"}}) == "Hello Ana, you are 30.");
    CHECK(t.required_slots() == std::set<std::string>{"name", "age"});
    CHECK(t.hash() == sha256_hex(t.body()));
}

TEST_CASE("missing slot names the slot") {
    PromptTemplate t("t", "{{a}} {{b}}");
    try {
        render_prompt(t, {{"a", "x"}});
        FAIL("expected MissingSlot");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingSlot);
        CHECK(e.detail() == "b");
    }
}

TEST_CASE("sections render on bound non-empty slots") {
    PromptTemplate t("t", "A{{#x}}[{{x}}]{{/x}}{{^x}}none{{/x}}B");
    CHECK(render_prompt(t, {{"x", "1"}}) == "A[1]B");
    CHECK(render_prompt(t, {{"x", ""}}) == "AnoneB");
    CHECK(render_prompt(t, {}) == "AnoneB");
    CHECK(t.required_slots().empty());
}

TEST_CASE("slots inside a suppressed section are not required") {
    PromptTemplate t("t", "{{#opt}}{{other}}{{/opt}}done");
    CHECK(render_prompt(t, {}) == "done");
    CHECK(error_code_of([&] { render_prompt(t, {{"opt", "y"}}); }) == Errc::MissingSlot);
}

TEST_CASE("nested sections") {
    PromptTemplate t("t", "{{#a}}a{{#b}}b{{/b}}{{/a}}.");
    CHECK(render_prompt(t, {{"a", "1"}, {"b", "1"}}) == "ab.");
    CHECK(render_prompt(t, {{"a", "1"}}) == "a.");
    CHECK(render_prompt(t, {{"b", "1"}}) == ".");
}

TEST_CASE("values cannot inject placeholders") {
    PromptTemplate t("t", "x{{v}}y{{w}}");
    const auto out = render_prompt(t, {{"v", "{{w}} and {"}, {"w", "{tail"}});
    CHECK(out.find("{{") == std::string::npos);
    CHECK(out.find("w}}") != std::string::npos);
}

TEST_CASE("malformed templates are rejected") {
    CHECK(error_code_of([] { PromptTemplate("t", "{{#a}}open"); }) == Errc::Config);
    CHECK(error_code_of([] { PromptTemplate("t", "{{#a}}x{{/b}}"); }) == Errc::Config);
}

TEST_CASE("library loads the bundled templates") {
    TemplateLibrary lib;
    lib.load_dir(testing::asset("templates"));
    for (const char* id : {"relevance_detect", "relevance_validate", "stigma_classify", "stigma_explain",
                           "rewrite_baseline", "rewrite_informed", "rewrite_stylized"}) {
        CAPTURE(id);
        REQUIRE(lib.contains(id));
        CHECK(lib.get(id).required_slots().count("post") == 1);
    }
    CHECK(lib.get("rewrite_baseline").required_slots() == std::set<std::string>{"post"});
    CHECK(error_code_of([&] { lib.get("nope"); }) == Errc::UnknownTemplate);
    CHECK(error_code_of([&] { lib.load_dir("/definitely/missing"); }) == Errc::Config);
}

TEST_CASE("library replaces templates with the same id") {
    TemplateLibrary lib;
    lib.add(PromptTemplate("a", "one"));
    lib.add(PromptTemplate("a", "two"));
    CHECK(lib.get("a").body() == "two");
}
