#include <doctest.h>

#include "destigma/config.hpp"
#include "destigma/error.hpp"
#include "destigma/pipeline.hpp"
#include "test_support.hpp"

#include <fstream>
#include <sstream>

using namespace destigma;
using nlohmann::json;
using testing::error_code_of;

namespace {

json fixture_doc() { return json::parse(testing::read_text(testing::fixture("pipeline_config.json"))); }

PipelineConfig fixture_config(const std::filesystem::path& out, json doc = fixture_doc()) {
    auto cfg = parse_config(doc, testing::fixture(""));
    cfg.output_dir = out;
    return cfg;
}

std::string config_error_of(const json& doc) {
    try {
        validate_config(parse_config(doc, testing::fixture("")));
    } catch (const Error& e) {
        CHECK(e.code() == Errc::Config);
        return e.detail();
    }
    return "";
}

}  // namespace

TEST_CASE("fixture config parses") {
    const auto cfg = fixture_config("/tmp/unused");
    CHECK(cfg.seed == 7);
    CHECK(cfg.providers.size() == 3);
    CHECK(cfg.regimes.size() == 3);
    CHECK(cfg.systems().size() == 6);
    CHECK(cfg.model_labels() == std::vector<std::string>{"gpt4", "llama"});
    CHECK(cfg.relevance.workers == 4);
    CHECK(cfg.rates.per_model.count("gpt-4-turbo") == 1);
    CHECK(cfg.rates.per_model.at("llama-3-70b-instruct").input_per_1k == 0.0);
    CHECK(cfg.input.is_absolute());
    validate_config(cfg);
    CHECK(config_summary(cfg).is_object());
}

TEST_CASE("example config parses") {
    const auto path = std::filesystem::path(DESTIGMA_ASSET_DIR).parent_path() / "config" / "example.json";
    const auto cfg = load_config(path);
    CHECK(cfg.providers.size() == 3);
    CHECK(cfg.systems().size() == 6);
    CHECK(cfg.review_sample == 110);
    CHECK(cfg.retry.base_delay == Micros{1'000'000});
}

TEST_CASE("config errors name the offending key") {
    auto doc = fixture_doc();
    CHECK(config_error_of(doc).empty());

    SUBCASE("type errors") {
        doc["seed"] = "seven";
        CHECK(error_code_of([&] { parse_config(doc, "."); }) == Errc::Config);
        CHECK(error_code_of([&] { parse_config(json::array(), "."); }) == Errc::Config);
    }
    SUBCASE("unknown regime") {
        doc["rewrite"]["regimes"] = {"baseline", "poetic"};
        CHECK(error_code_of([&] { parse_config(doc, "."); }) == Errc::Config);
    }
    SUBCASE("unknown assignment") {
        doc["review"]["assignment"] = "random";
        CHECK(error_code_of([&] { parse_config(doc, "."); }) == Errc::Config);
    }
    SUBCASE("missing input") {
        doc["input"] = "nowhere.jsonl";
        CHECK(config_error_of(doc).find("input not found") != std::string::npos);
    }
    SUBCASE("unknown provider reference") {
        doc["stigma"]["provider"] = "ghost";
        CHECK(config_error_of(doc).find("ghost") != std::string::npos);
    }
    SUBCASE("duplicate provider") {
        doc["providers"].push_back(doc["providers"][0]);
        CHECK(config_error_of(doc).find("duplicate name") != std::string::npos);
    }
    SUBCASE("bad provider kind") {
        doc["providers"][0]["kind"] = "carrier-pigeon";
        CHECK(config_error_of(doc).find("unknown kind") != std::string::npos);
    }
    SUBCASE("hosted provider without url") {
        doc["providers"][0]["kind"] = "openai";
        CHECK(config_error_of(doc).find("base_url") != std::string::npos);
    }
    SUBCASE("burst above rpm") {
        doc["providers"][0]["burst"] = 700000;
        CHECK_FALSE(config_error_of(doc).empty());
    }
    SUBCASE("thresholds") {
        doc["thresholds"]["mtld"] = 1.5;
        CHECK(config_error_of(doc).find("thresholds.mtld") != std::string::npos);
    }
    SUBCASE("duplicate model label") {
        doc["rewrite"]["models"][1]["label"] = "gpt4";
        CHECK(config_error_of(doc).find("duplicate label") != std::string::npos);
    }
    SUBCASE("zero batch size") {
        doc["relevance"]["batch_size"] = 0;
        CHECK(config_error_of(doc).find("batch_size") != std::string::npos);
    }
    SUBCASE("unreadable file") {
        testing::TempDir dir;
        testing::write_text(dir / "bad.json", "{ nope");
        CHECK(error_code_of([&] { load_config(dir / "bad.json"); }) == Errc::Config);
        CHECK(error_code_of([&] { load_config(dir / "absent.json"); }) == Errc::Config);
    }
}

TEST_CASE("fixture run reproduces the golden report and resumes") {
    testing::TempDir dir;
    std::vector<json> events;
    {
        Pipeline p(fixture_config(dir.path()), [&](const json& e) { events.push_back(e); });
        const auto outcomes = p.run();
        CHECK(outcomes.size() == 7);
        for (const auto& o : outcomes) CHECK_FALSE(o.skipped);
    }
    CHECK(testing::read_text(dir / "report.json") == testing::read_text(testing::fixture("golden_report.json")));
    CHECK(report_text(StageStore(dir.path())) == testing::read_text(dir / "report.json"));
    CHECK(json::parse(testing::read_text(dir / "cost.json")).is_object());

    std::size_t started = 0;
    for (const auto& e : events) started += e.value("status", "") == "started";
    CHECK(started == 7);

    Pipeline again(fixture_config(dir.path()));
    for (const auto& o : again.run()) {
        CAPTURE(o.stage);
        CHECK(o.skipped);
    }
    CHECK(testing::read_text(dir / "report.json") == testing::read_text(testing::fixture("golden_report.json")));

    std::ostringstream summary;
    CHECK(print_run_summary(dir.path(), summary));
    CHECK(summary.str().find("Funnel") != std::string::npos);
    CHECK(summary.str().find("Substance categories") != std::string::npos);
}

TEST_CASE("a run directory holds one input") {
    testing::TempDir dir;
    Pipeline(fixture_config(dir.path())).ingest();
    testing::write_text(dir / "other.jsonl", testing::read_text(testing::fixture("corpus50.jsonl")) + "\n");
    auto cfg = fixture_config(dir.path());
    cfg.input = dir / "other.jsonl";
    Pipeline p(cfg);
    CHECK(error_code_of([&] { p.ingest(); }) == Errc::Config);
}

TEST_CASE("a failing stage names the last completed one") {
    testing::TempDir dir;
    testing::write_text(dir / "empty.jsonl", "");
    auto doc = fixture_doc();
    for (auto& p : doc["providers"]) p["fixtures"] = (dir / "empty.jsonl").string();
    Pipeline p(fixture_config(dir.path(), doc));
    try {
        p.run();
        FAIL("expected StageFailure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::StageFailure);
        CHECK(e.detail().find("stage relevance failed") != std::string::npos);
        CHECK(e.detail().find("last completed stage: clean") != std::string::npos);
    }
    CHECK(p.store().completed(kCleanStage));
    CHECK_FALSE(p.store().completed(kValidatedStage));
}

TEST_CASE("summary of an empty directory") {
    testing::TempDir dir;
    std::ostringstream out;
    CHECK_FALSE(print_run_summary(dir.path(), out));
    CHECK(out.str().find("no stages found") != std::string::npos);
    CHECK(pipeline_stage_names().front() == kRawStage);
}
