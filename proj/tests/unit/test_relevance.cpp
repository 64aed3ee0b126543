#include <doctest.h>

#include "destigma/error.hpp"
#include "destigma/relevance.hpp"
#include "fake_provider.hpp"
#include "test_support.hpp"

using namespace destigma;
using testing::error_code_of;

namespace {

CleanPost post(const std::string& id, const std::string& body) {
    CleanPost p;
    p.id = id;
    p.title = "title " + id;
    p.body = body;
    p.combined_word_count = 12;
    return p;
}

bool has(const ChatRequest& r, const std::string& s) { return r.prompt.find(s) != std::string::npos; }

// Detector and validator behaviour keyed on markers in the post body.
std::string answer(const ChatRequest& r) {
    const bool reask = has(r, std::string(kRelevanceReask));
    if (r.template_id == "relevance_detect") {
        if (has(r, "[garble]")) return "hard to tell";
        if (has(r, "[garble-once]")) return reask ? "ND" : "it depends";
        return has(r, "[drug]") ? "D" : "ND";
    }
    if (has(r, "[vgarble]")) return "???";
    return has(r, "[reject]") ? "ND" : "D";
}

struct Setup {
    TemplateLibrary lib;
    std::unique_ptr<Gateway> gw;
    std::shared_ptr<std::atomic<int>> calls = std::make_shared<std::atomic<int>>(0);

    explicit Setup(testing::FnProvider::Fn fn = answer) {
        lib.load_dir(testing::asset("templates"));
        gw = testing::make_gateway(lib);
        gw->add_provider(testing::fast_provider("det"), std::make_unique<testing::FnProvider>(fn, calls));
        gw->add_provider(testing::fast_provider("val", "m2"), std::make_unique<testing::FnProvider>(fn, calls));
    }

    RelevanceOptions options(std::size_t batch) const {
        RelevanceOptions o;
        o.detector_provider = "det";
        o.validator_provider = "val";
        o.batch_size = batch;
        o.workers = 3;
        return o;
    }
};

std::vector<CleanPost> sample_posts() {
    return {post("p1", "[drug] used at the party"),   post("p2", "nothing relevant here"),
            post("p3", "[drug] [reject] pharmacy"),  post("p4", "[garble] unclear"),
            post("p5", "[garble-once] still fine"), post("p6", "[drug] [vgarble] odd"),
            post("p7", "[drug] again")};
}

}  // namespace

TEST_CASE("parse D/ND answers") {
    CHECK(parse_relevance_answer("D") == RelevanceLabel::Drug);
    CHECK(parse_relevance_answer("ND") == RelevanceLabel::NonDrug);
    CHECK(parse_relevance_answer(" nd.") == RelevanceLabel::NonDrug);
    CHECK(parse_relevance_answer("Non-drug") == RelevanceLabel::NonDrug);
    CHECK(parse_relevance_answer("Answer: D") == RelevanceLabel::Drug);
    CHECK(parse_relevance_answer("drugs") == RelevanceLabel::Drug);
    CHECK(parse_relevance_answer("D\nactually ND") == RelevanceLabel::Drug);
    CHECK_FALSE(parse_relevance_answer(""));
    CHECK_FALSE(parse_relevance_answer("I don't know"));
    CHECK_FALSE(parse_relevance_answer("Dd"));
}

TEST_CASE("detector re-asks once, then gives up") {
    Setup s;
    const auto v = detect_drug_relevance(post("a", "[garble-once] x"), *s.gw, "det");
    CHECK(v.label == RelevanceLabel::NonDrug);
    CHECK(v.reasked);
    CHECK(v.raw_response == "ND");
    CHECK(v.template_hash == s.lib.get("relevance_detect").hash());
    CHECK(*s.calls == 2);

    try {
        detect_drug_relevance(post("b", "[garble] x"), *s.gw, "det");
        FAIL("expected ParseFailure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ParseFailure);
        CHECK(e.detail() == "b");
    }
}

TEST_CASE("validator requires a positive detector verdict") {
    Setup s;
    const auto p = post("a", "[drug] x");
    const auto det = detect_drug_relevance(p, *s.gw, "det");
    const auto val = validate_relevance(p, det, *s.gw, "val");
    CHECK(val.stage == RelevanceStage::Validator);
    CHECK(val.model_id == "m2");

    auto negative = det;
    negative.label = RelevanceLabel::NonDrug;
    CHECK(error_code_of([&] { validate_relevance(p, negative, *s.gw, "val"); }) == Errc::Precondition);
    auto other = det;
    other.post_id = "zzz";
    CHECK(error_code_of([&] { validate_relevance(p, other, *s.gw, "val"); }) == Errc::Precondition);
    auto wrong_stage = val;
    CHECK(error_code_of([&] { validate_relevance(p, wrong_stage, *s.gw, "val"); }) == Errc::Precondition);
}

TEST_CASE("verdict json round trip") {
    RelevanceVerdict v{"id", RelevanceLabel::Drug, RelevanceStage::Validator, "D", "m", "h", true};
    const auto back = nlohmann::json(v).get<RelevanceVerdict>();
    CHECK(back.label == RelevanceLabel::Drug);
    CHECK(back.stage == RelevanceStage::Validator);
    CHECK(back.reasked);
    CHECK(nlohmann::json(v)["label"] == "D");
}

TEST_CASE("relevance stage funnels, quarantines and keeps order") {
    Setup s;
    testing::TempDir dir;
    StageStore store(dir.path());
    const auto posts = sample_posts();
    const auto r = run_relevance_stage(posts, *s.gw, store, s.options(3));
    CHECK(r.input_count == 7);
    CHECK(r.detector_positive_count == 4);  // p1 p3 p6 p7
    CHECK(r.validated_positive_count == 2);  // p1 p7
    CHECK(r.quarantined_count == 2);         // p4 detector, p6 validator
    CHECK(r.batches_reused == 0);

    const auto validated = store.read_stage(kValidatedStage);
    REQUIRE(validated.size() == 2);
    CHECK(validated[0]["post_id"] == "p1");
    CHECK(validated[1]["post_id"] == "p7");
    const auto quarantine = store.read_stage(kQuarantineStage);
    REQUIRE(quarantine.size() == 2);
    CHECK(quarantine[0]["post_id"] == "p4");
    CHECK(quarantine[0]["stage"] == "detector");
    CHECK(quarantine[1]["post_id"] == "p6");
    CHECK(quarantine[1]["stage"] == "validator");
    CHECK(store.completed(kDetectorStage)->input_count == 7);
    CHECK(store.completed(kValidatedStage)->input_count == 4);
}

TEST_CASE("finished batches are reused after a failure") {
    testing::TempDir dir;
    StageStore store(dir.path());
    const auto posts = sample_posts();

    std::atomic<bool> broken{true};
    Setup failing([&](const ChatRequest& r) -> std::string {
        if (broken && has(r, "[drug] again")) {
            throw ProviderFailure(ProviderFailure::Kind::Auth, 401, "denied");
        }
        return answer(r);
    });
    try {
        run_relevance_stage(posts, *failing.gw, store, failing.options(3));
        FAIL("expected StageFailure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::StageFailure);
        CHECK(e.detail().find("batch 3/3") != std::string::npos);
    }
    CHECK_FALSE(store.completed(kValidatedStage));

    Setup fixed;
    const auto r = run_relevance_stage(posts, *fixed.gw, store, fixed.options(3));
    CHECK(r.batches_reused == 2);
    CHECK(*fixed.calls == 2);  // only p7: detector and validator
    CHECK(r.validated_positive_count == 2);

    // Everything checkpointed: a second run makes no calls at all.
    store.invalidate(kValidatedStage);
    Setup again;
    const auto r2 = run_relevance_stage(posts, *again.gw, store, again.options(3));
    CHECK(*again.calls == 0);
    CHECK(r2.batches_reused == 3);
    CHECK(r2.quarantined_count == 2);
}

TEST_CASE("zero batch size is a configuration error") {
    Setup s;
    testing::TempDir dir;
    StageStore store(dir.path());
    CHECK(error_code_of([&] { run_relevance_stage(sample_posts(), *s.gw, store, s.options(0)); }) == Errc::Config);
}
