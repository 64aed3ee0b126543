// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero when any criterion fails.

#include "destigma/config.hpp"
#include "destigma/corpus.hpp"
#include "destigma/emotion.hpp"
#include "destigma/error.hpp"
#include "destigma/evaluation.hpp"
#include "destigma/pipeline.hpp"
#include "destigma/prompt.hpp"
#include "destigma/rate_limiter.hpp"
#include "destigma/review.hpp"
#include "destigma/rewrite.hpp"
#include "destigma/stage_store.hpp"
#include "destigma/stigma.hpp"
#include "destigma/style.hpp"
#include "destigma/substances.hpp"
#include "destigma/text.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace destigma;
using nlohmann::json;

namespace {

// Collects failures for one criterion; the first few are shown.
class Verdict {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok) {
            if (failures_.size() < 5) failures_.push_back(what);
            ++failed_;
        }
    }
    void note(std::string s) { note_ = std::move(s); }

    bool passed() const { return failed_ == 0 && checks_ > 0; }
    std::string summary() const {
        if (checks_ == 0) return "no checks ran";
        if (failed_ == 0) return note_.empty() ? fmt::format("{} checks", checks_) : note_;
        std::string s = fmt::format("{} of {} checks failed", failed_, checks_);
        for (const auto& f : failures_) s += "; " + f;
        return s;
    }

private:
    std::size_t checks_{0};
    std::size_t failed_{0};
    std::vector<std::string> failures_;
    std::string note_;
};

std::optional<Errc> code_of(const std::function<void()>& fn) { return testing::error_code_of(fn); }

json read_json(const std::filesystem::path& p) { return json::parse(testing::read_text(p)); }

std::vector<json> read_jsonl(const std::filesystem::path& p) {
    std::vector<json> out;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        if (!text::trim(line).empty()) out.push_back(json::parse(line));
    }
    return out;
}

// ---- criteria ----

void fixture_pipeline(Verdict& v) {
    testing::TempDir dir;
    auto cfg = parse_config(read_json(testing::fixture("pipeline_config.json")), testing::fixture(""));
    cfg.output_dir = dir.path();
    validate_config(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    Pipeline(cfg).run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.expect(secs < 10.0, fmt::format("run took {:.2f} s", secs));
    const auto golden = testing::read_text(testing::fixture("golden_report.json"));
    v.expect(testing::read_text(dir / "report.json") == golden, "report.json differs from the golden report");

    // A second run into a fresh directory is byte-identical too.
    testing::TempDir again;
    cfg.output_dir = again.path();
    Pipeline(cfg).run();
    v.expect(testing::read_text(again / "report.json") == golden, "second run differs from the golden report");
    v.note(fmt::format("golden report reproduced twice, first run {:.2f} s", secs));
}

void corpus_rules(Verdict& v) {
    std::mt19937_64 rng(1000);
    const std::vector<std::string> removed{"[removed]", "[deleted]", "  [removed]\n"};
    const std::vector<std::string> seps{" ", "  ", "\n", "\t", " \n "};
    testing::TempDir dir;
    std::ofstream dump(dir / "dump.jsonl");
    std::map<std::string, bool> expected;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    for (int i = 0; i < 1000; ++i) {
        RawPost p;
        p.id = "r" + std::to_string(i);
        p.author = rng() % 8 == 0 ? "[deleted]" : "user" + std::to_string(rng() % 50);
        const std::size_t tw = rng() % 8;
        const std::size_t bw = rng() % 14;
        for (std::size_t w = 0; w < tw; ++w) p.title += (w ? seps[rng() % seps.size()] : "") + std::string("tt");
        bool is_removed = false;
        if (rng() % 6 == 0) {
            p.body = removed[rng() % removed.size()];
            is_removed = true;
        } else {
            for (std::size_t w = 0; w < bw; ++w) p.body += (w ? seps[rng() % seps.size()] : "") + std::string("bb");
        }
        const bool ok = !is_removed && p.author != "[deleted]" && tw + bw >= 10;
        expected[p.id] = ok;
        const auto r = clean_filter(p);
        v.expect(static_cast<bool>(r) == ok, "post " + p.id);
        if (r) v.expect(r.accepted->combined_word_count == tw + bw, "word count of " + p.id);
        (r ? accepted : rejected) += 1;
        dump << json{{"id", p.id}, {"author", p.author}, {"title", p.title}, {"selftext", p.body},
                     {"created_utc", i}}
                    .dump()
             << '\n';
    }
    dump.close();
    v.expect(accepted + rejected == 1000, "accepted + rejected != input");

    // The same posts through the ingest and clean stages.
    PipelineConfig cfg;
    cfg.input = dir / "dump.jsonl";
    cfg.output_dir = dir / "run";
    Pipeline p(cfg);
    p.ingest();
    p.clean();
    const auto clean = p.store().completed(kCleanStage);
    const auto rej = p.store().completed(kCleanRejectionsStage);
    v.expect(clean && rej, "clean manifests missing");
    if (clean && rej) {
        v.expect(clean->output_count == accepted, "clean stage accepted count");
        v.expect(clean->output_count + rej->output_count == clean->input_count, "stage accepted + rejected != input");
        v.expect(clean->input_count == 1000, "stage input count");
    }
    for (const auto& j : p.store().read_stage(kCleanStage)) {
        v.expect(expected.at(j["id"].get<std::string>()), "stage kept " + j["id"].get<std::string>());
    }
    v.note(fmt::format("1000 posts: {} accepted, {} rejected", accepted, rejected));
}

void mtld_oracle(Verdict& v) {
    v.expect(std::fabs(style::mtld(std::vector<std::string>{"a", "a", "a", "a"}) - 2.0) <= 1e-12, "aaaa != 2.0");
    std::mt19937_64 rng(3030);
    std::size_t compared = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 30 + rng() % 271;
        const std::size_t vocab = 5 + rng() % 46;
        std::vector<std::string> tokens;
        for (std::size_t k = 0; k < n; ++k) tokens.push_back("w" + std::to_string(rng() % vocab));
        const auto want = oracle::mtld(tokens);
        if (!want) {
            v.expect(code_of([&] { style::mtld(tokens); }) == Errc::InsufficientVariation, "undefined MTLD");
            continue;
        }
        const double got = style::mtld(tokens);
        v.expect(std::fabs(got - *want) <= 1e-9, fmt::format("sequence {}: {} vs {}", i, got, *want));
        ++compared;
    }
    v.note(fmt::format("{} random sequences within 1e-9, aaaa -> 2.0", compared));
}

void t_test_oracle(Verdict& v) {
    std::mt19937_64 rng(4040);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + rng() % 150;
        std::normal_distribution<double> a(0.0, 1.0 + static_cast<double>(rng() % 4));
        std::normal_distribution<double> b(static_cast<double>(rng() % 5) * 0.3, 1.0);
        std::vector<double> x(n);
        std::vector<double> y(n);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] = a(rng);
            y[k] = b(rng);
        }
        const auto got = paired_t_test(x, y);
        const auto want = oracle::paired_t(x, y);
        v.expect(std::fabs(got.t - want.t) <= 1e-9 * std::max(1.0, std::fabs(want.t)), fmt::format("t of sample {}", i));
        v.expect(std::fabs(got.p - want.p) <= 1e-8, fmt::format("p of sample {}", i));
    }
    const std::vector<double> x{2.0, 4.0, 9.0, 1.5};
    const auto zero = paired_t_test(x, x);
    v.expect(zero.p == 1.0 && zero.t == 0.0, "all-zero differences must give p = 1");
    v.expect(code_of([] { paired_t_test({1, 2, 3}, {0, 1, 2}); }) == Errc::ZeroVariance,
             "constant differences must raise ZeroVariance");
    v.note("200 samples within 1e-9 (t) and 1e-8 (p); degenerate cases ok");
}

void kappa_oracle(Verdict& v) {
    const std::vector<std::string> a{"D", "ND", "D", "D", "ND"};
    v.expect(std::fabs(cohens_kappa(a, a) - 1.0) <= 1e-12, "identity");
    v.expect(std::fabs(cohens_kappa({"D", "ND", "D", "ND"}, {"ND", "D", "ND", "D"}) + 1.0) <= 1e-12, "anti-correlated");
    std::mt19937_64 rng(5050);
    const std::vector<std::string> labels{"a", "b", "c", "d", "e"};
    std::size_t compared = 0;
    while (compared < 100) {
        const std::size_t n = 2 + rng() % 300;
        const std::size_t k = 2 + rng() % 4;
        std::vector<std::string> x(n);
        std::vector<std::string> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = labels[rng() % k];
            y[i] = rng() % 2 ? x[i] : labels[rng() % k];
        }
        const double want = oracle::kappa(x, y);
        if (!std::isfinite(want)) continue;
        v.expect(std::fabs(cohens_kappa(x, y) - want) <= 1e-12, fmt::format("random pair {}", compared));
        ++compared;
    }
    v.note("identity 1.0, anti-correlated -1.0, 100 random pairs within 1e-12");
}

void classification_metrics(Verdict& v) {
    struct Case {
        ConfusionCounts c;
        double p;
        double r;
        double f1;
    };
    const std::vector<Case> cases{
        {{8, 2, 4, 100}, 0.8, 8.0 / 12.0, 2.0 * 0.8 * (8.0 / 12.0) / (0.8 + 8.0 / 12.0)},
        {{5, 0, 0, 0}, 1.0, 1.0, 1.0},
        {{0, 3, 2, 9}, 0.0, 0.0, 0.0},   // no true positives: all zero
        {{0, 0, 4, 1}, 0.0, 0.0, 0.0},   // nothing predicted positive
        {{0, 4, 0, 1}, 0.0, 0.0, 0.0},   // no positives in the gold
        {{3, 0, 1, 0}, 1.0, 0.75, 6.0 / 7.0},
        {{1, 1, 1, 1}, 0.5, 0.5, 0.5},
    };
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto got = precision_recall_f1(c.c);
        v.expect(std::fabs(got.precision - c.p) <= 1e-15 && std::fabs(got.recall - c.r) <= 1e-15 &&
                     std::fabs(got.f1 - c.f1) <= 1e-15,
                 fmt::format("case {}", i));
    }
    v.expect(code_of([] { precision_recall_f1({0, 0, 0, 7}); }) == Errc::EmptyConfusion, "empty confusion");
    v.note(fmt::format("{} confusion fixtures exact, empty confusion rejected", cases.size()));
}

void substance_crosstab(Verdict& v) {
    const std::vector<std::string> table_rows{
        "Stimulants",       "Cannabis",         "Narcotics",    "Depressants",
        "Hallucinogens",    "Reversal Agents",  "Drugs of Concern", "Synthetic Cannabinoids",
        "Other",            "Designer Drugs",   "Unspecified"};
    v.expect(all_substance_categories().size() == table_rows.size(), "category count");
    for (std::size_t i = 0; i < table_rows.size() && i < kSubstanceCategoryCount; ++i) {
        v.expect(substance_category_name(all_substance_categories()[i]) == table_rows[i], "row " + table_rows[i]);
    }
    const auto lexicon = SubstanceLexicon::from_csv(testing::asset("lexicons/substances.csv"));
    Crosstab t;
    std::size_t posts = 0;
    std::size_t multi = 0;
    for (const auto& j : read_jsonl(testing::fixture("substance_posts.jsonl"))) {
        std::set<SubstanceCategory> want;
        for (const auto& c : j["categories"]) want.insert(*parse_substance_category(c.get<std::string>()));
        const auto got = lexicon.tag(j["text"].get<std::string>());
        v.expect(got == want, "tags of " + j["id"].get<std::string>());
        multi += got.size() > 1;
        t.add(*parse_stigma_type_name(j["type"].get<std::string>()), got);
        ++posts;
    }
    v.expect(posts == 30, "fixture size");
    v.expect(multi > 0, "fixture has no multi-category post");
    v.expect(t.to_csv() == testing::read_text(testing::fixture("substance_crosstab.csv")), "crosstab != hand count");
    v.note(fmt::format("11 categories; 30 posts ({} multi-category) match the hand count", multi));
}

void explanation_grounding(Verdict& v) {
    testing::TempDir dir;
    auto cfg = parse_config(read_json(testing::fixture("pipeline_config.json")), testing::fixture(""));
    cfg.output_dir = dir.path();
    Pipeline p(cfg);
    p.ingest();
    p.clean();
    p.relevance();
    p.stigma();
    std::map<std::string, std::string> texts;
    for (const auto& j : p.store().read_stage(kCleanStage)) texts[j["id"]] = j.get<CleanPost>().text();

    std::size_t verified = 0;
    auto check_span = [&](const std::string& normalized, const EvidenceSpan& s, const std::string& where) {
        if (!s.verified) return;
        ++verified;
        const bool in_range = s.char_start >= 0 && s.char_end >= s.char_start &&
                              static_cast<std::size_t>(s.char_end) <= normalized.size();
        v.expect(in_range && normalized.substr(static_cast<std::size_t>(s.char_start),
                                               static_cast<std::size_t>(s.char_end - s.char_start)) == s.quoted_text,
                 where + ": \"" + s.quoted_text + "\"");
    };
    for (const auto& j : p.store().read_stage(kStigmaStage)) {
        const auto r = j.get<StigmaRecord>();
        if (!r.explanation) continue;
        const auto normalized = text::collapse_whitespace(texts.at(r.post_id));
        for (const auto& s : r.explanation->all()) check_span(normalized, s, r.post_id);
    }
    const std::size_t from_pipeline = verified;

    for (const auto& j : read_jsonl(testing::fixture("contract_posts.jsonl"))) {
        CleanPost post;
        post.title = j["title"];
        post.body = j["body"];
        const auto normalized = text::collapse_whitespace(post.text());
        for (const auto& s : j["spans"]) {
            EvidenceSpan span;
            span.quoted_text = s["quote"];
            ground_span(span, normalized);
            v.expect(span.verified, j["id"].get<std::string>() + " did not ground");
            check_span(normalized, span, j["id"]);
        }
    }
    v.expect(from_pipeline > 0, "fixture run produced no verified spans");
    v.note(fmt::format("{} verified spans ({} from the fixture run) slice back to their quotes", verified,
                       from_pipeline));
}

void prompt_contracts(Verdict& v) {
    TemplateLibrary lib;
    lib.load_dir(testing::asset("templates"));
    const auto emotions = LexiconEmotionClassifier::from_csv(testing::asset("lexicons/emotion.csv"));
    std::size_t posts = 0;
    for (const auto& j : read_jsonl(testing::fixture("contract_posts.jsonl"))) {
        CleanPost post;
        post.id = j["id"];
        post.title = j["title"];
        post.body = j["body"];
        StigmaExplanation e;
        std::vector<std::string> quotes;
        for (const auto& s : j["spans"]) {
            EvidenceSpan span;
            span.element = *parse_stigma_element(s["element"].get<std::string>());
            span.quoted_text = s["quote"];
            span.rationale = s["rationale"];
            ground_span(span, text::collapse_whitespace(post.text()));
            if (span.verified) quotes.push_back(span.quoted_text);
            e.spans(span.element).push_back(span);
        }
        const auto profile = style::build_profile(post.text(), emotions);
        const auto d = verbalize_style(profile, {});
        const auto baseline = render_prompt(lib.get("rewrite_baseline"), baseline_slots(post));
        const auto informed = render_prompt(lib.get("rewrite_informed"), informed_slots(post, e));
        const auto stylized = render_prompt(lib.get("rewrite_stylized"), stylized_slots(post, e, profile, {}));
        auto has = [](const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; };
        const std::string id = post.id;

        for (const auto& q : quotes) {
            v.expect(has(informed, "\"" + q + "\""), id + ": informed lacks a quote");
            v.expect(has(stylized, "\"" + q + "\""), id + ": stylized lacks a quote");
            v.expect(!has(baseline, "\"" + q + "\""), id + ": baseline carries a quote");
        }
        v.expect(!profile.top_emotion.empty(), id + ": no emotion label");
        v.expect(has(stylized, "tone: " + profile.top_emotion), id + ": stylized lacks the emotion label");
        v.expect(!has(baseline, "tone: ") && !has(informed, "tone: "), id + ": emotion label outside stylized");
        v.expect(has(stylized, d.voice) && has(stylized, d.sentence_length), id + ": stylized lacks directives");
        v.expect(has(stylized, "vocabulary:") == profile.mtld.has_value(), id + ": vocabulary directive");
        v.expect(d.variation.has_value() == (profile.sentence_len_std > 5.0), id + ": variation applicability");
        if (d.variation) v.expect(has(stylized, *d.variation), id + ": variation directive");
        bool any_punct = false;
        for (const auto& [mark, n] : profile.punctuation_counts) any_punct = any_punct || n > 0;
        v.expect(d.punctuation.has_value() == any_punct, id + ": punctuation applicability");
        if (d.punctuation) v.expect(has(stylized, *d.punctuation), id + ": punctuation directive");
        for (const auto* directive : {&d.voice, &d.sentence_length}) {
            v.expect(!has(baseline, *directive) && !has(informed, *directive), id + ": style directive leaked");
        }
        ++posts;
    }
    v.expect(posts == 20, fmt::format("{} contract posts", posts));
    v.note(fmt::format("{} posts: quotes, emotion label and style directives placed correctly", posts));
}

void rate_limiter(Verdict& v) {
    using namespace std::chrono_literals;
    std::mt19937_64 rng(6060);
    struct Schedule {
        std::string name;
        RateLimitConfig limits;
        std::vector<Micros> arrivals;
    };
    std::vector<Schedule> schedules;
    const std::size_t n = 10'000;

    Schedule flood{"all at once", {600, 600}, {}};
    flood.arrivals.assign(n, Micros{0});
    schedules.push_back(std::move(flood));

    // Clumps landing just before and after each window edge.
    Schedule edges{"window edges", {300, 300}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::int64_t>(i / 400);
        edges.arrivals.push_back(Micros{60s} * k + (i % 2 ? Micros{-1} : Micros{1}) + Micros{1});
    }
    std::sort(edges.arrivals.begin(), edges.arrivals.end());
    schedules.push_back(std::move(edges));

    // Just above the sustained rate, with a large burst allowance.
    Schedule steady{"slightly over rate", {1000, 1000}, {}};
    for (std::size_t i = 0; i < n; ++i) steady.arrivals.push_back(Micros{59'000} * static_cast<std::int64_t>(i));
    schedules.push_back(std::move(steady));

    // Idle long enough to refill, then a burst, repeated.
    Schedule bursts{"idle then burst", {120, 60}, {}};
    Micros t{0};
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 250 == 0) t += Micros{static_cast<std::int64_t>(rng() % 180'000'000)};
        bursts.arrivals.push_back(t);
    }
    schedules.push_back(std::move(bursts));

    Schedule random{"random", {90, 45}, {}};
    t = Micros{0};
    for (std::size_t i = 0; i < n; ++i) {
        t += Micros{static_cast<std::int64_t>(rng() % 4 == 0 ? rng() % 70'000'000 : rng() % 100'000)};
        random.arrivals.push_back(t);
    }
    schedules.push_back(std::move(random));

    std::size_t total = 0;
    for (const auto& s : schedules) {
        RateLimiter lim(s.limits);
        SimulatedClock clock;
        std::vector<Micros> grants;
        grants.reserve(s.arrivals.size());
        for (const auto arrival : s.arrivals) {
            if (clock.now() < arrival) clock.advance(arrival - clock.now());
            const auto wait = lim.acquire(clock.now());
            v.expect(wait.count() >= 0, s.name + ": negative wait");
            clock.sleep_for(wait);
            grants.push_back(clock.now());
        }
        const auto worst = oracle::max_in_window(grants, Micros{60s});
        v.expect(worst <= static_cast<std::size_t>(s.limits.rpm),
                 fmt::format("{}: {} dispatches in one window, rpm {}", s.name, worst, s.limits.rpm));
        total += grants.size();
    }
    v.note(fmt::format("{} schedules, {} requests, no 60 s window above rpm", schedules.size(), total));
}

void self_comparison(Verdict& v) {
    const auto lexicon = PsychLexicon::from_csv(testing::asset("lexicons/psych.csv"));
    std::vector<std::string> originals;
    for (const auto& j : read_jsonl(testing::fixture("contract_posts.jsonl"))) {
        originals.push_back(j["title"].get<std::string>() + " " + j["body"].get<std::string>());
    }
    const auto c = compare_corpora(originals, originals, lexicon);
    v.expect(c.flagged.empty(), "features flagged");
    std::size_t tested = 0;
    for (const auto& f : c.features) {
        v.expect(f.test.has_value(), f.feature + ": no test");
        if (f.test) {
            v.expect(f.test->p == 1.0, f.feature + fmt::format(": p = {}", f.test->p));
            ++tested;
        }
    }
    v.expect(tested > 0, "no features tested");
    v.note(fmt::format("{} features, p = 1.0 for all, none flagged", tested));
}

std::vector<PairRecord> synthetic_pairs(std::size_t n, const std::vector<std::string>& systems) {
    std::vector<PairRecord> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        PairRecord p;
        p.post_id = "p" + std::to_string(i);
        p.original = "original " + std::to_string(i);
        for (std::size_t k = 0; k < systems.size(); ++k) {
            p.rewrites[systems[k]] = fmt::format("candidate {} of post {}", k, i);
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

const std::vector<std::string> kSystems{"baseline/gpt4", "informed/gpt4", "stylized/gpt4",
                                        "baseline/llama", "informed/llama", "stylized/llama"};

void eval_sampling(Verdict& v) {
    const auto pairs = synthetic_pairs(400, kSystems);
    const auto a = sample_eval_tasks(pairs, 110, 42, kSystems);
    const auto b = sample_eval_tasks(pairs, 110, 42, kSystems);
    v.expect(a.tasks.size() == 110, "task count");
    v.expect(a.candidate_count() == 660, fmt::format("{} candidate texts", a.candidate_count()));
    v.expect(json(a) == json(b), "same seed gave different task sets");
    v.expect(json(a) != json(sample_eval_tasks(pairs, 110, 43, kSystems)), "seed has no effect");
    for (const auto& t : a.tasks) {
        std::set<std::string> systems;
        for (const auto& [id, s] : t.blinding) systems.insert(s);
        v.expect(systems.size() == 6, t.task_id + ": systems");
        const auto payload = task_payload(t).dump();
        for (const auto& s : kSystems) v.expect(payload.find(s) == std::string::npos, t.task_id + ": payload names " + s);
    }
    v.note("110 tasks x 6 systems = 660 candidate texts; seed-deterministic");
}

void tally_conservation(Verdict& v) {
    std::mt19937_64 rng(7070);
    const auto set = sample_eval_tasks(synthetic_pairs(60, kSystems), 50, 9, kSystems);
    const auto blinding = set.blinding();
    std::size_t fixtures = 0;
    for (int round = 0; round < 50; ++round) {
        std::vector<Judgment> js;
        const std::size_t n = rng() % 300;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& task = set.tasks[rng() % set.tasks.size()];
            auto pick = [&] {
                switch (rng() % 12) {
                    case 0: return std::string();
                    case 1: return std::string("c-unknown");
                    case 2: return set.tasks[rng() % set.tasks.size()].candidates[0].blinded_id;
                    default: return task.candidates[rng() % task.candidates.size()].blinded_id;
                }
            };
            Judgment j{rng() % 40 == 0 ? "t-missing" : task.task_id, "r" + std::to_string(rng() % 5), pick(), pick(),
                       pick(), "", ""};
            js.push_back(std::move(j));
        }
        const auto t = tally_rankings(js, blinding, kSystems);
        v.expect(t.complete + t.incomplete + t.rejected == js.size(), "judgments lost");
        for (std::size_t c = 0; c < kRankingCriteria.size(); ++c) {
            v.expect(t.column_sum(c) == t.complete, fmt::format("round {} column {}", round, c));
        }
        ++fixtures;
    }

    // Through the review store as well.
    testing::TempDir dir;
    ReviewStore store(set, dir / "judgments.jsonl", Assignment::Overlapping);
    std::size_t stored = 0;
    for (int r = 0; r < 4; ++r) {
        const auto reviewer = "rev" + std::to_string(r);
        while (auto task = store.next_task(reviewer)) {
            const auto& c = (*task)["candidates"];
            Judgment j;
            j.task_id = (*task)["task_id"];
            j.reviewer_id = reviewer;
            j.best_quality = c[rng() % c.size()]["blinded_id"];
            j.most_destigmatized = c[rng() % c.size()]["blinded_id"];
            if (rng() % 5) j.most_faithful = c[rng() % c.size()]["blinded_id"];
            store.submit(j);
            ++stored;
        }
    }
    const auto t = store.results();
    v.expect(t.complete + t.incomplete == stored, "store lost judgments");
    for (std::size_t c = 0; c < kRankingCriteria.size(); ++c) {
        v.expect(t.column_sum(c) == t.complete, fmt::format("store column {}", c));
    }
    v.note(fmt::format("{} random fixtures and {} stored judgments: every column sums to the complete count",
                       fixtures, stored));
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    const std::vector<std::pair<std::string, void (*)(Verdict&)>> criteria{
        {"fixture pipeline determinism", fixture_pipeline},
        {"corpus rules on 1000 random posts", corpus_rules},
        {"MTLD oracle equivalence", mtld_oracle},
        {"paired t-test oracle equivalence", t_test_oracle},
        {"Cohen's kappa", kappa_oracle},
        {"classification metrics", classification_metrics},
        {"substance tagging crosstab", substance_crosstab},
        {"explanation grounding", explanation_grounding},
        {"prompt contracts", prompt_contracts},
        {"rate limiter window", rate_limiter},
        {"self-comparison null result", self_comparison},
        {"evaluation sampling arithmetic", eval_sampling},
        {"tally conservation", tally_conservation},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Verdict v;
        try {
            fn(v);
        } catch (const std::exception& e) {
            v.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << (v.passed() ? "[PASS] " : "[FAIL] ") << name << ": " << v.summary() << std::endl;
        failed += v.passed() ? 0 : 1;
    }
    std::cout << fmt::format("{}/{} criteria passed", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size())
              << std::endl;
    return failed == 0 ? 0 : 1;
}
