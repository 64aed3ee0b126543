#include "destigma/pipeline.hpp"

#include "destigma/corpus.hpp"
#include "destigma/emotion.hpp"
#include "destigma/error.hpp"
#include "destigma/evaluation.hpp"
#include "destigma/hashing.hpp"
#include "destigma/parallel.hpp"
#include "destigma/relevance.hpp"
#include "destigma/review.hpp"
#include "destigma/rewrite.hpp"
#include "destigma/stigma.hpp"
#include "destigma/style.hpp"
#include "destigma/substances.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

using nlohmann::json;

namespace destigma {

namespace fs = std::filesystem;

namespace {

std::vector<CleanPost> read_clean(const StageStore& store) {
    std::vector<CleanPost> posts;
    for (const auto& j : store.read_stage(kCleanStage)) {
        posts.push_back(j.get<CleanPost>());
    }
    return posts;
}

std::vector<StigmaRecord> read_stigma(const StageStore& store) {
    std::vector<StigmaRecord> out;
    for (const auto& j : store.read_stage(kStigmaStage)) {
        out.push_back(j.get<StigmaRecord>());
    }
    return out;
}

// Clean posts whose id is in `ids`, in clean-stage order.
std::vector<CleanPost> select_posts(const StageStore& store, const std::set<std::string>& ids) {
    std::vector<CleanPost> out;
    for (auto& p : read_clean(store)) {
        if (ids.count(p.id)) {
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::set<std::string> directed_ids(const std::vector<StigmaRecord>& records) {
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (r.stigma_type == StigmaType::Directed) {
            ids.insert(r.post_id);
        }
    }
    return ids;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const std::vector<std::string>& pipeline_stage_names() {
    static const std::vector<std::string> names{
        kRawStage,          kCleanStage,           kCleanRejectionsStage, kDetectorStage,
        kValidatedStage,    kQuarantineStage,      kStigmaStage,          kStigmaQuarantineStage,
        kProfileStage,      kRewritesStage,        kRewriteFailuresStage, kPairsStage,
        kEvaluationStage};
    return names;
}

Pipeline::Pipeline(PipelineConfig cfg, ProgressSink progress)
    : cfg_(std::move(cfg)), progress_(std::move(progress)), store_(cfg_.output_dir) {}

Pipeline::~Pipeline() = default;

Gateway& Pipeline::gateway() {
    if (!gateway_) {
        TemplateLibrary templates;
        templates.load_dir(cfg_.templates_dir);
        gateway_ = std::make_unique<Gateway>(std::move(templates), cfg_.rates, std::make_shared<SteadyClock>(),
                                             cfg_.retry, cfg_.seed);
        for (const auto& p : cfg_.providers) {
            gateway_->add_provider(p, make_provider(p));
        }
    }
    return *gateway_;
}

std::string Pipeline::last_good_stage() const {
    std::string last = "none";
    for (const auto& name : pipeline_stage_names()) {
        if (store_.completed(name)) {
            last = name;
        }
    }
    return last;
}

template <class Fn>
StageOutcome Pipeline::run_stage(const std::string& name, const std::vector<std::string>& outputs, Fn&& body) {
    auto emit = [&](json event) {
        if (progress_) {
            event["event"] = "stage";
            event["stage"] = name;
            progress_(event);
        }
    };
    StageOutcome outcome;
    outcome.stage = name;

    bool all_done = true;
    for (const auto& o : outputs) {
        all_done = all_done && store_.completed(o).has_value();
    }
    if (all_done) {
        const auto m = store_.completed(outputs.front());
        outcome.skipped = true;
        outcome.input_count = m->input_count;
        outcome.output_count = m->output_count;
        spdlog::info("{}: skipped, manifest present", name);
        emit(json{{"status", "skipped"}, {"input", outcome.input_count}, {"output", outcome.output_count}});
        return outcome;
    }

    emit(json{{"status", "started"}});
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const Error& e) {
        const auto last = last_good_stage();
        emit(json{{"status", "failed"}, {"error", errc_name(e.code())}, {"detail", e.detail()}});
        throw Error(Errc::StageFailure, fmt::format("stage {} failed ({}: {}); last completed stage: {}", name,
                                                    errc_name(e.code()), e.detail(), last));
    } catch (const std::exception& e) {
        const auto last = last_good_stage();
        emit(json{{"status", "failed"}, {"detail", e.what()}});
        throw Error(Errc::StageFailure,
                    fmt::format("stage {} failed ({}); last completed stage: {}", name, e.what(), last));
    }
    outcome.seconds = seconds_since(t0);
    const auto m = store_.completed(outputs.front());
    if (m) {
        outcome.input_count = m->input_count;
        outcome.output_count = m->output_count;
    }
    emit(json{{"status", "done"},
              {"input", outcome.input_count},
              {"output", outcome.output_count},
              {"seconds", outcome.seconds}});
    return outcome;
}

StageOutcome Pipeline::ingest() {
    const auto digest = sha256_file_hex(cfg_.input);
    if (auto m = store_.completed(kRawStage); m && m->extra.value("input_sha256", "") != digest) {
        throw Error(Errc::Config, "output directory " + store_.dir().string() +
                                      " holds a run over a different input; use a fresh output_dir");
    }
    return run_stage(kRawStage, {kRawStage}, [&] {
        std::vector<json> records;
        const auto stats =
            for_each_raw_post(cfg_.input, cfg_.schema, [&](RawPost&& p) { records.emplace_back(p); });
        if (!stats.malformed_lines.empty()) {
            spdlog::warn("ingest: skipped {} malformed line(s)", stats.malformed_lines.size());
        }
        store_.write_stage(kRawStage, records, stats.lines,
                           json{{"input_sha256", digest},
                                {"lines", stats.lines},
                                {"malformed", stats.malformed_lines.size()},
                                {"malformed_lines", stats.malformed_lines}});
    });
}

StageOutcome Pipeline::clean() {
    return run_stage(kCleanStage, {kCleanStage, kCleanRejectionsStage}, [&] {
        const auto raw = store_.read_stage(kRawStage);
        std::vector<json> accepted;
        std::vector<json> rejected;
        std::map<std::string, std::size_t> by_reason;
        for (const auto& j : raw) {
            const auto post = j.get<RawPost>();
            auto r = clean_filter(post, cfg_.corpus);
            if (r) {
                accepted.emplace_back(*r.accepted);
            } else {
                const std::string reason = reject_reason_name(r.reason);
                ++by_reason[reason];
                rejected.push_back(json{{"id", post.id}, {"reason", reason}});
            }
        }
        store_.write_stage(kCleanRejectionsStage, rejected, raw.size());
        store_.write_stage(kCleanStage, accepted, raw.size(), json{{"rejected", by_reason}});
        spdlog::info("clean: {} of {} posts accepted", accepted.size(), raw.size());
    });
}

StageOutcome Pipeline::relevance() {
    return run_stage("relevance", {kValidatedStage, kDetectorStage, kQuarantineStage}, [&] {
        const auto posts = read_clean(store_);
        run_relevance_stage(posts, gateway(), store_, cfg_.relevance);
    });
}

StageOutcome Pipeline::stigma() {
    return run_stage(kStigmaStage, {kStigmaStage, kStigmaQuarantineStage}, [&] {
        std::set<std::string> ids;
        for (const auto& j : store_.read_stage(kValidatedStage)) {
            ids.insert(j.at("post_id").get<std::string>());
        }
        const auto posts = select_posts(store_, ids);
        const auto lexicon = SubstanceLexicon::from_csv(cfg_.substances_lexicon);
        run_stigma_stage(posts, gateway(), store_, lexicon, cfg_.stigma);
    });
}

StageOutcome Pipeline::profile() {
    return run_stage(kProfileStage, {kProfileStage}, [&] {
        const auto records = read_stigma(store_);
        const auto posts = select_posts(store_, directed_ids(records));

        auto lexicon =
            std::make_shared<LexiconEmotionClassifier>(LexiconEmotionClassifier::from_csv(cfg_.emotion_lexicon));
        std::shared_ptr<const EmotionClassifier> classifier = lexicon;
        if (!cfg_.emotion_endpoint.empty()) {
            classifier = std::make_shared<RemoteEmotionClassifier>(cfg_.emotion_endpoint, lexicon);
        }

        std::vector<style::StyleProfile> profiles(posts.size());
        parallel_for(posts.size(), cfg_.workers, [&](std::size_t i) {
            profiles[i] = style::build_profile(posts[i].text(), *classifier, cfg_.mtld_threshold);
        });

        std::vector<double> mtlds;
        std::size_t undefined = 0;
        std::vector<json> out;
        for (std::size_t i = 0; i < posts.size(); ++i) {
            if (profiles[i].mtld) {
                mtlds.push_back(*profiles[i].mtld);
            } else {
                ++undefined;
            }
            out.push_back(json{{"post_id", posts[i].id}, {"profile", profiles[i]}});
        }
        const auto buckets = mtld_terciles(mtlds);
        store_.write_stage(kProfileStage, out, posts.size(),
                           json{{"mtld_buckets", {{"low", buckets.low}, {"high", buckets.high}}},
                                {"insufficient_variation", undefined}});
    });
}

StageOutcome Pipeline::rewrite() {
    return run_stage("rewrite", {kPairsStage, kRewritesStage, kRewriteFailuresStage}, [&] {
        const auto records = read_stigma(store_);
        RewriteInputs inputs;
        inputs.posts = select_posts(store_, directed_ids(records));
        for (const auto& r : records) {
            if (r.stigma_type == StigmaType::Directed && r.explanation) {
                inputs.explanations.emplace(r.post_id, *r.explanation);
            }
        }
        for (const auto& j : store_.read_stage(kProfileStage)) {
            inputs.profiles.emplace(j.at("post_id").get<std::string>(), j.at("profile").get<style::StyleProfile>());
        }
        RewriteOptions options = cfg_.rewrite;
        if (auto m = store_.completed(kProfileStage); m && m->extra.contains("mtld_buckets")) {
            options.buckets.low = m->extra["mtld_buckets"].value("low", options.buckets.low);
            options.buckets.high = m->extra["mtld_buckets"].value("high", options.buckets.high);
        }
        const auto report = run_rewrite_stage(inputs, gateway(), store_, cfg_.systems(), cfg_.models, options);
        spdlog::info("rewrite: {} rewrites, {} failures, {} complete and {} partial pairs", report.rewrites,
                     report.failures, report.complete_pairs, report.partial_pairs);
    });
}

StageOutcome Pipeline::evaluate() {
    return run_stage(kEvaluationStage, {kEvaluationStage}, [&] {
        std::vector<PairRecord> pairs;
        for (const auto& j : store_.read_stage(kPairsStage)) {
            pairs.push_back(j.get<PairRecord>());
        }
        std::vector<const PairRecord*> complete;
        for (const auto& p : pairs) {
            if (p.complete()) {
                complete.push_back(&p);
            }
        }
        const auto lexicon = PsychLexicon::from_csv(cfg_.psych_lexicon);

        std::vector<json> records;
        json flagged = json::object();
        json table = json::object();
        for (const auto& system : cfg_.systems()) {
            const auto id = system.str();
            std::vector<std::string> originals;
            std::vector<std::string> rewrites;
            for (const auto* p : complete) {
                originals.push_back(p->original);
                rewrites.push_back(p->rewrites.at(id));
            }
            json rec{{"system", id}};
            try {
                const auto cmp = compare_corpora(originals, rewrites, lexicon, cfg_.compare);
                rec["comparison"] = to_json(cmp);
                flagged[id] = cmp.flagged;
            } catch (const Error& e) {
                rec["error"] = std::string(errc_name(e.code())) + ": " + e.detail();
                spdlog::warn("evaluate: {} not compared ({})", id, e.detail());
            }
            table[id] = rec;
            records.push_back(std::move(rec));
        }
        write_file_atomic(store_.dir() / "features.json", table.dump(2) + "\n");

        json review;
        if (complete.size() >= cfg_.review_sample) {
            std::vector<std::string> systems;
            for (const auto& s : cfg_.systems()) {
                systems.push_back(s.str());
            }
            const auto tasks = sample_eval_tasks(pairs, cfg_.review_sample, cfg_.seed, systems);
            write_file_atomic(store_.dir() / "tasks.json", json(tasks).dump(2) + "\n");
            review = json{{"tasks", tasks.tasks.size()}, {"candidates", tasks.candidate_count()}};
        } else {
            spdlog::warn("evaluate: {} complete pairs, fewer than the review sample of {}; no tasks.json written",
                         complete.size(), cfg_.review_sample);
            review = json{{"tasks", 0}, {"skipped", "insufficient complete pairs"}};
        }
        store_.write_stage(kEvaluationStage, records, complete.size(),
                           json{{"flagged", flagged}, {"review", review}});
    });
}

void Pipeline::write_cost() const {
    if (!gateway_) {
        return;
    }
    const auto total = gateway_->ledger().total();
    json cost{{"models", gateway_->ledger().to_json()},
              {"total",
               {{"request_count", total.request_count},
                {"prompt_tokens", total.prompt_tokens},
                {"completion_tokens", total.completion_tokens},
                {"usd_estimate", total.usd_estimate}}}};
    write_file_atomic(store_.dir() / "cost.json", cost.dump(2) + "\n");
}

std::vector<StageOutcome> Pipeline::run() {
    fs::create_directories(store_.dir());
    std::vector<StageOutcome> outcomes;
    const auto& s = cfg_.stages;
    try {
        if (s.ingest) outcomes.push_back(ingest());
        if (s.clean) outcomes.push_back(clean());
        if (s.relevance) outcomes.push_back(relevance());
        if (s.stigma) outcomes.push_back(stigma());
        if (s.profile) outcomes.push_back(profile());
        if (s.rewrite) outcomes.push_back(rewrite());
        if (s.evaluate) outcomes.push_back(evaluate());
    } catch (...) {
        write_cost();
        throw;
    }
    write_cost();
    write_file_atomic(store_.dir() / "report.json", report_text(store_));
    if (progress_) {
        progress_(json{{"event", "run"}, {"status", "done"}, {"stages", outcomes.size()}});
    }
    return outcomes;
}

json build_report(const StageStore& store) {
    json report = json::object();
    json stages = json::array();
    json missing = json::array();
    std::map<std::string, StageManifest> m;
    for (const auto& name : pipeline_stage_names()) {
        if (auto man = store.completed(name)) {
            stages.push_back(json{{"stage", name},
                                  {"input", man->input_count},
                                  {"output", man->output_count},
                                  {"digest", man->content_digest}});
            m.emplace(name, *man);
        } else {
            missing.push_back(name);
        }
    }
    report["stages"] = stages;
    report["missing"] = missing;

    json funnel = json::object();
    if (m.count(kRawStage)) {
        funnel["input"] = m[kRawStage].output_count;
        funnel["malformed"] = m[kRawStage].extra.value("malformed", 0);
    }
    if (m.count(kCleanStage)) {
        funnel["clean"] = m[kCleanStage].output_count;
        funnel["rejected"] = m[kCleanStage].extra.value("rejected", json::object());
    }
    if (m.count(kDetectorStage)) {
        funnel["detector_positive"] = m[kDetectorStage].output_count;
    }
    if (m.count(kValidatedStage)) {
        funnel["validated"] = m[kValidatedStage].output_count;
    }
    if (m.count(kQuarantineStage)) {
        funnel["relevance_quarantined"] = m[kQuarantineStage].output_count;
    }
    if (m.count(kStigmaStage)) {
        const auto& e = m[kStigmaStage].extra;
        funnel["stigmatizing"] = e.value("Directed", 0) + e.value("Self", 0) + e.value("Structural", 0);
        report["stigma"] = json{{"Directed", e.value("Directed", 0)},
                                {"Self", e.value("Self", 0)},
                                {"Structural", e.value("Structural", 0)},
                                {"None", e.value("None", 0)},
                                {"quarantined", e.value("quarantined", 0)},
                                {"type_conflicts", e.value("type_conflicts", 0)},
                                {"explanation_missing", e.value("explanation_missing", 0)}};
        report["crosstab"] = crosstab_of(read_stigma(store)).to_json();
    }
    report["funnel"] = funnel;

    if (m.count(kProfileStage)) {
        report["profiles"] = json{{"count", m[kProfileStage].output_count},
                                  {"mtld_buckets", m[kProfileStage].extra.value("mtld_buckets", json())},
                                  {"insufficient_variation",
                                   m[kProfileStage].extra.value("insufficient_variation", 0)}};
    }
    if (m.count(kPairsStage)) {
        json pairs{{"complete", m[kPairsStage].extra.value("complete", 0)},
                   {"partial", m[kPairsStage].extra.value("partial", 0)},
                   {"digest", m[kPairsStage].content_digest}};
        if (m.count(kRewritesStage)) {
            pairs["rewrites"] = m[kRewritesStage].output_count;
        }
        if (m.count(kRewriteFailuresStage)) {
            pairs["rewrite_failures"] = m[kRewriteFailuresStage].output_count;
        }
        report["pairs"] = pairs;
    }
    if (m.count(kEvaluationStage)) {
        report["evaluation"] = json{{"pairs_compared", m[kEvaluationStage].input_count},
                                    {"flagged", m[kEvaluationStage].extra.value("flagged", json::object())},
                                    {"review", m[kEvaluationStage].extra.value("review", json::object())}};
    }
    return report;
}

std::string report_text(const StageStore& store) { return build_report(store).dump(2) + "\n"; }

bool print_run_summary(const fs::path& run_dir, std::ostream& out) {
    StageStore store(run_dir);
    const auto report = build_report(store);
    if (report["stages"].empty()) {
        out << "no stages found in " << run_dir.string() << "\n";
        return false;
    }

    const auto& f = report["funnel"];
    out << "Funnel\n";
    for (const char* key : {"input", "malformed", "clean", "detector_positive", "validated", "relevance_quarantined",
                            "stigmatizing"}) {
        if (f.contains(key)) {
            out << fmt::format("  {:<22}{:>8}\n", key, f[key].get<std::size_t>());
        }
    }
    if (f.contains("rejected")) {
        for (const auto& [reason, n] : f["rejected"].items()) {
            out << fmt::format("  rejected {:<13}{:>8}\n", reason, n.get<std::size_t>());
        }
    }

    if (report.contains("stigma")) {
        out << "\nStigma types\n";
        for (const auto& [k, v] : report["stigma"].items()) {
            out << fmt::format("  {:<22}{:>8}\n", k, v.get<std::size_t>());
        }
        Crosstab t = crosstab_of(read_stigma(store));
        out << "\nSubstance categories\n" << t.to_csv();
    }

    if (report.contains("pairs")) {
        const auto& p = report["pairs"];
        out << fmt::format("\nPairs: {} complete, {} partial\n", p["complete"].get<std::size_t>(),
                           p["partial"].get<std::size_t>());
    }

    if (report.contains("evaluation")) {
        const auto& e = report["evaluation"];
        out << fmt::format("\nFeature comparison over {} pairs\n", e["pairs_compared"].get<std::size_t>());
        for (const auto& rec : store.read_stage(kEvaluationStage)) {
            const auto system = rec["system"].get<std::string>();
            if (rec.contains("error")) {
                out << fmt::format("  {:<22}not compared: {}\n", system, rec["error"].get<std::string>());
                continue;
            }
            const auto& flagged = rec["comparison"]["flagged"];
            std::vector<std::string> names = flagged.get<std::vector<std::string>>();
            out << fmt::format("  {:<22}{}\n", system,
                               names.empty() ? std::string("no significant differences") : fmt::format("{}", fmt::join(names, ", ")));
        }
    }

    const auto tasks_file = run_dir / "tasks.json";
    const auto log_file = run_dir / "judgments.jsonl";
    if (fs::exists(tasks_file) && fs::exists(log_file)) {
        try {
            auto review = ReviewStore::open(tasks_file, log_file);
            out << "\nRanking tally\n" << review.results().to_csv();
        } catch (const Error& e) {
            out << "\nwarning: ranking tally unavailable: " << e.detail() << "\n";
        }
    }

    if (!report["missing"].empty()) {
        out << "\n";
        for (const auto& name : report["missing"]) {
            out << "warning: stage " << name.get<std::string>() << " has no valid manifest\n";
        }
    }
    return true;
}

}  // namespace destigma
