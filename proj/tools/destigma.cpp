// destigma command line: pipeline stages, evaluation and the review server.

#include "destigma/config.hpp"
#include "destigma/error.hpp"
#include "destigma/evaluation.hpp"
#include "destigma/pipeline.hpp"
#include "destigma/review.hpp"
#include "destigma/stage_store.hpp"
#include "destigma/text.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
    std::string config;
    std::string input;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool progress_json{false};
    bool verbose{false};
    bool quiet{false};
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!destigma::text::trim(cur).empty()) out.emplace_back(destigma::text::trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!destigma::text::trim(cur).empty()) out.emplace_back(destigma::text::trim(cur));
    return out;
}

destigma::PipelineConfig load_with_overrides(const CommonOptions& o) {
    destigma::PipelineConfig cfg;
    if (!o.config.empty()) {
        cfg = destigma::load_config(o.config);
    } else {
        cfg = destigma::parse_config(json::object(), fs::current_path());
    }
    if (!o.input.empty()) cfg.input = fs::absolute(o.input);
    if (!o.output_dir.empty()) cfg.output_dir = fs::absolute(o.output_dir);
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) {
        cfg.workers = *o.workers;
        cfg.relevance.workers = cfg.stigma.workers = cfg.rewrite.workers = *o.workers;
    }
    return cfg;
}

destigma::ProgressSink progress_sink(const CommonOptions& o) {
    if (!o.progress_json) {
        return {};
    }
    return [](const json& event) {
        std::cout << event.dump() << "\n";
        std::cout.flush();
    };
}

void only_stages(destigma::PipelineConfig& cfg, std::initializer_list<bool destigma::StageToggles::*> keep) {
    destigma::StageToggles none{false, false, false, false, false, false, false};
    for (auto member : keep) {
        none.*member = true;
    }
    cfg.stages = none;
}

int run_stages(const CommonOptions& o, std::initializer_list<bool destigma::StageToggles::*> keep,
               const std::function<void(destigma::PipelineConfig&)>& adjust = {}) {
    auto cfg = load_with_overrides(o);
    if (keep.size() > 0) {
        only_stages(cfg, keep);
    }
    if (adjust) {
        adjust(cfg);
    }
    destigma::validate_config(cfg);
    spdlog::info("output directory {}", cfg.output_dir.string());
    destigma::Pipeline pipeline(std::move(cfg), progress_sink(o));
    const auto outcomes = pipeline.run();
    for (const auto& s : outcomes) {
        spdlog::info("{:<18} {:>8} -> {:<8} {}", s.stage, s.input_count, s.output_count,
                     s.skipped ? "skipped" : fmt::format("{:.2f}s", s.seconds));
    }
    return 0;
}

int evaluate_pairs_file(const CommonOptions& o, const std::string& pairs_path, const std::string& report_dir) {
    auto cfg = load_with_overrides(o);
    std::ifstream in(pairs_path);
    if (!in) {
        throw destigma::Error(destigma::Errc::Config, "cannot read pairs file " + pairs_path);
    }
    std::vector<destigma::PairRecord> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (!destigma::text::trim(line).empty()) {
            pairs.push_back(json::parse(line).get<destigma::PairRecord>());
        }
    }
    std::vector<const destigma::PairRecord*> complete;
    for (const auto& p : pairs) {
        if (p.complete()) complete.push_back(&p);
    }
    if (complete.empty()) {
        throw destigma::Error(destigma::Errc::TooFewPairs, "no complete pairs in " + pairs_path);
    }
    const auto lexicon = destigma::PsychLexicon::from_csv(cfg.psych_lexicon);
    json table = json::object();
    for (const auto& [system, text] : complete.front()->rewrites) {
        (void)text;
        std::vector<std::string> originals;
        std::vector<std::string> rewrites;
        for (const auto* p : complete) {
            originals.push_back(p->original);
            rewrites.push_back(p->rewrites.at(system));
        }
        try {
            table[system] = destigma::to_json(destigma::compare_corpora(originals, rewrites, lexicon, cfg.compare));
        } catch (const destigma::Error& e) {
            table[system] = json{{"error", std::string(destigma::errc_name(e.code())) + ": " + e.detail()}};
        }
    }
    fs::create_directories(report_dir);
    destigma::write_file_atomic(fs::path(report_dir) / "features.json", table.dump(2) + "\n");
    spdlog::info("wrote {}", (fs::path(report_dir) / "features.json").string());
    return 0;
}

struct ServeOptions {
    std::string tasks;
    std::string log;
    std::string host{"127.0.0.1"};
    int port{8080};
    std::string static_dir;
    std::string assignment{"exclusive"};
    std::string pairs;
    std::size_t sample{110};
};

int serve_review(const CommonOptions& o, const ServeOptions& s) {
    const fs::path tasks_file(s.tasks);
    if (!s.pairs.empty() && !fs::exists(tasks_file)) {
        std::ifstream in(s.pairs);
        if (!in) {
            throw destigma::Error(destigma::Errc::Config, "cannot read pairs file " + s.pairs);
        }
        std::vector<destigma::PairRecord> pairs;
        std::string line;
        while (std::getline(in, line)) {
            if (!destigma::text::trim(line).empty()) pairs.push_back(json::parse(line).get<destigma::PairRecord>());
        }
        const auto tasks = destigma::sample_eval_tasks(pairs, s.sample, o.seed.value_or(42));
        destigma::write_file_atomic(tasks_file, json(tasks).dump(2) + "\n");
        spdlog::info("sampled {} tasks with {} candidates into {}", tasks.tasks.size(), tasks.candidate_count(),
                     tasks_file.string());
    }
    const auto assignment = destigma::parse_assignment(s.assignment);
    if (!assignment) {
        throw destigma::Error(destigma::Errc::Config, "unknown assignment mode '" + s.assignment + "'");
    }
    const fs::path log = s.log.empty() ? tasks_file.parent_path() / "judgments.jsonl" : fs::path(s.log);
    auto store = destigma::ReviewStore::open(tasks_file, log, *assignment);

    std::optional<fs::path> static_dir;
    if (!s.static_dir.empty()) {
        static_dir = s.static_dir;
    } else if (fs::is_directory(fs::path(DESTIGMA_ASSET_DIR) / "review_ui")) {
        static_dir = fs::path(DESTIGMA_ASSET_DIR) / "review_ui";
    }
    destigma::ReviewServer server(store, static_dir);
    const int port = server.bind(s.host, s.port);
    if (port < 0) {
        throw destigma::Error(destigma::Errc::Io, fmt::format("cannot bind {}:{}", s.host, s.port));
    }

    // Signals are handled on a dedicated thread so stop() runs outside a handler.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::jthread waiter([&](std::stop_token st) {
        timespec timeout{0, 200'000'000};
        while (!st.stop_requested()) {
            if (sigtimedwait(&set, nullptr, &timeout) > 0) {
                spdlog::info("shutting down");
                server.stop();
                return;
            }
        }
    });

    spdlog::info("review server on http://{}:{} ({} tasks, log {})", s.host, port, store.tasks().tasks.size(),
                 log.string());
    if (o.progress_json) {
        std::cout << json{{"event", "serve"}, {"host", s.host}, {"port", port}}.dump() << std::endl;
    }
    server.serve();
    waiter.request_stop();
    return 0;
}

int benchmark(const CommonOptions& o, std::string gold, std::string providers, const std::string& out_csv) {
    auto cfg = load_with_overrides(o);
    if (!gold.empty()) cfg.gold = fs::absolute(gold);
    if (!providers.empty()) cfg.benchmark_providers = split_list(providers);
    only_stages(cfg, {});
    destigma::validate_config(cfg);
    if (cfg.gold.empty()) {
        throw destigma::Error(destigma::Errc::Config, "benchmark needs a gold file");
    }
    if (cfg.benchmark_providers.empty()) {
        for (const auto& p : cfg.providers) cfg.benchmark_providers.push_back(p.name);
    }
    const auto items = destigma::load_gold(cfg.gold);
    destigma::Pipeline pipeline(cfg);
    const auto rows = destigma::benchmark_providers(items, cfg.benchmark_providers, pipeline.gateway(),
                                                    cfg.relevance.detector_template, cfg.workers);
    const auto csv = destigma::benchmark_csv(rows);
    if (out_csv.empty()) {
        std::cout << csv;
    } else {
        destigma::write_file_atomic(out_csv, csv);
        spdlog::info("wrote {}", out_csv);
    }
    return 0;
}

int exit_code_for(const destigma::Error& e) {
    switch (e.code()) {
    case destigma::Errc::Config:
    case destigma::Errc::Precondition:
        return kExitValidation;
    default:
        return kExitStage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"destigma: detect and rewrite stigmatizing language about substance use"};
    app.require_subcommand(1);

    CommonOptions common;
    auto add_common = [&](CLI::App* sub, bool with_input) {
        sub->add_option("-c,--config", common.config, "JSON config file");
        sub->add_option("-o,--out", common.output_dir, "Run directory (overrides output_dir)");
        sub->add_option("--seed", common.seed, "Random seed (overrides seed)");
        sub->add_option("--workers", common.workers, "Worker threads per stage")->check(CLI::PositiveNumber);
        sub->add_flag("--progress-json", common.progress_json, "Print progress events as JSON lines on stdout");
        sub->add_flag("-v,--verbose", common.verbose, "Debug logging");
        sub->add_flag("-q,--quiet", common.quiet, "Warnings and errors only");
        if (with_input) {
            sub->add_option("-i,--input", common.input, "Input JSONL dump (overrides input)");
        }
    };

    using T = destigma::StageToggles;
    std::function<int()> action;

    auto* run = app.add_subcommand("run", "Run the full pipeline, skipping completed stages");
    add_common(run, true);
    run->callback([&] { action = [&] { return run_stages(common, {}); }; });

    auto* ingest = app.add_subcommand("ingest", "Load the raw dump into the run directory");
    add_common(ingest, true);
    ingest->callback([&] { action = [&] { return run_stages(common, {&T::ingest}); }; });

    std::string filter_in;
    auto* filter = app.add_subcommand("filter", "Clean the corpus and run relevance detection and validation");
    add_common(filter, false);
    filter->add_option("--in", filter_in, "Run directory holding the ingested stage");
    filter->callback([&] {
        action = [&] {
            if (!filter_in.empty()) common.output_dir = filter_in;
            return run_stages(common, {&T::clean, &T::relevance});
        };
    });

    auto* detect = app.add_subcommand("detect-stigma", "Classify and explain stigma in validated posts");
    add_common(detect, false);
    detect->callback([&] { action = [&] { return run_stages(common, {&T::stigma}); }; });

    auto* profile = app.add_subcommand("profile", "Build style profiles for directed-stigma posts");
    add_common(profile, false);
    profile->callback([&] { action = [&] { return run_stages(common, {&T::profile}); }; });

    std::string systems_flag;
    std::string models_flag;
    auto* rewrite = app.add_subcommand("rewrite", "Generate rewrites and the pair dataset");
    add_common(rewrite, false);
    rewrite->add_option("--systems", systems_flag, "Regimes, e.g. baseline,informed,stylized");
    rewrite->add_option("--models", models_flag, "Model labels from the config, e.g. gpt4,llama");
    rewrite->callback([&] {
        action = [&] {
            return run_stages(common, {&T::rewrite}, [&](destigma::PipelineConfig& cfg) {
                if (!systems_flag.empty()) {
                    cfg.regimes.clear();
                    for (const auto& n : split_list(systems_flag)) {
                        auto r = destigma::parse_regime(n);
                        if (!r) throw destigma::Error(destigma::Errc::Config, "unknown regime '" + n + "'");
                        cfg.regimes.push_back(*r);
                    }
                }
                if (!models_flag.empty()) {
                    std::vector<destigma::ModelBinding> kept;
                    for (const auto& label : split_list(models_flag)) {
                        auto it = std::find_if(cfg.models.begin(), cfg.models.end(),
                                               [&](const auto& m) { return m.label == label; });
                        if (it == cfg.models.end()) {
                            throw destigma::Error(destigma::Errc::Config, "model '" + label + "' is not configured");
                        }
                        kept.push_back(*it);
                    }
                    cfg.models = kept;
                }
            });
        };
    });

    std::string pairs_flag;
    std::string report_flag;
    auto* evaluate = app.add_subcommand("evaluate", "Compare psycholinguistic features of originals and rewrites");
    add_common(evaluate, false);
    evaluate->add_option("--pairs", pairs_flag, "Pair dataset; when given, evaluate it outside any run directory");
    evaluate->add_option("--report", report_flag, "Directory for features.json when --pairs is given");
    evaluate->callback([&] {
        action = [&] {
            if (!pairs_flag.empty()) {
                return evaluate_pairs_file(common, pairs_flag, report_flag.empty() ? "." : report_flag);
            }
            return run_stages(common, {&T::evaluate});
        };
    });

    ServeOptions serve;
    auto* srv = app.add_subcommand("serve-review", "Serve the blinded human-evaluation interface");
    add_common(srv, false);
    srv->add_option("--tasks", serve.tasks, "Task file (written from --pairs when missing)")->required();
    srv->add_option("--port", serve.port, "Port; 0 picks a free one")->check(CLI::Range(0, 65535));
    srv->add_option("--host", serve.host, "Bind address");
    srv->add_option("--log", serve.log, "Judgment log (default: judgments.jsonl next to the task file)");
    srv->add_option("--static", serve.static_dir, "Directory with the review UI");
    srv->add_option("--assignment", serve.assignment, "exclusive or overlapping");
    srv->add_option("--pairs", serve.pairs, "Pair dataset to sample tasks from");
    srv->add_option("--sample", serve.sample, "Number of tasks to sample")->check(CLI::PositiveNumber);
    srv->callback([&] { action = [&] { return serve_review(common, serve); }; });

    std::string gold_flag;
    std::string providers_flag;
    std::string bench_out;
    auto* bench = app.add_subcommand("benchmark", "Score providers on the relevance task against a gold file");
    add_common(bench, false);
    bench->add_option("--gold", gold_flag, "Gold JSONL {id, text, label}");
    bench->add_option("--providers", providers_flag, "Comma separated provider names");
    bench->add_option("--csv", bench_out, "Write the table here instead of stdout");
    bench->callback([&] { action = [&] { return benchmark(common, gold_flag, providers_flag, bench_out); }; });

    std::string run_dir;
    auto* report = app.add_subcommand("report", "Summarize a run directory");
    report->add_option("run_dir", run_dir, "Run directory")->required();
    report->add_flag("--json", common.progress_json, "Print report.json content instead of the summary");
    report->callback([&] {
        action = [&] {
            if (common.progress_json) {
                std::cout << destigma::report_text(destigma::StageStore(run_dir));
                return 0;
            }
            destigma::print_run_summary(run_dir, std::cout);
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    auto logger = spdlog::stderr_color_mt("destigma");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%H:%M:%S %^%l%$ %v");
    spdlog::set_level(common.verbose ? spdlog::level::debug
                                     : common.quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        return action();
    } catch (const destigma::Error& e) {
        spdlog::error("{}: {}", destigma::errc_name(e.code()), e.detail());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitStage;
    }
}
