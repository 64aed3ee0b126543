#include "destigma/config.hpp"

#include "destigma/error.hpp"

#include <fstream>
#include <set>

using nlohmann::json;

namespace destigma {

namespace fs = std::filesystem;

namespace {

#ifndef DESTIGMA_ASSET_DIR
#define DESTIGMA_ASSET_DIR "assets"
#endif

const fs::path kAssets{DESTIGMA_ASSET_DIR};

[[noreturn]] void config_error(const std::string& detail) { throw Error(Errc::Config, detail); }

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) {
        return {};
    }
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
void read_key(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(where + key + ": " + e.what());
    }
}

void read_path(const json& obj, const char* key, fs::path& out, const fs::path& base, const std::string& where) {
    std::string s;
    read_key(obj, key, s, where);
    if (!s.empty()) {
        out = resolve(base, s);
    }
}

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) {
        return empty;
    }
    const auto& s = doc.at(key);
    if (!s.is_object()) {
        config_error(std::string(key) + ": expected an object");
    }
    return s;
}

ProviderConfig parse_provider(const json& j, const fs::path& base) {
    if (!j.is_object()) {
        config_error("providers: each entry must be an object");
    }
    ProviderConfig p;
    read_key(j, "name", p.name, "providers.");
    const std::string where = "providers." + p.name + ".";
    read_key(j, "kind", p.kind, where);
    read_key(j, "base_url", p.base_url, where);
    read_key(j, "model_id", p.model_id, where);
    read_key(j, "api_key_env", p.api_key_env, where);
    read_key(j, "rpm", p.limits.rpm, where);
    p.limits.burst = std::max<std::int64_t>(1, p.limits.rpm / 60);
    read_key(j, "burst", p.limits.burst, where);
    read_key(j, "max_inflight", p.max_inflight, where);
    read_key(j, "timeout_s", p.timeout_s, where);
    std::string fixtures;
    read_key(j, "fixtures", fixtures, where);
    if (!fixtures.empty()) {
        p.fixtures = resolve(base, fixtures).string();
    }
    return p;
}

}  // namespace

std::vector<SystemId> PipelineConfig::systems() const { return make_systems(regimes, model_labels()); }

std::vector<std::string> PipelineConfig::model_labels() const {
    std::vector<std::string> out;
    for (const auto& m : models) {
        out.push_back(m.label);
    }
    return out;
}

RateTable default_rate_table() {
    RateTable t;
    t.per_model["gpt-3.5-turbo"] = {0.0005, 0.0015};
    t.per_model["gpt-4-turbo"] = {0.01, 0.03};
    return t;
}

PipelineConfig parse_config(const json& doc, const fs::path& base) {
    if (!doc.is_object()) {
        config_error("config root must be an object");
    }
    PipelineConfig cfg;
    read_path(doc, "input", cfg.input, base, "");
    std::string out_dir;
    read_key(doc, "output_dir", out_dir, "");
    cfg.output_dir = out_dir.empty() ? resolve(base, "out") : resolve(base, out_dir);
    read_key(doc, "seed", cfg.seed, "");
    read_key(doc, "workers", cfg.workers, "");

    const auto& schema = section(doc, "schema");
    read_key(schema, "id", cfg.schema.id_field, "schema.");
    read_key(schema, "subreddit", cfg.schema.subreddit_field, "schema.");
    read_key(schema, "author", cfg.schema.author_field, "schema.");
    read_key(schema, "title", cfg.schema.title_field, "schema.");
    read_key(schema, "body", cfg.schema.body_field, "schema.");
    read_key(schema, "created", cfg.schema.created_field, "schema.");

    const auto& corpus = section(doc, "corpus");
    read_key(corpus, "min_words", cfg.corpus.min_words, "corpus.");
    read_key(corpus, "removed_body_markers", cfg.corpus.removed_body_markers, "corpus.");
    read_key(corpus, "deleted_author_markers", cfg.corpus.deleted_author_markers, "corpus.");

    cfg.templates_dir = kAssets / "templates";
    read_path(doc, "templates_dir", cfg.templates_dir, base, "");
    cfg.substances_lexicon = kAssets / "lexicons" / "substances.csv";
    cfg.emotion_lexicon = kAssets / "lexicons" / "emotion.csv";
    cfg.psych_lexicon = kAssets / "lexicons" / "psych.csv";
    const auto& lex = section(doc, "lexicons");
    read_path(lex, "substances", cfg.substances_lexicon, base, "lexicons.");
    read_path(lex, "emotion", cfg.emotion_lexicon, base, "lexicons.");
    read_path(lex, "psych", cfg.psych_lexicon, base, "lexicons.");
    read_key(doc, "emotion_endpoint", cfg.emotion_endpoint, "");

    cfg.rates = default_rate_table();
    if (doc.contains("rates")) {
        try {
            RateTable extra = doc.at("rates").get<RateTable>();
            for (auto& [model, rate] : extra.per_model) {
                cfg.rates.per_model[model] = rate;
            }
            if (extra.fallback) {
                cfg.rates.fallback = extra.fallback;
            }
        } catch (const json::exception& e) {
            config_error(std::string("rates: ") + e.what());
        }
    }

    if (doc.contains("providers")) {
        if (!doc.at("providers").is_array()) {
            config_error("providers: expected an array");
        }
        for (const auto& p : doc.at("providers")) {
            cfg.providers.push_back(parse_provider(p, base));
        }
    }

    const auto& retry = section(doc, "retry");
    read_key(retry, "max_attempts", cfg.retry.max_attempts, "retry.");
    double base_delay_s = -1.0;
    read_key(retry, "base_delay_s", base_delay_s, "retry.");
    if (base_delay_s >= 0.0) {
        cfg.retry.base_delay = Micros(static_cast<std::int64_t>(base_delay_s * 1e6));
    }

    const auto& rel = section(doc, "relevance");
    read_key(rel, "detector", cfg.relevance.detector_provider, "relevance.");
    read_key(rel, "validator", cfg.relevance.validator_provider, "relevance.");
    read_key(rel, "batch_size", cfg.relevance.batch_size, "relevance.");
    read_key(rel, "detector_template", cfg.relevance.detector_template, "relevance.");
    read_key(rel, "validator_template", cfg.relevance.validator_template, "relevance.");

    const auto& st = section(doc, "stigma");
    read_key(st, "provider", cfg.stigma.provider, "stigma.");
    read_key(st, "classify_template", cfg.stigma.classify_template, "stigma.");
    read_key(st, "explain_template", cfg.stigma.explain_template, "stigma.");

    const auto& rw = section(doc, "rewrite");
    if (rw.contains("regimes")) {
        std::vector<std::string> names;
        read_key(rw, "regimes", names, "rewrite.");
        cfg.regimes.clear();
        for (const auto& n : names) {
            auto r = parse_regime(n);
            if (!r) {
                config_error("rewrite.regimes: unknown regime '" + n + "'");
            }
            cfg.regimes.push_back(*r);
        }
    }
    if (rw.contains("models")) {
        if (!rw.at("models").is_array()) {
            config_error("rewrite.models: expected an array");
        }
        for (const auto& m : rw.at("models")) {
            ModelBinding b;
            read_key(m, "label", b.label, "rewrite.models.");
            read_key(m, "provider", b.provider, "rewrite.models.");
            cfg.models.push_back(b);
        }
    }
    read_key(rw, "temperature", cfg.rewrite.temperature, "rewrite.");
    read_key(rw, "max_tokens", cfg.rewrite.max_tokens, "rewrite.");

    const auto& th = section(doc, "thresholds");
    read_key(th, "mtld", cfg.mtld_threshold, "thresholds.");
    read_key(th, "alpha", cfg.compare.alpha, "thresholds.");
    read_key(th, "bonferroni", cfg.compare.bonferroni, "thresholds.");
    read_key(th, "bigwords_letters", cfg.compare.bigword_letters, "thresholds.");

    const auto& stages = section(doc, "stages");
    read_key(stages, "ingest", cfg.stages.ingest, "stages.");
    read_key(stages, "clean", cfg.stages.clean, "stages.");
    read_key(stages, "relevance", cfg.stages.relevance, "stages.");
    read_key(stages, "stigma", cfg.stages.stigma, "stages.");
    read_key(stages, "profile", cfg.stages.profile, "stages.");
    read_key(stages, "rewrite", cfg.stages.rewrite, "stages.");
    read_key(stages, "evaluate", cfg.stages.evaluate, "stages.");

    const auto& review = section(doc, "review");
    read_key(review, "sample_size", cfg.review_sample, "review.");
    std::string assignment;
    read_key(review, "assignment", assignment, "review.");
    if (!assignment.empty()) {
        auto a = parse_assignment(assignment);
        if (!a) {
            config_error("review.assignment: expected exclusive or overlapping, got '" + assignment + "'");
        }
        cfg.assignment = *a;
    }

    const auto& bench = section(doc, "benchmark");
    read_path(bench, "gold", cfg.gold, base, "benchmark.");
    read_key(bench, "providers", cfg.benchmark_providers, "benchmark.");

    cfg.relevance.workers = cfg.workers;
    cfg.stigma.workers = cfg.workers;
    cfg.rewrite.workers = cfg.workers;
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        config_error("cannot read config file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(path.string() + ": " + e.what());
    }
    auto cfg = parse_config(doc, fs::absolute(path).parent_path());
    cfg.source = path;
    return cfg;
}

void validate_config(const PipelineConfig& cfg) {
    auto require_file = [](const fs::path& p, const std::string& what) {
        if (p.empty()) {
            config_error(what + " is not set");
        }
        std::error_code ec;
        if (!fs::is_regular_file(p, ec)) {
            config_error(what + " not found: " + p.string());
        }
    };
    if (cfg.stages.ingest) {
        require_file(cfg.input, "input");
    }
    if (cfg.output_dir.empty()) {
        config_error("output_dir is not set");
    }
    if (cfg.workers == 0) {
        config_error("workers must be at least 1");
    }
    std::error_code ec;
    if (!fs::is_directory(cfg.templates_dir, ec)) {
        config_error("templates_dir not found: " + cfg.templates_dir.string());
    }
    if (cfg.stages.stigma) {
        require_file(cfg.substances_lexicon, "lexicons.substances");
    }
    if (cfg.stages.profile) {
        require_file(cfg.emotion_lexicon, "lexicons.emotion");
    }
    if (cfg.stages.evaluate) {
        require_file(cfg.psych_lexicon, "lexicons.psych");
    }
    if (cfg.corpus.min_words == 0) {
        config_error("corpus.min_words must be positive");
    }

    std::set<std::string> names;
    for (const auto& p : cfg.providers) {
        if (p.name.empty()) {
            config_error("providers: every provider needs a name");
        }
        if (!names.insert(p.name).second) {
            config_error("providers: duplicate name '" + p.name + "'");
        }
        if (p.kind != "mock" && p.kind != "openai" && p.kind != "local") {
            config_error("providers." + p.name + ".kind: unknown kind '" + p.kind + "'");
        }
        try {
            p.limits.validate();
        } catch (const Error& e) {
            config_error("providers." + p.name + ": " + e.detail());
        }
        if (p.max_inflight < 1) {
            config_error("providers." + p.name + ".max_inflight must be at least 1");
        }
        if (p.kind == "mock") {
            require_file(p.fixtures, "providers." + p.name + ".fixtures");
        } else if (p.base_url.empty()) {
            config_error("providers." + p.name + ".base_url is not set");
        }
    }
    auto require_provider = [&](const std::string& name, const std::string& what) {
        if (name.empty()) {
            config_error(what + " is not set");
        }
        if (!names.count(name)) {
            config_error(what + ": unknown provider '" + name + "'");
        }
    };
    if (cfg.stages.relevance) {
        require_provider(cfg.relevance.detector_provider, "relevance.detector");
        require_provider(cfg.relevance.validator_provider, "relevance.validator");
        if (cfg.relevance.batch_size == 0) {
            config_error("relevance.batch_size must be positive");
        }
    }
    if (cfg.stages.stigma) {
        require_provider(cfg.stigma.provider, "stigma.provider");
    }
    if (cfg.stages.rewrite) {
        if (cfg.models.empty()) {
            config_error("rewrite.models is empty");
        }
        if (cfg.regimes.empty()) {
            config_error("rewrite.regimes is empty");
        }
        std::set<std::string> labels;
        for (const auto& m : cfg.models) {
            if (m.label.empty() || m.label.find('/') != std::string::npos) {
                config_error("rewrite.models: label '" + m.label + "' must be non-empty and contain no '/'");
            }
            if (!labels.insert(m.label).second) {
                config_error("rewrite.models: duplicate label '" + m.label + "'");
            }
            require_provider(m.provider, "rewrite.models." + m.label);
        }
    }
    if (!(cfg.mtld_threshold > 0.0 && cfg.mtld_threshold < 1.0)) {
        config_error("thresholds.mtld must lie in (0, 1)");
    }
    if (!(cfg.compare.alpha > 0.0 && cfg.compare.alpha < 1.0)) {
        config_error("thresholds.alpha must lie in (0, 1)");
    }
    if (cfg.compare.bigword_letters == 0) {
        config_error("thresholds.bigwords_letters must be positive");
    }
    if (cfg.retry.max_attempts < 1) {
        config_error("retry.max_attempts must be at least 1");
    }
    for (const auto& name : cfg.benchmark_providers) {
        require_provider(name, "benchmark.providers");
    }
}

json config_summary(const PipelineConfig& cfg) {
    json providers = json::array();
    for (const auto& p : cfg.providers) {
        providers.push_back(json{{"name", p.name},
                                 {"kind", p.kind},
                                 {"model_id", p.model_id},
                                 {"rpm", p.limits.rpm},
                                 {"burst", p.limits.burst},
                                 {"max_inflight", p.max_inflight}});
    }
    std::vector<std::string> systems;
    for (const auto& s : cfg.systems()) {
        systems.push_back(s.str());
    }
    return json{{"input", cfg.input.string()},
                {"output_dir", cfg.output_dir.string()},
                {"seed", cfg.seed},
                {"workers", cfg.workers},
                {"min_words", cfg.corpus.min_words},
                {"providers", providers},
                {"detector", cfg.relevance.detector_provider},
                {"validator", cfg.relevance.validator_provider},
                {"stigma", cfg.stigma.provider},
                {"systems", systems},
                {"mtld_threshold", cfg.mtld_threshold},
                {"alpha", cfg.compare.alpha},
                {"bonferroni", cfg.compare.bonferroni},
                {"bigwords_letters", cfg.compare.bigword_letters}};
}

}  // namespace destigma
