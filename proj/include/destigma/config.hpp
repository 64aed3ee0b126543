#pragma once

#include "destigma/corpus.hpp"
#include "destigma/cost_ledger.hpp"
#include "destigma/evaluation.hpp"
#include "destigma/gateway.hpp"
#include "destigma/relevance.hpp"
#include "destigma/review.hpp"
#include "destigma/rewrite.hpp"
#include "destigma/stigma.hpp"
#include "destigma/style.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace destigma {

struct StageToggles {
    bool ingest{true};
    bool clean{true};
    bool relevance{true};
    bool stigma{true};
    bool profile{true};
    bool rewrite{true};
    bool evaluate{true};
};

struct PipelineConfig {
    std::filesystem::path source;  // config file, empty when built in code
    std::filesystem::path input;
    std::filesystem::path output_dir{"out"};
    std::uint64_t seed{42};
    std::size_t workers{4};

    SourceSchema schema;
    CorpusRules corpus;

    std::filesystem::path templates_dir;
    std::filesystem::path substances_lexicon;
    std::filesystem::path emotion_lexicon;
    std::filesystem::path psych_lexicon;
    std::string emotion_endpoint;  // remote classifier; empty uses the lexicon

    RateTable rates;
    std::vector<ProviderConfig> providers;
    RetryPolicy retry;

    RelevanceOptions relevance;
    StigmaOptions stigma;
    std::vector<Regime> regimes{Regime::Baseline, Regime::Informed, Regime::InformedStylized};
    std::vector<ModelBinding> models;
    RewriteOptions rewrite;

    double mtld_threshold{style::kDefaultMtldThreshold};
    CompareOptions compare;
    StageToggles stages;

    std::size_t review_sample{110};
    Assignment assignment{Assignment::Exclusive};

    std::filesystem::path gold;  // benchmark gold file
    std::vector<std::string> benchmark_providers;

    std::vector<SystemId> systems() const;
    std::vector<std::string> model_labels() const;
};

// Built-in per-1k-token prices for the hosted models, used unless the config
// supplies its own table.
RateTable default_rate_table();

// Parses a config document. Relative paths are resolved against `base_dir`.
// Throws Error(Config) for type errors and unknown enum values.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// Reads and parses a JSON config file. Throws Error(Config).
PipelineConfig load_config(const std::filesystem::path& path);

// Checks cross references and that referenced files exist. Throws
// Error(Config) naming the first problem. Nothing is written.
void validate_config(const PipelineConfig& cfg);

// Resolved form for logging and the run directory.
nlohmann::json config_summary(const PipelineConfig& cfg);

}  // namespace destigma
