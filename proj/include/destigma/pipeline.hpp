#pragma once

#include "destigma/config.hpp"
#include "destigma/gateway.hpp"
#include "destigma/stage_store.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace destigma {

inline constexpr const char* kRawStage = "raw";
inline constexpr const char* kCleanStage = "clean";
inline constexpr const char* kCleanRejectionsStage = "clean_rejections";
inline constexpr const char* kProfileStage = "profiles";
inline constexpr const char* kEvaluationStage = "evaluation";

// Stage files in pipeline order, as listed by `report`.
const std::vector<std::string>& pipeline_stage_names();

// One JSON object per event; emitted when a stage starts, is skipped,
// finishes or fails.
using ProgressSink = std::function<void(const nlohmann::json&)>;

struct StageOutcome {
    std::string stage;
    bool skipped{false};
    std::size_t input_count{0};
    std::size_t output_count{0};
    double seconds{0.0};
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg, ProgressSink progress = {});
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    // Each stage is skipped when its manifest is already valid. A failing
    // stage throws Error(StageFailure) naming the last completed stage.
    StageOutcome ingest();
    StageOutcome clean();
    StageOutcome relevance();
    StageOutcome stigma();
    StageOutcome profile();
    StageOutcome rewrite();
    StageOutcome evaluate();

    // Runs the enabled stages in order and writes report.json and cost.json.
    std::vector<StageOutcome> run();

    // Gateway over the configured providers, built on first use.
    Gateway& gateway();

    const PipelineConfig& config() const noexcept { return cfg_; }
    StageStore& store() noexcept { return store_; }

private:
    template <class Fn>
    StageOutcome run_stage(const std::string& name, const std::vector<std::string>& outputs, Fn&& body);
    std::string last_good_stage() const;
    void write_cost() const;

    PipelineConfig cfg_;
    ProgressSink progress_;
    StageStore store_;
    std::unique_ptr<Gateway> gateway_;
};

// Aggregate report built from stage files and manifests only. It carries no
// timestamps, paths or timings, so identical runs give identical bytes.
nlohmann::json build_report(const StageStore& store);

// build_report serialized with a trailing newline, as written to report.json.
std::string report_text(const StageStore& store);

// Human-readable summary of a run directory: funnel, crosstab, feature
// flags and, when a judgment log is present, the ranking tally. Missing
// stages are listed as warnings. Returns false when no stage was found.
bool print_run_summary(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace destigma
