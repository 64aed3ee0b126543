#pragma once

#include "destigma/corpus.hpp"
#include "destigma/gateway.hpp"
#include "destigma/stage_store.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace destigma {

enum class RelevanceLabel { Drug, NonDrug };
enum class RelevanceStage { Detector, Validator };

const char* relevance_label_name(RelevanceLabel l) noexcept;
const char* relevance_stage_name(RelevanceStage s) noexcept;

struct RelevanceVerdict {
    std::string post_id;
    RelevanceLabel label{RelevanceLabel::NonDrug};
    RelevanceStage stage{RelevanceStage::Detector};
    std::string raw_response;  // the completion the label was read from
    std::string model_id;
    std::string template_hash;
    bool reasked{false};
};

void to_json(nlohmann::json& j, const RelevanceVerdict& v);
void from_json(const nlohmann::json& j, RelevanceVerdict& v);

inline constexpr std::string_view kRelevanceReask = "Answer with exactly D or ND.";

// Reads a D/ND answer from the first line of a completion. Words are the
// alphabetic runs of that line, compared case-insensitively. "nd" or any
// word starting with "non" means NonDrug; otherwise "d", "drug" or "drugs"
// means Drug; anything else is unreadable.
std::optional<RelevanceLabel> parse_relevance_answer(std::string_view completion);

struct RelevanceOptions {
    std::string detector_provider;
    std::string validator_provider;
    std::string detector_template{"relevance_detect"};
    std::string validator_template{"relevance_validate"};
    std::size_t batch_size{100};
    std::size_t workers{4};
};

// Throws Error(ParseFailure) naming the post when both asks are unreadable.
RelevanceVerdict detect_drug_relevance(const CleanPost& post, Gateway& gateway, const std::string& provider,
                                       const std::string& template_id = "relevance_detect");

// Throws Error(Precondition) unless `detector` is a Detector-stage Drug verdict
// for the same post.
RelevanceVerdict validate_relevance(const CleanPost& post, const RelevanceVerdict& detector, Gateway& gateway,
                                    const std::string& provider,
                                    const std::string& template_id = "relevance_validate");

struct RelevanceReport {
    std::size_t input_count{0};
    std::size_t detector_positive_count{0};
    std::size_t validated_positive_count{0};
    std::size_t quarantined_count{0};
    std::size_t batches_reused{0};
    double detector_seconds{0.0};
    double validator_seconds{0.0};
};

void to_json(nlohmann::json& j, const RelevanceReport& r);
void from_json(const nlohmann::json& j, RelevanceReport& r);

// Stage names written by run_relevance_stage.
inline constexpr const char* kDetectorStage = "detector_positive";
inline constexpr const char* kValidatedStage = "validated";
inline constexpr const char* kQuarantineStage = "quarantine";

// Runs detector then validator over `posts` in batches. Each finished batch
// is checkpointed under `<store>/relevance_batches/`, and a rerun reuses
// checkpoints instead of calling the gateway again. A hard gateway error
// aborts with Error(StageFailure); finished batches stay checkpointed.
RelevanceReport run_relevance_stage(const std::vector<CleanPost>& posts, Gateway& gateway, StageStore& store,
                                    const RelevanceOptions& options);

}  // namespace destigma
