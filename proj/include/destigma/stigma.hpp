#pragma once

#include "destigma/corpus.hpp"
#include "destigma/gateway.hpp"
#include "destigma/stage_store.hpp"
#include "destigma/substances.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace destigma {

enum class StigmaType { None, Directed, SelfStigma, Structural };

// "None", "Directed", "Self", "Structural".
std::string_view stigma_type_name(StigmaType t) noexcept;
std::optional<StigmaType> parse_stigma_type_name(std::string_view name);

void to_json(nlohmann::json& j, StigmaType t);
void from_json(const nlohmann::json& j, StigmaType& t);

// Separation and status loss share one bucket.
enum class StigmaElement { Labeling, Stereotyping, Separation, Discrimination };

std::string_view stigma_element_name(StigmaElement e) noexcept;
std::optional<StigmaElement> parse_stigma_element(std::string_view name);

struct EvidenceSpan {
    StigmaElement element{StigmaElement::Labeling};
    std::string quoted_text;
    std::string rationale;
    // Byte offsets into the whitespace-collapsed post text; -1 when unverified.
    long char_start{-1};
    long char_end{-1};
    bool verified{false};
};

void to_json(nlohmann::json& j, const EvidenceSpan& s);
void from_json(const nlohmann::json& j, EvidenceSpan& s);

struct StigmaExplanation {
    std::vector<EvidenceSpan> labeling;
    std::vector<EvidenceSpan> stereotyping;
    std::vector<EvidenceSpan> separation;
    std::vector<EvidenceSpan> discrimination;

    std::vector<EvidenceSpan>& spans(StigmaElement e);
    const std::vector<EvidenceSpan>& spans(StigmaElement e) const;
    bool empty() const;
    std::vector<EvidenceSpan> all() const;
};

void to_json(nlohmann::json& j, const StigmaExplanation& e);
void from_json(const nlohmann::json& j, StigmaExplanation& e);

struct StigmaClassification {
    StigmaType type{StigmaType::None};
    std::set<StigmaType> mentioned;  // every type named in the answer
    bool conflict{false};            // more than one stigma type named
};

// Reads the type from the first non-blank line ("TYPE: Directed" or just
// "Directed"). When several types are named the result follows the
// precedence Directed > Structural > Self and sets `conflict`. "None" only
// counts when no stigma type is named. nullopt when nothing is recognized.
std::optional<StigmaClassification> parse_stigma_answer(std::string_view completion);

// One quoted span per line after the first:
//   LABELING: "quoted text" | why it is harmful
// Element names are case-insensitive; "STATUS LOSS" folds into separation.
// Lines that do not follow the format are ignored.
std::vector<EvidenceSpan> parse_explanation_lines(std::string_view completion);

// Locates `span.quoted_text` in the post after collapsing whitespace in both;
// the first occurrence wins. Sets offsets and `verified`.
void ground_span(EvidenceSpan& span, std::string_view normalized_post);

inline constexpr std::string_view kStigmaReask =
    "Start your answer with one line of the form TYPE: Directed, TYPE: Self, TYPE: Structural or TYPE: None.";

struct StigmaOptions {
    std::string provider;
    std::string classify_template{"stigma_classify"};
    std::string explain_template{"stigma_explain"};
    std::size_t workers{4};
};

struct ClassifyResult {
    StigmaClassification classification;
    std::string raw_response;
    std::string model_id;
    std::string template_hash;
};

// Throws Error(ParseFailure) when neither ask yields a type.
ClassifyResult classify_stigma(const CleanPost& post, Gateway& gateway, const StigmaOptions& options);

// Builds grounded spans from the classifier's raw answer; if it carries none,
// asks the explanation template. Throws Error(ExplanationMissing) when the
// explanation stays empty.
StigmaExplanation extract_explanation(const CleanPost& post, std::string_view raw_explanation, Gateway& gateway,
                                      const StigmaOptions& options);

struct StigmaRecord {
    std::string post_id;
    StigmaType stigma_type{StigmaType::None};
    std::optional<StigmaExplanation> explanation;
    std::set<SubstanceCategory> substances;
    bool type_conflict{false};
    bool explanation_missing{false};
    std::string raw_response;
    std::string model_id;
    std::string template_hash;
};

void to_json(nlohmann::json& j, const StigmaRecord& r);
void from_json(const nlohmann::json& j, StigmaRecord& r);

inline constexpr const char* kStigmaStage = "stigma";
inline constexpr const char* kStigmaQuarantineStage = "stigma_quarantine";

struct StigmaReport {
    std::size_t input_count{0};
    std::size_t directed{0};
    std::size_t self_stigma{0};
    std::size_t structural{0};
    std::size_t none{0};
    std::size_t quarantined{0};
    std::size_t conflicts{0};
    std::size_t explanation_missing{0};
    Crosstab crosstab;
};

nlohmann::json to_json(const StigmaReport& r);

// Classifies every post, explains Directed ones, tags substances, and writes
// `stigma.jsonl`, `stigma_quarantine.jsonl` and `crosstab.csv`. Hard gateway
// errors abort with Error(StageFailure).
StigmaReport run_stigma_stage(const std::vector<CleanPost>& posts, Gateway& gateway, StageStore& store,
                              const SubstanceLexicon& lexicon, const StigmaOptions& options);

// Crosstab over stigmatizing records (None is skipped).
Crosstab crosstab_of(const std::vector<StigmaRecord>& records);

}  // namespace destigma
