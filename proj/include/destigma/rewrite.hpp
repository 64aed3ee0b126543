#pragma once

#include "destigma/corpus.hpp"
#include "destigma/gateway.hpp"
#include "destigma/stage_store.hpp"
#include "destigma/stigma.hpp"
#include "destigma/style.hpp"

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace destigma {

enum class Regime { Baseline, Informed, InformedStylized };

// "baseline", "informed", "stylized".
std::string_view regime_name(Regime r) noexcept;
std::optional<Regime> parse_regime(std::string_view name);

// A rewrite system: regime crossed with a configured model label. Written
// as "regime/model", e.g. "stylized/gpt4".
struct SystemId {
    Regime regime{Regime::Baseline};
    std::string model;

    std::string str() const;
    static SystemId parse(std::string_view s);

    auto operator<=>(const SystemId&) const = default;
};

// Cross product in regime-major order.
std::vector<SystemId> make_systems(const std::vector<Regime>& regimes, const std::vector<std::string>& models);

// Model label as used in system ids, and the gateway provider serving it.
struct ModelBinding {
    std::string label;
    std::string provider;
};

// MTLD cut points for the vocabulary directive: below `low` is "simple",
// at or above `high` is "varied", "moderate" in between.
struct MtldBuckets {
    double low{40.0};
    double high{70.0};
};

// Tercile cut points of the defined values (linear interpolation between
// order statistics). Falls back to the defaults with fewer than 3 values.
MtldBuckets mtld_terciles(std::vector<double> values);

std::string_view mtld_bucket(double mtld, const MtldBuckets& buckets);

inline constexpr double kPassiveDirectiveThreshold = 0.3;
inline constexpr double kSentenceVariationThreshold = 5.0;

struct StyleDirectives {
    std::string tone;                        // "tone: <emotion>"
    std::optional<std::string> vocabulary;   // absent when MTLD is undefined
    std::string voice;
    std::optional<std::string> variation;    // only for sentence_len_std > 5
    std::optional<std::string> punctuation;  // marks with a non-zero count
    std::string sentence_length;
};

StyleDirectives verbalize_style(const style::StyleProfile& profile, const MtldBuckets& buckets);

// Slot maps for the three templates. The informed slots carry one bulleted
// example list per non-empty element.
SlotMap baseline_slots(const CleanPost& post);
SlotMap informed_slots(const CleanPost& post, const StigmaExplanation& explanation);
SlotMap stylized_slots(const CleanPost& post, const StigmaExplanation& explanation,
                       const style::StyleProfile& profile, const MtldBuckets& buckets);

struct RewriteOptions {
    double temperature{0.7};
    int max_tokens{1024};
    MtldBuckets buckets{};
    std::string baseline_template{"rewrite_baseline"};
    std::string informed_template{"rewrite_informed"};
    std::string stylized_template{"rewrite_stylized"};
    std::size_t workers{4};
};

struct Rewrite {
    std::string post_id;
    SystemId system;
    std::string text;
    std::string template_id;
    std::string template_hash;
    std::string model_id;
    std::optional<style::StyleProfile> profile_used;
    std::optional<StigmaExplanation> explanation_used;
};

void to_json(nlohmann::json& j, const Rewrite& r);
void from_json(const nlohmann::json& j, Rewrite& r);

// Each throws Error(RewriteFailure) when the completion is empty twice.
Rewrite rewrite_baseline(const CleanPost& post, Gateway& gateway, const ModelBinding& model,
                         const RewriteOptions& options = {});

// Throws Error(Precondition) without an explanation.
Rewrite rewrite_informed(const CleanPost& post, const std::optional<StigmaExplanation>& explanation,
                         Gateway& gateway, const ModelBinding& model, const RewriteOptions& options = {});

// Throws Error(Precondition) without an explanation or profile.
Rewrite rewrite_informed_stylized(const CleanPost& post, const std::optional<StigmaExplanation>& explanation,
                                  const std::optional<style::StyleProfile>& profile, Gateway& gateway,
                                  const ModelBinding& model, const RewriteOptions& options = {});

struct PairRecord {
    std::string post_id;
    std::string original;
    std::map<std::string, std::string> rewrites;  // system id -> text
    std::vector<std::string> missing;             // configured systems without a rewrite

    bool complete() const noexcept { return missing.empty(); }
};

void to_json(nlohmann::json& j, const PairRecord& p);
void from_json(const nlohmann::json& j, PairRecord& p);

// One record per post, in post order.
std::vector<PairRecord> build_pair_dataset(const std::vector<CleanPost>& posts, const std::vector<Rewrite>& rewrites,
                                           const std::vector<SystemId>& systems);

inline constexpr const char* kRewritesStage = "rewrites";
inline constexpr const char* kRewriteFailuresStage = "rewrite_failures";
inline constexpr const char* kPairsStage = "pairs";

struct RewriteReport {
    std::size_t posts{0};
    std::size_t systems{0};
    std::size_t rewrites{0};
    std::size_t failures{0};
    std::size_t complete_pairs{0};
    std::size_t partial_pairs{0};
    std::string pairs_digest;
};

nlohmann::json to_json(const RewriteReport& r);

struct RewriteInputs {
    std::vector<CleanPost> posts;  // Directed posts
    std::map<std::string, StigmaExplanation> explanations;
    std::map<std::string, style::StyleProfile> profiles;
};

// Runs every system over every post. Rewrite failures and missing
// explanations make the post's pair partial; hard gateway errors abort with
// Error(StageFailure).
RewriteReport run_rewrite_stage(const RewriteInputs& inputs, Gateway& gateway, StageStore& store,
                                const std::vector<SystemId>& systems, const std::vector<ModelBinding>& models,
                                const RewriteOptions& options);

}  // namespace destigma
