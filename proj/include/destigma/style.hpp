#pragma once

#include "destigma/emotion.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace destigma::style {

inline constexpr double kDefaultMtldThreshold = 0.72;

// Whitespace split, then leading/trailing punctuation stripped from each
// token and ASCII lowercased. Internal apostrophes survive ("don't").
std::vector<std::string> tokenize(std::string_view text);

// Splits after runs of '.', '!', '?' (or an ellipsis) that are followed by
// whitespace or end of text, unless the period closes a known abbreviation.
std::vector<std::string> split_sentences(std::string_view text);

bool is_abbreviation(std::string_view lowered_token);

// Bidirectional MTLD: mean of the forward and backward factor lengths.
// Throws Error(EmptyText) for no tokens and Error(InsufficientVariation)
// when the type-token ratio never falls to the threshold (all types distinct).
double mtld(std::span<const std::string> tokens, double threshold = kDefaultMtldThreshold);

// One direction of MTLD, exposed for tests: token count / factor count.
// Returns nullopt when the factor count is zero.
std::optional<double> mtld_one_pass(std::span<const std::string> tokens, double threshold);

bool is_be_auxiliary(std::string_view token);
bool is_past_participle(std::string_view token);

// Tokens after a be-auxiliary searched for a participle.
inline constexpr std::size_t kParticipleWindow = 3;

bool is_passive_sentence(std::string_view sentence);

// Share of passive sentences; 0.0 for an empty list.
double passive_ratio(std::span<const std::string> sentences);

struct PunctuationProfile {
    std::map<std::string, std::size_t> counts;  // every tracked mark, zeros included
    double density{0.0};                         // marks per 100 tokens
    std::size_t total() const;
};

// Tracked marks: . , ! ? ; : — - " ' ( ) …  A run of three or more periods
// or the ellipsis character counts once as "…". Curly quotes fold onto the
// straight forms.
const std::vector<std::string>& tracked_marks();

PunctuationProfile punctuation_profile(std::string_view text);

struct SentenceLengthStats {
    double mean{0.0};
    double stddev{0.0};  // population
};

// Lengths are token counts. Throws Error(EmptyText) for an empty list.
SentenceLengthStats sentence_length_stats(std::span<const std::string> sentences);

struct StyleProfile {
    std::string top_emotion;
    std::map<std::string, double> emotion_distribution;
    std::string emotion_source;
    std::optional<double> mtld;  // nullopt: insufficient lexical variation
    double passive_ratio{0.0};
    std::map<std::string, std::size_t> punctuation_counts;
    double punctuation_density{0.0};
    double sentence_len_mean{0.0};
    double sentence_len_std{0.0};
    std::size_t token_count{0};
    std::size_t sentence_count{0};
};

void to_json(nlohmann::json& j, const StyleProfile& p);
void from_json(const nlohmann::json& j, StyleProfile& p);

// Throws Error(EmptyText) when the text holds no tokens.
StyleProfile build_profile(std::string_view text, const EmotionClassifier& classifier,
                           double mtld_threshold = kDefaultMtldThreshold);

}  // namespace destigma::style
