#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace destigma {

// The GoEmotions label space: 27 emotions plus "neutral".
const std::vector<std::string>& goemotions_labels();

struct EmotionResult {
    std::map<std::string, double> distribution;  // over goemotions_labels(), sums to 1
    std::string top;
    std::string source;  // "lexicon", "remote" or "lexicon_fallback"
};

class EmotionClassifier {
public:
    virtual ~EmotionClassifier() = default;
    virtual EmotionResult classify(std::string_view text) const = 0;
};

// Normalizes raw label scores onto the label space. Unknown labels are
// dropped and negatives clamped to zero. When nothing positive remains,
// all mass goes to "neutral". Top label is the argmax, ties broken by the
// lexicographically smallest label.
EmotionResult normalize_scores(const std::map<std::string, double>& scores, std::string source);

// Keyword fallback. Hit counts per label are add-one smoothed over the whole
// label space; a text without hits counts as one "neutral" hit.
class LexiconEmotionClassifier final : public EmotionClassifier {
public:
    explicit LexiconEmotionClassifier(std::unordered_map<std::string, std::string> term_to_label);

    // CSV `term,label`, header optional.
    static LexiconEmotionClassifier from_csv(const std::filesystem::path& path);

    EmotionResult classify(std::string_view text) const override;

    std::size_t size() const noexcept { return lexicon_.size(); }

private:
    std::unordered_map<std::string, std::string> lexicon_;
};

// Client for a remote scoring endpoint: POST {"text": ...} -> {"scores": {label: real}}.
// Any transport or format failure falls back to the lexicon classifier and
// marks the result source "lexicon_fallback".
class RemoteEmotionClassifier final : public EmotionClassifier {
public:
    RemoteEmotionClassifier(std::string endpoint_url, std::shared_ptr<const EmotionClassifier> fallback,
                            double timeout_s = 10.0);

    EmotionResult classify(std::string_view text) const override;

private:
    std::string origin_;
    std::string path_;
    std::shared_ptr<const EmotionClassifier> fallback_;
    double timeout_s_;
};

}  // namespace destigma
