#pragma once

#include "destigma/gateway.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace destigma {

// ---- classification metrics ----

struct ConfusionCounts {
    std::size_t tp{0};
    std::size_t fp{0};
    std::size_t fn{0};
    std::size_t tn{0};
};

struct PrecisionRecallF1 {
    double precision{0.0};
    double recall{0.0};
    double f1{0.0};
};

// Throws Error(EmptyConfusion) when tp+fp+fn = 0. With tp = 0 all three are 0.
PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c);

// Throws Error(LengthMismatch) for unequal or empty lists and
// Error(DegenerateMarginals) when chance agreement is 1 but observed is not.
double cohens_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

// ---- Student t ----

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct TTestResult {
    double t{0.0};
    long df{1};
    double p{1.0};
    double mean_diff{0.0};
};

void to_json(nlohmann::json& j, const TTestResult& r);

// Paired two-sided test on d = x - y. All-zero differences give t = 0, p = 1.
// Throws Error(LengthMismatch), Error(TooFewPairs) for n < 2 and
// Error(ZeroVariance) for constant non-zero differences.
TTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y);

// ---- psycholinguistic features ----

inline constexpr std::size_t kDefaultBigwordLetters = 7;

// Open category lexicon in the spirit of LIWC. Entries ending in '*' match
// any token with that prefix.
class PsychLexicon {
public:
    void add(std::string_view term, const std::string& category);

    // CSV `term,category`, header optional.
    static PsychLexicon from_csv(const std::filesystem::path& path);

    // Categories present in the lexicon, sorted.
    std::vector<std::string> categories() const;

    // Categories the token belongs to (each at most once).
    std::vector<std::string> lookup(std::string_view token) const;

private:
    std::unordered_map<std::string, std::vector<std::string>> exact_;
    std::vector<std::pair<std::string, std::string>> prefixes_;  // prefix, category
    std::vector<std::string> categories_;
};

using PsychFeatures = std::map<std::string, double>;

// Proportions of tokens per lexicon category, plus "bigwords" (tokens with
// at least `bigword_letters` letters) and "punctuation_density" (marks per
// 100 tokens). Throws Error(EmptyText) for a text without tokens.
PsychFeatures feature_vector(std::string_view text, const PsychLexicon& lexicon,
                             std::size_t bigword_letters = kDefaultBigwordLetters);

struct CompareOptions {
    double alpha{0.05};
    bool bonferroni{false};
    std::size_t bigword_letters{kDefaultBigwordLetters};
};

struct FeatureTest {
    std::string feature;
    double mean_original{0.0};
    double mean_rewrite{0.0};
    std::optional<TTestResult> test;
    std::string error;  // set when the test could not be computed
    bool flagged{false};
};

struct FeatureComparison {
    std::size_t pairs{0};
    double alpha{0.05};
    double alpha_used{0.05};
    bool bonferroni{false};
    std::vector<FeatureTest> features;
    std::vector<std::string> flagged;
    std::string note;
};

nlohmann::json to_json(const FeatureComparison& c);

// Paired test per feature over aligned text lists. Throws
// Error(LengthMismatch) or Error(TooFewPairs) up front; per-feature failures
// are recorded in the table.
FeatureComparison compare_corpora(const std::vector<std::string>& originals, const std::vector<std::string>& rewrites,
                                  const PsychLexicon& lexicon, const CompareOptions& options = {});

// ---- provider benchmark ----

struct GoldItem {
    std::string id;
    std::string text;
    bool drug{false};
};

// JSONL {id, text, label}; label D/ND. Throws Error(EmptyGold) for no items.
std::vector<GoldItem> load_gold(const std::filesystem::path& path);

struct BenchmarkRow {
    std::string provider;
    std::string model_id;
    ConfusionCounts confusion;
    std::optional<PrecisionRecallF1> scores;
    std::size_t parse_failures{0};
    double seconds{0.0};
    double cost_usd{0.0};
    long rpm{0};
    bool failed{false};
    std::string error;
};

// Runs the relevance detector of each provider over the gold items.
// Unreadable answers count as ND predictions. A provider failing with a hard
// gateway error gets a failed row; the others still run.
std::vector<BenchmarkRow> benchmark_providers(const std::vector<GoldItem>& gold,
                                              const std::vector<std::string>& providers, Gateway& gateway,
                                              const std::string& template_id = "relevance_detect",
                                              std::size_t workers = 4);

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

// ---- ranking tally ----

struct Judgment {
    std::string task_id;
    std::string reviewer_id;
    std::string best_quality;
    std::string most_destigmatized;
    std::string most_faithful;
    std::string comments;
    std::string submitted_at;

    // All three criteria answered.
    bool complete() const noexcept {
        return !best_quality.empty() && !most_destigmatized.empty() && !most_faithful.empty();
    }
};

void to_json(nlohmann::json& j, const Judgment& v);
void from_json(const nlohmann::json& j, Judgment& v);

// task id -> (blinded candidate id -> system id)
using BlindingMap = std::map<std::string, std::map<std::string, std::string>>;

inline constexpr std::array<std::string_view, 3> kRankingCriteria{"Best Overall Quality", "Most De-Stigmatized",
                                                                  "Most Faithful"};

struct RankingTally {
    std::vector<std::string> systems;
    std::map<std::string, std::array<std::size_t, 3>> counts;  // system -> per criterion
    std::size_t complete{0};
    std::size_t incomplete{0};
    std::size_t rejected{0};

    std::size_t column_sum(std::size_t criterion) const;
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

// Each complete judgment adds one count per criterion. Incomplete judgments
// are counted but add nothing; judgments naming an unknown task or a blinded
// id outside their task are rejected.
RankingTally tally_rankings(const std::vector<Judgment>& judgments, const BlindingMap& blinding,
                            const std::vector<std::string>& systems);

}  // namespace destigma
