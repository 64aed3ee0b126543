#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace destigma {

// Rows of the substance-by-stigma-type table, in table order.
enum class SubstanceCategory {
    Stimulants,
    Cannabis,
    Narcotics,
    Depressants,
    Hallucinogens,
    ReversalAgents,
    DrugsOfConcern,
    SyntheticCannabinoids,
    Other,
    DesignerDrugs,
    Unspecified,
};

inline constexpr std::size_t kSubstanceCategoryCount = 11;

const std::array<SubstanceCategory, kSubstanceCategoryCount>& all_substance_categories();

// Display name used in reports, e.g. "Reversal Agents".
std::string_view substance_category_name(SubstanceCategory c) noexcept;

// Accepts the display name or the identifier form ("ReversalAgents"),
// case-insensitively.
std::optional<SubstanceCategory> parse_substance_category(std::string_view name);

void to_json(nlohmann::json& j, SubstanceCategory c);
void from_json(const nlohmann::json& j, SubstanceCategory& c);

// Term table for tagging. Terms are sequences of lowercase [a-z0-9] words;
// matching is word-aligned, case-insensitive, and greedy left to right with
// the longest term winning at each position. Generic drug-use words
// ("drugs", "high", "pills") are kept apart: they never add a category.
class SubstanceLexicon {
public:
    void add(std::string_view term, SubstanceCategory category);
    void add_generic(std::string_view term);

    // CSV `term,category`; category "Generic" marks a generic term.
    static SubstanceLexicon from_csv(const std::filesystem::path& path);

    struct Match {
        std::string term;
        std::optional<SubstanceCategory> category;  // nullopt for generic terms
        std::size_t word_index{0};
    };

    std::vector<Match> matches(std::string_view text) const;

    // Matched categories; {Unspecified} when only generic terms or nothing matched.
    std::set<SubstanceCategory> tag(std::string_view text) const;

    std::size_t size() const noexcept { return entries_.size(); }

private:
    struct Entry {
        std::vector<std::string> words;
        std::optional<SubstanceCategory> category;
    };

    void insert(std::string_view term, std::optional<SubstanceCategory> category);

    std::vector<Entry> entries_;
    std::size_t max_words_{0};
};

// Lowercase [a-z0-9]+ runs of `text`.
std::vector<std::string> substance_words(std::string_view text);

enum class StigmaType;

// Category x {Directed, Self, Structural} counts. A post tagged with k
// categories adds one to k cells of its stigma-type column.
class Crosstab {
public:
    // Throws Error(Precondition) for a None-typed record or empty substance set.
    void add(StigmaType type, const std::set<SubstanceCategory>& substances);

    std::size_t cell(SubstanceCategory c, StigmaType type) const;
    std::size_t row_total(SubstanceCategory c) const;
    std::size_t column_total(StigmaType type) const;

    // Header `category,Directed,Self,Structural,Total`, one row per category.
    std::string to_csv() const;
    nlohmann::json to_json() const;

    bool operator==(const Crosstab&) const = default;

private:
    static std::size_t column(StigmaType type);

    std::array<std::array<std::size_t, 3>, kSubstanceCategoryCount> cells_{};
};

}  // namespace destigma
