#include "destigma/substances.hpp"

#include "destigma/error.hpp"
#include "destigma/stigma.hpp"
#include "destigma/text.hpp"

#include <cctype>
#include <fstream>

namespace destigma {

namespace {

constexpr std::array<std::string_view, kSubstanceCategoryCount> kNames{
    "Stimulants",   "Cannabis",          "Narcotics",
    "Depressants",  "Hallucinogens",     "Reversal Agents",
    "Drugs of Concern", "Synthetic Cannabinoids", "Other",
    "Designer Drugs", "Unspecified"};

std::string squash(std::string_view s) {
    std::string out;
    for (const char ch : s) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    return out;
}

}  // namespace

const std::array<SubstanceCategory, kSubstanceCategoryCount>& all_substance_categories() {
    static const std::array<SubstanceCategory, kSubstanceCategoryCount> all{
        SubstanceCategory::Stimulants,     SubstanceCategory::Cannabis,
        SubstanceCategory::Narcotics,      SubstanceCategory::Depressants,
        SubstanceCategory::Hallucinogens,  SubstanceCategory::ReversalAgents,
        SubstanceCategory::DrugsOfConcern, SubstanceCategory::SyntheticCannabinoids,
        SubstanceCategory::Other,          SubstanceCategory::DesignerDrugs,
        SubstanceCategory::Unspecified};
    return all;
}

std::string_view substance_category_name(SubstanceCategory c) noexcept {
    return kNames[static_cast<std::size_t>(c)];
}

std::optional<SubstanceCategory> parse_substance_category(std::string_view name) {
    const auto key = squash(name);
    for (const auto c : all_substance_categories()) {
        if (squash(substance_category_name(c)) == key) {
            return c;
        }
    }
    return std::nullopt;
}

void to_json(nlohmann::json& j, SubstanceCategory c) { j = std::string(substance_category_name(c)); }

void from_json(const nlohmann::json& j, SubstanceCategory& c) {
    const auto parsed = parse_substance_category(j.get<std::string>());
    if (!parsed) {
        throw Error(Errc::MalformedInput, "unknown substance category " + j.get<std::string>());
    }
    c = *parsed;
}

std::vector<std::string> substance_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (const char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (u < 0x80 && std::isalnum(u)) {
            current.push_back(static_cast<char>(std::tolower(u)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        words.push_back(std::move(current));
    }
    return words;
}

void SubstanceLexicon::insert(std::string_view term, std::optional<SubstanceCategory> category) {
    auto words = substance_words(term);
    if (words.empty()) {
        throw Error(Errc::Config, "empty substance term '" + std::string(term) + "'");
    }
    if (category == SubstanceCategory::Unspecified) {
        category.reset();
    }
    for (auto& e : entries_) {
        if (e.words == words) {
            e.category = category;
            return;
        }
    }
    max_words_ = std::max(max_words_, words.size());
    entries_.push_back({std::move(words), category});
}

void SubstanceLexicon::add(std::string_view term, SubstanceCategory category) { insert(term, category); }

void SubstanceLexicon::add_generic(std::string_view term) { insert(term, std::nullopt); }

SubstanceLexicon SubstanceLexicon::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::Config, "cannot open substance lexicon " + path.string());
    }
    SubstanceLexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') {
            continue;
        }
        const auto comma = trimmed.rfind(',');
        if (comma == std::string::npos) {
            throw Error(Errc::Config, path.string() + ":" + std::to_string(line_no) + ": expected term,category");
        }
        const auto term = text::trim(trimmed.substr(0, comma));
        const auto category = text::trim(trimmed.substr(comma + 1));
        if (line_no == 1 && term == "term") {
            continue;
        }
        if (squash(category) == "generic") {
            lex.add_generic(term);
            continue;
        }
        const auto c = parse_substance_category(category);
        if (!c) {
            throw Error(Errc::Config,
                        path.string() + ":" + std::to_string(line_no) + ": unknown category '" + category + "'");
        }
        lex.add(term, *c);
    }
    return lex;
}

std::vector<SubstanceLexicon::Match> SubstanceLexicon::matches(std::string_view text) const {
    const auto words = substance_words(text);
    std::vector<Match> out;
    std::size_t i = 0;
    while (i < words.size()) {
        const Entry* best = nullptr;
        for (const auto& e : entries_) {
            if (e.words.size() > words.size() - i || (best && e.words.size() <= best->words.size())) {
                continue;
            }
            if (std::equal(e.words.begin(), e.words.end(), words.begin() + static_cast<long>(i))) {
                best = &e;
            }
        }
        if (!best) {
            ++i;
            continue;
        }
        out.push_back({text::join(best->words, " "), best->category, i});
        i += best->words.size();
    }
    return out;
}

std::set<SubstanceCategory> SubstanceLexicon::tag(std::string_view text) const {
    std::set<SubstanceCategory> out;
    for (const auto& m : matches(text)) {
        if (m.category) {
            out.insert(*m.category);
        }
    }
    if (out.empty()) {
        out.insert(SubstanceCategory::Unspecified);
    }
    return out;
}

std::size_t Crosstab::column(StigmaType type) {
    switch (type) {
    case StigmaType::Directed: return 0;
    case StigmaType::SelfStigma: return 1;
    case StigmaType::Structural: return 2;
    case StigmaType::None: break;
    }
    throw Error(Errc::Precondition, "crosstab takes stigmatizing records only");
}

void Crosstab::add(StigmaType type, const std::set<SubstanceCategory>& substances) {
    const auto col = column(type);
    if (substances.empty()) {
        throw Error(Errc::Precondition, "crosstab record without substance categories");
    }
    for (const auto c : substances) {
        ++cells_[static_cast<std::size_t>(c)][col];
    }
}

std::size_t Crosstab::cell(SubstanceCategory c, StigmaType type) const {
    return cells_[static_cast<std::size_t>(c)][column(type)];
}

std::size_t Crosstab::row_total(SubstanceCategory c) const {
    const auto& row = cells_[static_cast<std::size_t>(c)];
    return row[0] + row[1] + row[2];
}

std::size_t Crosstab::column_total(StigmaType type) const {
    const auto col = column(type);
    std::size_t sum = 0;
    for (const auto& row : cells_) {
        sum += row[col];
    }
    return sum;
}

std::string Crosstab::to_csv() const {
    std::string out = "category,Directed,Self,Structural,Total\n";
    for (const auto c : all_substance_categories()) {
        const auto& row = cells_[static_cast<std::size_t>(c)];
        out += std::string(substance_category_name(c)) + "," + std::to_string(row[0]) + "," +
               std::to_string(row[1]) + "," + std::to_string(row[2]) + "," + std::to_string(row_total(c)) + "\n";
    }
    return out;
}

nlohmann::json Crosstab::to_json() const {
    auto rows = nlohmann::json::array();
    for (const auto c : all_substance_categories()) {
        const auto& row = cells_[static_cast<std::size_t>(c)];
        rows.push_back({{"category", substance_category_name(c)},
                        {"Directed", row[0]},
                        {"Self", row[1]},
                        {"Structural", row[2]},
                        {"Total", row_total(c)}});
    }
    return rows;
}

}  // namespace destigma
