#include "destigma/style.hpp"

#include "destigma/error.hpp"
#include "destigma/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace destigma::style {

namespace {

bool is_punct_cp(char32_t cp) noexcept {
    if (cp < 0x80) {
        return std::ispunct(static_cast<int>(cp)) != 0;
    }
    switch (cp) {
    case 0x00A1: case 0x00AB: case 0x00BB: case 0x00BF:  // ¡ « » ¿
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
    case 0x2018: case 0x2019: case 0x201A: case 0x201C: case 0x201D: case 0x201E:
    case 0x2026: case 0x2039: case 0x203A:
        return true;
    default:
        return false;
    }
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::vector<char32_t> decode_all(std::string_view s) {
    std::vector<char32_t> cps;
    cps.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 1;
        cps.push_back(text::decode_utf8(s, i, len));
        i += len;
    }
    return cps;
}

std::string normalize_token(std::string_view raw) {
    auto cps = decode_all(raw);
    std::size_t begin = 0;
    std::size_t end = cps.size();
    while (begin < end && is_punct_cp(cps[begin])) {
        ++begin;
    }
    while (end > begin && is_punct_cp(cps[end - 1])) {
        --end;
    }
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        char32_t cp = cps[i];
        if (cp == 0x2019 || cp == 0x2018) {
            cp = '\'';
        } else if (cp < 0x80) {
            cp = static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
        }
        append_utf8(out, cp);
    }
    return out;
}

bool is_closer(char32_t cp) noexcept {
    return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x201D || cp == 0x2019 || cp == 0xBB;
}

bool is_terminator(char32_t cp) noexcept {
    return cp == '.' || cp == '!' || cp == '?' || cp == 0x2026;
}

bool is_space_cp(char32_t cp) {
    std::string buf;
    append_utf8(buf, cp);
    return text::whitespace_len(buf, 0) > 0;
}

// The whitespace-delimited word that ends at `end` (exclusive), lowercased.
std::string word_before(const std::vector<char32_t>& cps, std::size_t end) {
    std::size_t begin = end;
    while (begin > 0 && !is_space_cp(cps[begin - 1])) {
        --begin;
    }
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        char32_t cp = cps[i];
        if (cp < 0x80) {
            cp = static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
        }
        append_utf8(out, cp);
    }
    // Drop opening punctuation such as "(" or a quote before the abbreviation.
    while (!out.empty() && (out.front() == '(' || out.front() == '"' || out.front() == '\'')) {
        out.erase(out.begin());
    }
    return out;
}

const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> set{
        "dr.",   "mr.",   "mrs.", "ms.",  "prof.", "sr.",  "jr.",  "st.",   "vs.",  "etc.", "e.g.", "i.e.",
        "u.s.",  "u.k.",  "a.m.", "p.m.", "approx.", "dept.", "est.", "fig.", "inc.", "ltd.", "co.",  "no.",
        "mt.",   "ave.",  "gen.", "gov.", "lt.",  "col.", "sgt.", "capt.", "rev.", "hon.", "jan.", "feb.",
        "mar.",  "apr.",  "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "mg.", "ml.",
        "min.",  "max.",  "vol.", "cf.",  "al.",  "ph.d.", "m.d.", "u.s.a."};
    return set;
}

const std::unordered_set<std::string>& irregular_participles() {
    static const std::unordered_set<std::string> set{
        "arisen",   "awoken",    "beaten",    "become",   "begun",     "bent",     "bet",      "bitten",
        "bled",     "blown",     "broken",    "bred",     "brought",   "built",    "burnt",    "burst",
        "bought",   "cast",      "caught",    "chosen",   "clung",     "cost",     "crept",    "cut",
        "dealt",    "dug",       "done",      "drawn",    "dreamt",    "drunk",    "driven",   "eaten",
        "fallen",   "fed",       "felt",      "fought",   "found",     "fled",     "flung",    "flown",
        "forbidden","forgotten", "forgiven",  "frozen",   "got",       "gotten",   "given",    "ground",
        "grown",    "hung",      "had",       "heard",    "hidden",    "hit",      "held",     "hurt",
        "kept",     "knelt",     "known",     "laid",     "led",       "leant",    "learnt",   "left",
        "lent",     "let",       "lain",      "lit",      "lost",      "made",     "meant",    "met",
        "mistaken", "misled",    "mown",      "overcome", "overdone",  "overtaken","overthrown","paid",
        "put",      "quit",      "read",      "rid",      "ridden",    "rung",     "risen",    "said",
        "seen",     "sought",    "sold",      "sent",     "set",       "sewn",     "shaken",   "shed",
        "shot",     "shown",     "shrunk",    "shut",     "sung",      "sunk",     "slain",    "slept",
        "slid",     "slung",     "smelt",     "sown",     "spoken",    "sped",     "spelt",    "spent",
        "spilt",    "spun",      "spat",      "split",    "spoilt",    "spread",   "sprung",   "stood",
        "stolen",   "stuck",     "stung",     "stunk",    "struck",    "strung",   "striven",  "sworn",
        "swept",    "swollen",   "swum",      "swung",    "taken",     "taught",   "torn",     "told",
        "thought",  "thrown",    "thrust",    "trodden",  "understood","undertaken","upset",  "woken",
        "worn",     "woven",     "wed",       "wept",     "won",       "wound",    "withdrawn","written"};
    return set;
}

// Regular-looking "-ed"/"-en" words that are not participles.
const std::unordered_set<std::string>& participle_stoplist() {
    static const std::unordered_set<std::string> set{
        "need",    "seed",    "feed",     "bleed",   "breed",   "speed",   "weed",    "deed",    "greed",
        "indeed",  "exceed",  "proceed",  "succeed", "hundred", "sled",
        "often",   "even",    "open",     "seven",   "eleven",  "heaven",  "oven",    "oxen",    "children",
        "women",   "men",     "garden",   "kitchen", "chicken", "citizen", "dozen",   "eden",    "ten",
        "then",    "when",    "been",    "queen",   "green",   "screen",  "teen",    "keen",
        "between", "sudden",  "burden",   "golden",  "wooden",  "woolen",  "linen",   "token",   "siren",
        "kitten",  "mitten",  "happen",   "listen",  "omen",    "semen",   "specimen","amen",
        "pollen",  "heathen", "aspen",    "raven",   "haven",   "uneven",
        "hyphen",  "alien",   "lichen",   "barren",  "warren",  "sicken",  "weaken",  "darken",
        "soften",  "frighten","threaten", "strengthen","lessen","awaken",  "fasten",  "shorten", "harden",
        "fatten",  "brighten","tighten",  "loosen",  "deepen",  "widen",   "ripen",   "sweeten", "thicken"};
    return set;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& raw : text::split_whitespace(text)) {
        auto token = normalize_token(raw);
        if (!token.empty()) {
            out.push_back(std::move(token));
        }
    }
    return out;
}

bool is_abbreviation(std::string_view lowered_token) {
    return abbreviations().contains(std::string(lowered_token));
}

std::vector<std::string> split_sentences(std::string_view text) {
    const auto cps = decode_all(text);
    std::vector<std::string> out;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        std::string piece;
        for (std::size_t i = start; i < end; ++i) {
            append_utf8(piece, cps[i]);
        }
        auto trimmed = text::trim(piece);
        if (!tokenize(trimmed).empty()) {
            out.push_back(std::move(trimmed));
        }
        start = end;
    };
    std::size_t i = 0;
    while (i < cps.size()) {
        if (!is_terminator(cps[i])) {
            ++i;
            continue;
        }
        const std::size_t run_begin = i;
        while (i < cps.size() && is_terminator(cps[i])) {
            ++i;
        }
        const std::size_t run_end = i;
        while (i < cps.size() && is_closer(cps[i])) {
            ++i;
        }
        if (i < cps.size() && !is_space_cp(cps[i])) {
            continue;  // "3.5", "e.g.," and similar stay inside the sentence
        }
        if (run_end - run_begin == 1 && cps[run_begin] == '.' && run_end == i &&
            is_abbreviation(word_before(cps, run_end))) {
            continue;
        }
        flush(i);
    }
    if (start < cps.size()) {
        flush(cps.size());
    }
    return out;
}

std::optional<double> mtld_one_pass(std::span<const std::string> tokens, double threshold) {
    std::unordered_set<std::string_view> types;
    std::size_t count = 0;
    double factors = 0.0;
    for (const auto& token : tokens) {
        types.insert(token);
        ++count;
        const double ttr = static_cast<double>(types.size()) / static_cast<double>(count);
        if (ttr <= threshold) {
            factors += 1.0;
            types.clear();
            count = 0;
        }
    }
    if (count > 0) {
        const double ttr = static_cast<double>(types.size()) / static_cast<double>(count);
        factors += (1.0 - ttr) / (1.0 - threshold);
    }
    if (factors == 0.0) {
        return std::nullopt;
    }
    return static_cast<double>(tokens.size()) / factors;
}

double mtld(std::span<const std::string> tokens, double threshold) {
    if (tokens.empty()) {
        throw Error(Errc::EmptyText, "MTLD of an empty token list");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw Error(Errc::Config, "MTLD threshold must lie in (0, 1)");
    }
    const auto forward = mtld_one_pass(tokens, threshold);
    std::vector<std::string> reversed(tokens.rbegin(), tokens.rend());
    const auto backward = mtld_one_pass(reversed, threshold);
    if (!forward || !backward) {
        throw Error(Errc::InsufficientVariation,
                    "type-token ratio never reaches " + std::to_string(threshold) + " over " +
                        std::to_string(tokens.size()) + " tokens");
    }
    return (*forward + *backward) / 2.0;
}

bool is_be_auxiliary(std::string_view token) {
    static constexpr std::array<std::string_view, 8> aux{"am", "is", "are", "was", "were", "be", "been", "being"};
    return std::find(aux.begin(), aux.end(), token) != aux.end();
}

bool is_past_participle(std::string_view token) {
    const std::string t(token);
    if (irregular_participles().contains(t)) {
        return true;
    }
    if (t.size() < 4 || participle_stoplist().contains(t)) {
        return false;
    }
    return ends_with(t, "ed") || ends_with(t, "en");
}

bool is_passive_sentence(std::string_view sentence) {
    const auto tokens = tokenize(sentence);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!is_be_auxiliary(tokens[i])) {
            continue;
        }
        const std::size_t last = std::min(tokens.size() - 1, i + kParticipleWindow);
        for (std::size_t j = i + 1; j <= last; ++j) {
            if (is_past_participle(tokens[j])) {
                return true;
            }
        }
    }
    return false;
}

double passive_ratio(std::span<const std::string> sentences) {
    if (sentences.empty()) {
        return 0.0;
    }
    const auto passive = std::count_if(sentences.begin(), sentences.end(),
                                       [](const std::string& s) { return is_passive_sentence(s); });
    return static_cast<double>(passive) / static_cast<double>(sentences.size());
}

std::size_t PunctuationProfile::total() const {
    std::size_t sum = 0;
    for (const auto& [mark, n] : counts) {
        sum += n;
    }
    return sum;
}

const std::vector<std::string>& tracked_marks() {
    static const std::vector<std::string> marks{".", ",", "!", "?", ";", ":", "—", "-", "\"", "'", "(", ")",
                                                "…"};
    return marks;
}

PunctuationProfile punctuation_profile(std::string_view text) {
    PunctuationProfile p;
    for (const auto& m : tracked_marks()) {
        p.counts[m] = 0;
    }
    const auto cps = decode_all(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        const char32_t cp = cps[i];
        if (cp == '.') {
            std::size_t run = 0;
            while (i < cps.size() && cps[i] == '.') {
                ++run;
                ++i;
            }
            if (run >= 3) {
                ++p.counts["…"];
            } else {
                p.counts["."] += run;
            }
            continue;
        }
        ++i;
        switch (cp) {
        case ',': ++p.counts[","]; break;
        case '!': ++p.counts["!"]; break;
        case '?': ++p.counts["?"]; break;
        case ';': ++p.counts[";"]; break;
        case ':': ++p.counts[":"]; break;
        case 0x2014: ++p.counts["—"]; break;
        case '-': case 0x2013: ++p.counts["-"]; break;
        case '"': case 0x201C: case 0x201D: ++p.counts["\""]; break;
        case '\'': case 0x2018: case 0x2019: ++p.counts["'"]; break;
        case '(': ++p.counts["("]; break;
        case ')': ++p.counts[")"]; break;
        case 0x2026: ++p.counts["…"]; break;
        default: break;
        }
    }
    const auto tokens = tokenize(text).size();
    p.density = tokens == 0 ? 0.0 : 100.0 * static_cast<double>(p.total()) / static_cast<double>(tokens);
    return p;
}

SentenceLengthStats sentence_length_stats(std::span<const std::string> sentences) {
    if (sentences.empty()) {
        throw Error(Errc::EmptyText, "no sentences");
    }
    std::vector<double> lengths;
    lengths.reserve(sentences.size());
    for (const auto& s : sentences) {
        lengths.push_back(static_cast<double>(tokenize(s).size()));
    }
    const double n = static_cast<double>(lengths.size());
    double mean = 0.0;
    for (double l : lengths) {
        mean += l;
    }
    mean /= n;
    double var = 0.0;
    for (double l : lengths) {
        var += (l - mean) * (l - mean);
    }
    return {mean, std::sqrt(var / n)};
}

void to_json(nlohmann::json& j, const StyleProfile& p) {
    j = nlohmann::json{{"top_emotion", p.top_emotion},
                       {"emotion_distribution", p.emotion_distribution},
                       {"emotion_source", p.emotion_source},
                       {"mtld", p.mtld ? nlohmann::json(*p.mtld) : nlohmann::json(nullptr)},
                       {"insufficient_variation", !p.mtld.has_value()},
                       {"passive_ratio", p.passive_ratio},
                       {"punctuation_counts", p.punctuation_counts},
                       {"punctuation_density", p.punctuation_density},
                       {"sentence_len_mean", p.sentence_len_mean},
                       {"sentence_len_std", p.sentence_len_std},
                       {"token_count", p.token_count},
                       {"sentence_count", p.sentence_count}};
}

void from_json(const nlohmann::json& j, StyleProfile& p) {
    j.at("top_emotion").get_to(p.top_emotion);
    j.at("emotion_distribution").get_to(p.emotion_distribution);
    p.emotion_source = j.value("emotion_source", std::string("lexicon"));
    if (const auto& m = j.at("mtld"); m.is_null()) {
        p.mtld.reset();
    } else {
        p.mtld = m.get<double>();
    }
    j.at("passive_ratio").get_to(p.passive_ratio);
    j.at("punctuation_counts").get_to(p.punctuation_counts);
    j.at("punctuation_density").get_to(p.punctuation_density);
    j.at("sentence_len_mean").get_to(p.sentence_len_mean);
    j.at("sentence_len_std").get_to(p.sentence_len_std);
    j.at("token_count").get_to(p.token_count);
    p.sentence_count = j.value("sentence_count", std::size_t{0});
}

StyleProfile build_profile(std::string_view text, const EmotionClassifier& classifier, double mtld_threshold) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) {
        throw Error(Errc::EmptyText, "text has no tokens");
    }
    StyleProfile p;
    const auto emotion = classifier.classify(text);
    p.top_emotion = emotion.top;
    p.emotion_distribution = emotion.distribution;
    p.emotion_source = emotion.source;
    try {
        p.mtld = mtld(tokens, mtld_threshold);
    } catch (const Error& e) {
        if (e.code() != Errc::InsufficientVariation) {
            throw;
        }
    }
    const auto sentences = split_sentences(text);
    p.passive_ratio = passive_ratio(sentences);
    const auto punct = punctuation_profile(text);
    p.punctuation_counts = punct.counts;
    p.punctuation_density = punct.density;
    const auto lengths = sentence_length_stats(sentences);
    p.sentence_len_mean = lengths.mean;
    p.sentence_len_std = lengths.stddev;
    p.token_count = tokens.size();
    p.sentence_count = sentences.size();
    return p;
}

}  // namespace destigma::style
