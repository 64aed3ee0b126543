#include "destigma/emotion.hpp"

#include "destigma/error.hpp"
#include "destigma/style.hpp"
#include "destigma/text.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>

namespace destigma {

const std::vector<std::string>& goemotions_labels() {
    static const std::vector<std::string> labels{
        "admiration", "amusement",   "anger",       "annoyance",     "approval",       "caring",  "confusion",
        "curiosity",  "desire",      "disappointment", "disapproval", "disgust",       "embarrassment",
        "excitement", "fear",        "gratitude",   "grief",         "joy",            "love",    "nervousness",
        "optimism",   "pride",       "realization", "relief",        "remorse",        "sadness", "surprise",
        "neutral"};
    return labels;
}

EmotionResult normalize_scores(const std::map<std::string, double>& scores, std::string source) {
    EmotionResult r;
    r.source = std::move(source);
    double sum = 0.0;
    for (const auto& label : goemotions_labels()) {
        double v = 0.0;
        if (const auto it = scores.find(label); it != scores.end() && it->second > 0.0) {
            v = it->second;
        }
        r.distribution[label] = v;
        sum += v;
    }
    if (sum <= 0.0) {
        r.distribution["neutral"] = 1.0;
        sum = 1.0;
    }
    double best = -1.0;
    // std::map iterates labels in lexicographic order, so a strict '>' keeps
    // the smallest label on ties.
    for (auto& [label, p] : r.distribution) {
        p /= sum;
        if (p > best) {
            best = p;
            r.top = label;
        }
    }
    return r;
}

LexiconEmotionClassifier::LexiconEmotionClassifier(std::unordered_map<std::string, std::string> term_to_label)
    : lexicon_(std::move(term_to_label)) {
    const auto& labels = goemotions_labels();
    for (const auto& [term, label] : lexicon_) {
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
            throw Error(Errc::Config, "emotion lexicon maps '" + term + "' to unknown label '" + label + "'");
        }
    }
}

LexiconEmotionClassifier LexiconEmotionClassifier::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::Config, "cannot open emotion lexicon " + path.string());
    }
    std::unordered_map<std::string, std::string> lex;
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') {
            continue;
        }
        const auto comma = trimmed.find(',');
        if (comma == std::string::npos) {
            throw Error(Errc::Config, "bad emotion lexicon line: " + trimmed);
        }
        auto term = text::to_lower_ascii(text::trim(trimmed.substr(0, comma)));
        auto label = text::trim(trimmed.substr(comma + 1));
        if (term == "term" && label == "label") {
            continue;
        }
        lex.emplace(std::move(term), std::move(label));
    }
    return LexiconEmotionClassifier(std::move(lex));
}

EmotionResult LexiconEmotionClassifier::classify(std::string_view text) const {
    std::map<std::string, double> hits;
    double total = 0.0;
    for (const auto& token : style::tokenize(text)) {
        if (const auto it = lexicon_.find(token); it != lexicon_.end()) {
            hits[it->second] += 1.0;
            total += 1.0;
        }
    }
    if (total == 0.0) {
        hits["neutral"] = 1.0;
    }
    std::map<std::string, double> smoothed;
    for (const auto& label : goemotions_labels()) {
        smoothed[label] = hits[label] + 1.0;
    }
    return normalize_scores(smoothed, "lexicon");
}

RemoteEmotionClassifier::RemoteEmotionClassifier(std::string endpoint_url,
                                                 std::shared_ptr<const EmotionClassifier> fallback, double timeout_s)
    : fallback_(std::move(fallback)), timeout_s_(timeout_s) {
    if (!fallback_) {
        throw Error(Errc::Config, "remote emotion classifier needs a fallback");
    }
    const auto scheme_end = endpoint_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = endpoint_url.find('/', host_start);
    origin_ = endpoint_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint_url.substr(path_start);
}

EmotionResult RemoteEmotionClassifier::classify(std::string_view text) const {
    auto fall_back = [&](const std::string& why) {
        spdlog::warn("emotion endpoint {}{} unavailable ({}); using lexicon", origin_, path_, why);
        auto r = fallback_->classify(text);
        r.source = "lexicon_fallback";
        return r;
    };
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_s_));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    const auto res = client.Post(path_, nlohmann::json{{"text", std::string(text)}}.dump(), "application/json");
    if (!res) {
        return fall_back(httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        return fall_back("HTTP " + std::to_string(res->status));
    }
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("scores") || !body["scores"].is_object()) {
        return fall_back("malformed response");
    }
    std::map<std::string, double> scores;
    for (const auto& [label, v] : body["scores"].items()) {
        if (v.is_number()) {
            scores[label] = v.get<double>();
        }
    }
    return normalize_scores(scores, "remote");
}

}  // namespace destigma
