#include "destigma/stigma.hpp"

#include "destigma/ask.hpp"
#include "destigma/error.hpp"
#include "destigma/parallel.hpp"
#include "destigma/text.hpp"

#include <spdlog/spdlog.h>

#include <cctype>

namespace destigma {

using nlohmann::json;

std::string_view stigma_type_name(StigmaType t) noexcept {
    switch (t) {
    case StigmaType::Directed: return "Directed";
    case StigmaType::SelfStigma: return "Self";
    case StigmaType::Structural: return "Structural";
    case StigmaType::None: break;
    }
    return "None";
}

std::optional<StigmaType> parse_stigma_type_name(std::string_view name) {
    const auto key = text::to_lower_ascii(text::trim(name));
    if (key == "directed") return StigmaType::Directed;
    if (key == "self" || key == "selfstigma" || key == "self-stigma") return StigmaType::SelfStigma;
    if (key == "structural") return StigmaType::Structural;
    if (key == "none") return StigmaType::None;
    return std::nullopt;
}

void to_json(json& j, StigmaType t) { j = std::string(stigma_type_name(t)); }

void from_json(const json& j, StigmaType& t) {
    const auto parsed = parse_stigma_type_name(j.get<std::string>());
    if (!parsed) {
        throw Error(Errc::MalformedInput, "unknown stigma type " + j.get<std::string>());
    }
    t = *parsed;
}

std::string_view stigma_element_name(StigmaElement e) noexcept {
    switch (e) {
    case StigmaElement::Labeling: return "labeling";
    case StigmaElement::Stereotyping: return "stereotyping";
    case StigmaElement::Separation: return "separation";
    case StigmaElement::Discrimination: return "discrimination";
    }
    return "labeling";
}

std::optional<StigmaElement> parse_stigma_element(std::string_view name) {
    const auto key = text::to_lower_ascii(text::trim(name));
    if (key == "labeling" || key == "labelling") return StigmaElement::Labeling;
    if (key == "stereotyping") return StigmaElement::Stereotyping;
    if (key == "separation" || key == "status loss" || key == "status_loss" || key == "separation/status loss")
        return StigmaElement::Separation;
    if (key == "discrimination") return StigmaElement::Discrimination;
    return std::nullopt;
}

void to_json(json& j, const EvidenceSpan& s) {
    j = json{{"element", stigma_element_name(s.element)},
             {"quoted_text", s.quoted_text},
             {"rationale", s.rationale},
             {"char_start", s.char_start},
             {"char_end", s.char_end},
             {"verified", s.verified}};
}

void from_json(const json& j, EvidenceSpan& s) {
    const auto e = parse_stigma_element(j.at("element").get<std::string>());
    if (!e) {
        throw Error(Errc::MalformedInput, "unknown stigma element " + j.at("element").dump());
    }
    s.element = *e;
    j.at("quoted_text").get_to(s.quoted_text);
    s.rationale = j.value("rationale", "");
    s.char_start = j.value("char_start", -1L);
    s.char_end = j.value("char_end", -1L);
    s.verified = j.value("verified", false);
}

std::vector<EvidenceSpan>& StigmaExplanation::spans(StigmaElement e) {
    switch (e) {
    case StigmaElement::Labeling: return labeling;
    case StigmaElement::Stereotyping: return stereotyping;
    case StigmaElement::Separation: return separation;
    case StigmaElement::Discrimination: return discrimination;
    }
    return labeling;
}

const std::vector<EvidenceSpan>& StigmaExplanation::spans(StigmaElement e) const {
    return const_cast<StigmaExplanation*>(this)->spans(e);
}

bool StigmaExplanation::empty() const {
    return labeling.empty() && stereotyping.empty() && separation.empty() && discrimination.empty();
}

std::vector<EvidenceSpan> StigmaExplanation::all() const {
    std::vector<EvidenceSpan> out;
    for (const auto* list : {&labeling, &stereotyping, &separation, &discrimination}) {
        out.insert(out.end(), list->begin(), list->end());
    }
    return out;
}

void to_json(json& j, const StigmaExplanation& e) {
    j = json{{"labeling", e.labeling},
             {"stereotyping", e.stereotyping},
             {"separation", e.separation},
             {"discrimination", e.discrimination}};
}

void from_json(const json& j, StigmaExplanation& e) {
    j.at("labeling").get_to(e.labeling);
    j.at("stereotyping").get_to(e.stereotyping);
    j.at("separation").get_to(e.separation);
    j.at("discrimination").get_to(e.discrimination);
}

std::optional<StigmaClassification> parse_stigma_answer(std::string_view completion) {
    std::string line;
    std::size_t pos = 0;
    while (pos <= completion.size()) {
        const auto nl = completion.find('\n', pos);
        const auto candidate = text::trim(completion.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
        if (!candidate.empty()) {
            line = text::to_lower_ascii(candidate);
            break;
        }
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    if (text::starts_with_ci(line, "type:")) {
        line.erase(0, 5);
    }
    // Alphabetic words; "self-stigma" splits into "self" and "stigma".
    std::vector<std::string> words;
    std::string w;
    for (const char ch : line + " ") {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            w.push_back(ch);
        } else if (!w.empty()) {
            words.push_back(std::move(w));
            w.clear();
        }
    }
    StigmaClassification c;
    for (const auto& word : words) {
        if (word == "directed") c.mentioned.insert(StigmaType::Directed);
        else if (word == "self" || word == "selfstigma" || word == "internalized") c.mentioned.insert(StigmaType::SelfStigma);
        else if (word == "structural") c.mentioned.insert(StigmaType::Structural);
        else if (word == "none") c.mentioned.insert(StigmaType::None);
    }
    const bool has_stigma = c.mentioned.count(StigmaType::Directed) + c.mentioned.count(StigmaType::SelfStigma) +
                                c.mentioned.count(StigmaType::Structural) >
                            0;
    if (!has_stigma) {
        if (c.mentioned.count(StigmaType::None) == 0) {
            return std::nullopt;
        }
        c.type = StigmaType::None;
        return c;
    }
    c.mentioned.erase(StigmaType::None);
    c.conflict = c.mentioned.size() > 1;
    for (const auto t : {StigmaType::Directed, StigmaType::Structural, StigmaType::SelfStigma}) {
        if (c.mentioned.count(t) > 0) {
            c.type = t;
            break;
        }
    }
    return c;
}

namespace {

// Extracts the text between the first pair of double quotes (straight or
// curly) in `s`, and whatever follows a '|' after the closing quote.
std::optional<std::pair<std::string, std::string>> split_quote(std::string_view s) {
    static const std::vector<std::string_view> opens{"\"", "\xE2\x80\x9C"};
    static const std::vector<std::string_view> closes{"\"", "\xE2\x80\x9D"};
    std::size_t open = std::string_view::npos;
    std::size_t open_len = 0;
    for (const auto o : opens) {
        const auto p = s.find(o);
        if (p < open) {
            open = p;
            open_len = o.size();
        }
    }
    if (open == std::string_view::npos) {
        return std::nullopt;
    }
    const auto body_start = open + open_len;
    std::size_t close = std::string_view::npos;
    std::size_t close_len = 0;
    for (const auto c : closes) {
        // The last closing quote before the rationale separator, so quotes may
        // themselves contain quotation marks.
        const auto bar = s.find('|', body_start);
        const auto limit = bar == std::string_view::npos ? s.size() : bar;
        const auto p = s.substr(0, limit).rfind(c);
        if (p != std::string_view::npos && p >= body_start && (close == std::string_view::npos || p > close)) {
            close = p;
            close_len = c.size();
        }
    }
    if (close == std::string_view::npos) {
        return std::nullopt;
    }
    std::string quote(s.substr(body_start, close - body_start));
    std::string why;
    const auto rest = s.substr(close + close_len);
    if (const auto bar = rest.find('|'); bar != std::string_view::npos) {
        why = text::trim(rest.substr(bar + 1));
    }
    return std::make_pair(std::move(quote), std::move(why));
}

}  // namespace

std::vector<EvidenceSpan> parse_explanation_lines(std::string_view completion) {
    std::vector<EvidenceSpan> out;
    std::size_t pos = 0;
    while (pos < completion.size()) {
        const auto nl = completion.find('\n', pos);
        const auto line = completion.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? completion.size() : nl + 1;
        auto trimmed = text::trim(line);
        while (!trimmed.empty() && (trimmed.front() == '-' || trimmed.front() == '*')) {
            trimmed = text::trim(std::string_view(trimmed).substr(1));
        }
        const auto colon = trimmed.find(':');
        if (colon == std::string::npos) {
            continue;
        }
        const auto element = parse_stigma_element(trimmed.substr(0, colon));
        if (!element) {
            continue;
        }
        const auto quote = split_quote(std::string_view(trimmed).substr(colon + 1));
        if (!quote || text::trim(quote->first).empty()) {
            continue;
        }
        EvidenceSpan span;
        span.element = *element;
        span.quoted_text = quote->first;
        span.rationale = quote->second;
        out.push_back(std::move(span));
    }
    return out;
}

void ground_span(EvidenceSpan& span, std::string_view normalized_post) {
    const auto needle = text::collapse_whitespace(span.quoted_text);
    span.char_start = -1;
    span.char_end = -1;
    span.verified = false;
    if (needle.empty()) {
        return;
    }
    const auto at = normalized_post.find(needle);
    if (at == std::string_view::npos) {
        return;
    }
    span.quoted_text = needle;
    span.char_start = static_cast<long>(at);
    span.char_end = static_cast<long>(at + needle.size());
    span.verified = true;
}

ClassifyResult classify_stigma(const CleanPost& post, Gateway& gateway, const StigmaOptions& options) {
    PromptRequest req;
    req.template_id = options.classify_template;
    req.slots = {{"post", post.text()}};
    req.temperature = 0.0;
    req.max_tokens = 512;
    const auto answer =
        ask_with_reask<StigmaClassification>(gateway, req, options.provider, kStigmaReask, parse_stigma_answer);
    if (!answer.value) {
        throw Error(Errc::ParseFailure, post.id);
    }
    ClassifyResult r;
    r.classification = *answer.value;
    r.raw_response = answer.raw_responses.back();
    r.model_id = answer.model_id;
    r.template_hash = gateway.templates().get(options.classify_template).hash();
    return r;
}

StigmaExplanation extract_explanation(const CleanPost& post, std::string_view raw_explanation, Gateway& gateway,
                                      const StigmaOptions& options) {
    auto spans = parse_explanation_lines(raw_explanation);
    if (spans.empty()) {
        PromptRequest req;
        req.template_id = options.explain_template;
        req.slots = {{"post", post.text()}};
        req.temperature = 0.0;
        req.max_tokens = 768;
        spans = parse_explanation_lines(gateway.complete(req, options.provider).text);
    }
    if (spans.empty()) {
        throw Error(Errc::ExplanationMissing, post.id);
    }
    const auto normalized = text::collapse_whitespace(post.text());
    StigmaExplanation e;
    for (auto& s : spans) {
        ground_span(s, normalized);
        if (!s.verified) {
            spdlog::debug("post {}: quote not found in text: \"{}\"", post.id, s.quoted_text);
        }
        e.spans(s.element).push_back(std::move(s));
    }
    return e;
}

void to_json(json& j, const StigmaRecord& r) {
    j = json{{"post_id", r.post_id},
             {"stigma_type", r.stigma_type},
             {"explanation", r.explanation ? json(*r.explanation) : json(nullptr)},
             {"substances", r.substances},
             {"type_conflict", r.type_conflict},
             {"explanation_missing", r.explanation_missing},
             {"raw_response", r.raw_response},
             {"model_id", r.model_id},
             {"template_hash", r.template_hash}};
}

void from_json(const json& j, StigmaRecord& r) {
    j.at("post_id").get_to(r.post_id);
    j.at("stigma_type").get_to(r.stigma_type);
    if (const auto& e = j.at("explanation"); !e.is_null()) {
        r.explanation = e.get<StigmaExplanation>();
    } else {
        r.explanation.reset();
    }
    j.at("substances").get_to(r.substances);
    r.type_conflict = j.value("type_conflict", false);
    r.explanation_missing = j.value("explanation_missing", false);
    r.raw_response = j.value("raw_response", "");
    r.model_id = j.value("model_id", "");
    r.template_hash = j.value("template_hash", "");
}

json to_json(const StigmaReport& r) {
    return json{{"input_count", r.input_count},
                {"Directed", r.directed},
                {"Self", r.self_stigma},
                {"Structural", r.structural},
                {"None", r.none},
                {"quarantined", r.quarantined},
                {"type_conflicts", r.conflicts},
                {"explanation_missing", r.explanation_missing}};
}

Crosstab crosstab_of(const std::vector<StigmaRecord>& records) {
    Crosstab t;
    for (const auto& r : records) {
        if (r.stigma_type != StigmaType::None) {
            t.add(r.stigma_type, r.substances);
        }
    }
    return t;
}

StigmaReport run_stigma_stage(const std::vector<CleanPost>& posts, Gateway& gateway, StageStore& store,
                              const SubstanceLexicon& lexicon, const StigmaOptions& options) {
    std::vector<std::optional<StigmaRecord>> records(posts.size());
    std::vector<std::optional<json>> quarantine(posts.size());
    try {
        parallel_for(posts.size(), options.workers, [&](std::size_t i) {
            const auto& post = posts[i];
            ClassifyResult cls;
            try {
                cls = classify_stigma(post, gateway, options);
            } catch (const Error& e) {
                if (e.code() != Errc::ParseFailure) {
                    throw;
                }
                quarantine[i] = json{{"post_id", post.id}, {"stage", "stigma"}, {"error", "ParseFailure"},
                                     {"detail", e.what()}};
                return;
            }
            StigmaRecord r;
            r.post_id = post.id;
            r.stigma_type = cls.classification.type;
            r.type_conflict = cls.classification.conflict;
            r.raw_response = cls.raw_response;
            r.model_id = cls.model_id;
            r.template_hash = cls.template_hash;
            r.substances = lexicon.tag(post.text());
            if (r.type_conflict) {
                spdlog::warn("post {}: several stigma types named, kept {}", post.id,
                             stigma_type_name(r.stigma_type));
            }
            if (r.stigma_type == StigmaType::Directed) {
                try {
                    r.explanation = extract_explanation(post, cls.raw_response, gateway, options);
                } catch (const Error& e) {
                    if (e.code() != Errc::ExplanationMissing) {
                        throw;
                    }
                    spdlog::warn("post {}: directed stigma without an explanation", post.id);
                    r.explanation_missing = true;
                }
            }
            records[i] = std::move(r);
        });
    } catch (const Error& e) {
        throw Error(Errc::StageFailure, std::string("stigma stage: ") + e.what());
    }

    StigmaReport report;
    report.input_count = posts.size();
    std::vector<json> out;
    std::vector<json> quarantined;
    std::vector<StigmaRecord> kept;
    for (std::size_t i = 0; i < posts.size(); ++i) {
        if (quarantine[i]) {
            quarantined.push_back(*quarantine[i]);
            continue;
        }
        const auto& r = *records[i];
        switch (r.stigma_type) {
        case StigmaType::Directed: ++report.directed; break;
        case StigmaType::SelfStigma: ++report.self_stigma; break;
        case StigmaType::Structural: ++report.structural; break;
        case StigmaType::None: ++report.none; break;
        }
        report.conflicts += r.type_conflict ? 1 : 0;
        report.explanation_missing += r.explanation_missing ? 1 : 0;
        out.emplace_back(r);
        kept.push_back(r);
    }
    report.quarantined = quarantined.size();
    report.crosstab = crosstab_of(kept);

    store.write_stage(kStigmaStage, out, posts.size(), to_json(report));
    store.write_stage(kStigmaQuarantineStage, quarantined, posts.size());
    write_file_atomic(store.dir() / "crosstab.csv", report.crosstab.to_csv());
    return report;
}

}  // namespace destigma
