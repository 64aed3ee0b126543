#include "destigma/rewrite.hpp"

#include "destigma/error.hpp"
#include "destigma/parallel.hpp"
#include "destigma/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace destigma {

using nlohmann::json;

std::string_view regime_name(Regime r) noexcept {
    switch (r) {
    case Regime::Baseline: return "baseline";
    case Regime::Informed: return "informed";
    case Regime::InformedStylized: return "stylized";
    }
    return "baseline";
}

std::optional<Regime> parse_regime(std::string_view name) {
    const auto key = text::to_lower_ascii(text::trim(name));
    if (key == "baseline") return Regime::Baseline;
    if (key == "informed") return Regime::Informed;
    if (key == "stylized" || key == "informed_stylized" || key == "informed+stylized") return Regime::InformedStylized;
    return std::nullopt;
}

std::string SystemId::str() const { return std::string(regime_name(regime)) + "/" + model; }

SystemId SystemId::parse(std::string_view s) {
    const auto slash = s.find('/');
    const auto regime = parse_regime(s.substr(0, slash));
    if (slash == std::string_view::npos || !regime || slash + 1 == s.size()) {
        throw Error(Errc::Config, "system id must look like regime/model: " + std::string(s));
    }
    return {*regime, std::string(s.substr(slash + 1))};
}

std::vector<SystemId> make_systems(const std::vector<Regime>& regimes, const std::vector<std::string>& models) {
    std::vector<SystemId> out;
    for (const auto r : regimes) {
        for (const auto& m : models) {
            out.push_back({r, m});
        }
    }
    return out;
}

MtldBuckets mtld_terciles(std::vector<double> values) {
    if (values.size() < 3) {
        return {};
    }
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double h = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {quantile(1.0 / 3.0), quantile(2.0 / 3.0)};
}

std::string_view mtld_bucket(double mtld, const MtldBuckets& buckets) {
    if (mtld < buckets.low) {
        return "simple";
    }
    if (mtld >= buckets.high) {
        return "varied";
    }
    return "moderate";
}

StyleDirectives verbalize_style(const style::StyleProfile& profile, const MtldBuckets& buckets) {
    StyleDirectives d;
    d.tone = "tone: " + profile.top_emotion;
    if (profile.mtld) {
        d.vocabulary = "vocabulary: " + std::string(mtld_bucket(*profile.mtld, buckets));
    }
    d.voice = profile.passive_ratio > kPassiveDirectiveThreshold ? "use some passive constructions"
                                                                  : "keep mostly active voice";
    if (profile.sentence_len_std > kSentenceVariationThreshold) {
        d.variation = "vary sentence length";
    }
    std::vector<std::string> used;
    for (const auto& mark : style::tracked_marks()) {
        if (const auto it = profile.punctuation_counts.find(mark); it != profile.punctuation_counts.end() && it->second > 0) {
            used.push_back(mark);
        }
    }
    if (!used.empty()) {
        d.punctuation = "preserve use of: " + text::join(used, " ");
    }
    d.sentence_length = fmt::format("average sentence length: about {} words",
                                    static_cast<long>(std::lround(profile.sentence_len_mean)));
    return d;
}

namespace {

std::string example_list(const std::vector<EvidenceSpan>& spans) {
    std::string out;
    for (const auto& s : spans) {
        out += "- \"" + s.quoted_text + "\"";
        if (!s.rationale.empty()) {
            out += " (" + s.rationale + ")";
        }
        out += "\n";
    }
    if (!out.empty()) {
        out.pop_back();
    }
    return out;
}

std::string nonempty_completion(Gateway& gateway, const PromptRequest& req, const ModelBinding& model,
                                const std::string& post_id, std::string& model_id) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto c = gateway.complete(req, model.provider);
        model_id = c.model_id;
        auto out = text::trim(c.text);
        if (!out.empty()) {
            return out;
        }
        spdlog::debug("post {}: empty rewrite from {} (attempt {})", post_id, model.label, attempt + 1);
    }
    throw Error(Errc::RewriteFailure, fmt::format("post {}: empty completion from {} twice", post_id, model.label));
}

Rewrite run_template(const CleanPost& post, Gateway& gateway, const ModelBinding& model,
                     const RewriteOptions& options, Regime regime, const std::string& template_id, SlotMap slots) {
    PromptRequest req;
    req.template_id = template_id;
    req.slots = std::move(slots);
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    Rewrite r;
    r.post_id = post.id;
    r.system = {regime, model.label};
    r.template_id = template_id;
    r.template_hash = gateway.templates().get(template_id).hash();
    r.text = nonempty_completion(gateway, req, model, post.id, r.model_id);
    return r;
}

}  // namespace

SlotMap baseline_slots(const CleanPost& post) { return {{"post", post.text()}}; }

SlotMap informed_slots(const CleanPost& post, const StigmaExplanation& explanation) {
    SlotMap slots{{"post", post.text()}};
    for (const auto e : {StigmaElement::Labeling, StigmaElement::Stereotyping, StigmaElement::Separation,
                         StigmaElement::Discrimination}) {
        slots[std::string(stigma_element_name(e)) + "_examples"] = example_list(explanation.spans(e));
    }
    return slots;
}

SlotMap stylized_slots(const CleanPost& post, const StigmaExplanation& explanation,
                       const style::StyleProfile& profile, const MtldBuckets& buckets) {
    auto slots = informed_slots(post, explanation);
    const auto d = verbalize_style(profile, buckets);
    slots["tone"] = d.tone;
    slots["vocabulary"] = d.vocabulary.value_or("");
    slots["voice"] = d.voice;
    slots["variation"] = d.variation.value_or("");
    slots["punctuation"] = d.punctuation.value_or("");
    slots["sentence_length"] = d.sentence_length;
    return slots;
}

Rewrite rewrite_baseline(const CleanPost& post, Gateway& gateway, const ModelBinding& model,
                         const RewriteOptions& options) {
    return run_template(post, gateway, model, options, Regime::Baseline, options.baseline_template,
                        baseline_slots(post));
}

Rewrite rewrite_informed(const CleanPost& post, const std::optional<StigmaExplanation>& explanation,
                         Gateway& gateway, const ModelBinding& model, const RewriteOptions& options) {
    if (!explanation || explanation->empty()) {
        throw Error(Errc::Precondition, "informed rewrite needs an explanation for post " + post.id);
    }
    auto r = run_template(post, gateway, model, options, Regime::Informed, options.informed_template,
                          informed_slots(post, *explanation));
    r.explanation_used = explanation;
    return r;
}

Rewrite rewrite_informed_stylized(const CleanPost& post, const std::optional<StigmaExplanation>& explanation,
                                  const std::optional<style::StyleProfile>& profile, Gateway& gateway,
                                  const ModelBinding& model, const RewriteOptions& options) {
    if (!explanation || explanation->empty()) {
        throw Error(Errc::Precondition, "stylized rewrite needs an explanation for post " + post.id);
    }
    if (!profile) {
        throw Error(Errc::Precondition, "stylized rewrite needs a style profile for post " + post.id);
    }
    auto r = run_template(post, gateway, model, options, Regime::InformedStylized, options.stylized_template,
                          stylized_slots(post, *explanation, *profile, options.buckets));
    r.explanation_used = explanation;
    r.profile_used = profile;
    return r;
}

void to_json(json& j, const Rewrite& r) {
    j = json{{"post_id", r.post_id},
             {"system", r.system.str()},
             {"text", r.text},
             {"template_id", r.template_id},
             {"template_hash", r.template_hash},
             {"model_id", r.model_id},
             {"profile_used", r.profile_used ? json(*r.profile_used) : json(nullptr)},
             {"explanation_used", r.explanation_used ? json(*r.explanation_used) : json(nullptr)}};
}

void from_json(const json& j, Rewrite& r) {
    j.at("post_id").get_to(r.post_id);
    r.system = SystemId::parse(j.at("system").get<std::string>());
    j.at("text").get_to(r.text);
    r.template_id = j.value("template_id", "");
    r.template_hash = j.value("template_hash", "");
    r.model_id = j.value("model_id", "");
    if (const auto& p = j.at("profile_used"); !p.is_null()) {
        r.profile_used = p.get<style::StyleProfile>();
    }
    if (const auto& e = j.at("explanation_used"); !e.is_null()) {
        r.explanation_used = e.get<StigmaExplanation>();
    }
}

void to_json(json& j, const PairRecord& p) {
    j = json{{"post_id", p.post_id},
             {"original", p.original},
             {"rewrites", p.rewrites},
             {"missing", p.missing},
             {"complete", p.complete()}};
}

void from_json(const json& j, PairRecord& p) {
    j.at("post_id").get_to(p.post_id);
    j.at("original").get_to(p.original);
    j.at("rewrites").get_to(p.rewrites);
    j.at("missing").get_to(p.missing);
}

std::vector<PairRecord> build_pair_dataset(const std::vector<CleanPost>& posts, const std::vector<Rewrite>& rewrites,
                                           const std::vector<SystemId>& systems) {
    std::map<std::string, std::map<std::string, std::string>> by_post;
    for (const auto& r : rewrites) {
        by_post[r.post_id][r.system.str()] = r.text;
    }
    std::vector<PairRecord> out;
    out.reserve(posts.size());
    for (const auto& post : posts) {
        PairRecord p;
        p.post_id = post.id;
        p.original = post.text();
        const auto found = by_post.find(post.id);
        for (const auto& s : systems) {
            const auto key = s.str();
            if (found != by_post.end()) {
                if (const auto it = found->second.find(key); it != found->second.end()) {
                    p.rewrites[key] = it->second;
                    continue;
                }
            }
            p.missing.push_back(key);
        }
        out.push_back(std::move(p));
    }
    return out;
}

json to_json(const RewriteReport& r) {
    return json{{"posts", r.posts},
                {"systems", r.systems},
                {"rewrites", r.rewrites},
                {"failures", r.failures},
                {"complete_pairs", r.complete_pairs},
                {"partial_pairs", r.partial_pairs},
                {"pairs_digest", r.pairs_digest}};
}

RewriteReport run_rewrite_stage(const RewriteInputs& inputs, Gateway& gateway, StageStore& store,
                                const std::vector<SystemId>& systems, const std::vector<ModelBinding>& models,
                                const RewriteOptions& options) {
    std::map<std::string, ModelBinding> binding;
    for (const auto& m : models) {
        binding[m.label] = m;
    }
    for (const auto& s : systems) {
        if (!binding.count(s.model)) {
            throw Error(Errc::Config, "system " + s.str() + " names an unconfigured model");
        }
    }

    const auto& posts = inputs.posts;
    const std::size_t n_tasks = posts.size() * systems.size();
    std::vector<std::optional<Rewrite>> done(n_tasks);
    std::vector<std::optional<json>> failed(n_tasks);
    try {
        parallel_for(n_tasks, options.workers, [&](std::size_t t) {
            const auto& post = posts[t / systems.size()];
            const auto& system = systems[t % systems.size()];
            const auto& model = binding.at(system.model);
            std::optional<StigmaExplanation> explanation;
            if (const auto it = inputs.explanations.find(post.id); it != inputs.explanations.end()) {
                explanation = it->second;
            }
            std::optional<style::StyleProfile> profile;
            if (const auto it = inputs.profiles.find(post.id); it != inputs.profiles.end()) {
                profile = it->second;
            }
            try {
                switch (system.regime) {
                case Regime::Baseline: done[t] = rewrite_baseline(post, gateway, model, options); break;
                case Regime::Informed: done[t] = rewrite_informed(post, explanation, gateway, model, options); break;
                case Regime::InformedStylized:
                    done[t] = rewrite_informed_stylized(post, explanation, profile, gateway, model, options);
                    break;
                }
            } catch (const Error& e) {
                if (e.code() != Errc::RewriteFailure && e.code() != Errc::Precondition) {
                    throw;
                }
                spdlog::warn("{}", e.what());
                failed[t] = json{{"post_id", post.id}, {"system", system.str()},
                                 {"error", std::string(errc_name(e.code()))}, {"detail", e.detail()}};
            }
        });
    } catch (const Error& e) {
        throw Error(Errc::StageFailure, std::string("rewrite stage: ") + e.what());
    }

    std::vector<Rewrite> rewrites;
    std::vector<json> rewrite_records;
    std::vector<json> failure_records;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        if (done[t]) {
            rewrite_records.emplace_back(*done[t]);
            rewrites.push_back(std::move(*done[t]));
        } else if (failed[t]) {
            failure_records.push_back(std::move(*failed[t]));
        }
    }
    const auto pairs = build_pair_dataset(posts, rewrites, systems);

    RewriteReport report;
    report.posts = posts.size();
    report.systems = systems.size();
    report.rewrites = rewrites.size();
    report.failures = failure_records.size();
    std::vector<json> pair_records;
    for (const auto& p : pairs) {
        (p.complete() ? report.complete_pairs : report.partial_pairs) += 1;
        pair_records.emplace_back(p);
    }

    store.write_stage(kRewritesStage, rewrite_records, n_tasks);
    store.write_stage(kRewriteFailuresStage, failure_records, n_tasks);
    const auto manifest = store.write_stage(
        kPairsStage, pair_records, posts.size(),
        json{{"complete", report.complete_pairs}, {"partial", report.partial_pairs}});
    report.pairs_digest = manifest.content_digest;
    return report;
}

}  // namespace destigma
