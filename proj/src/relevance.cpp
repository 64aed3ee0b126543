#include "destigma/relevance.hpp"

#include "destigma/ask.hpp"
#include "destigma/error.hpp"
#include "destigma/parallel.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cctype>
#include <chrono>
#include <fstream>

namespace destigma {

namespace fs = std::filesystem;
using nlohmann::json;

const char* relevance_label_name(RelevanceLabel l) noexcept { return l == RelevanceLabel::Drug ? "D" : "ND"; }

const char* relevance_stage_name(RelevanceStage s) noexcept {
    return s == RelevanceStage::Detector ? "detector" : "validator";
}

void to_json(json& j, const RelevanceVerdict& v) {
    j = json{{"post_id", v.post_id},
             {"label", relevance_label_name(v.label)},
             {"stage", relevance_stage_name(v.stage)},
             {"raw_response", v.raw_response},
             {"model_id", v.model_id},
             {"template_hash", v.template_hash},
             {"reasked", v.reasked}};
}

void from_json(const json& j, RelevanceVerdict& v) {
    j.at("post_id").get_to(v.post_id);
    v.label = j.at("label").get<std::string>() == "D" ? RelevanceLabel::Drug : RelevanceLabel::NonDrug;
    v.stage = j.at("stage").get<std::string>() == "validator" ? RelevanceStage::Validator : RelevanceStage::Detector;
    v.raw_response = j.value("raw_response", "");
    v.model_id = j.value("model_id", "");
    v.template_hash = j.value("template_hash", "");
    v.reasked = j.value("reasked", false);
}

std::optional<RelevanceLabel> parse_relevance_answer(std::string_view completion) {
    const auto line = completion.substr(0, completion.find('\n'));
    bool drug = false;
    std::string word;
    auto judge = [&]() -> std::optional<RelevanceLabel> {
        if (word == "nd" || word.rfind("non", 0) == 0) {
            return RelevanceLabel::NonDrug;
        }
        if (word == "d" || word == "drug" || word == "drugs") {
            drug = true;
        }
        word.clear();
        return std::nullopt;
    };
    for (const char ch : line) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!word.empty()) {
            if (auto nd = judge()) {
                return nd;
            }
        }
    }
    if (!word.empty()) {
        if (auto nd = judge()) {
            return nd;
        }
    }
    if (drug) {
        return RelevanceLabel::Drug;
    }
    return std::nullopt;
}

namespace {

RelevanceVerdict ask_relevance(const CleanPost& post, Gateway& gateway, const std::string& provider,
                               const std::string& template_id, RelevanceStage stage) {
    PromptRequest req;
    req.template_id = template_id;
    req.slots = {{"post", post.text()}};
    req.temperature = 0.0;
    req.max_tokens = 16;
    const auto answer =
        ask_with_reask<RelevanceLabel>(gateway, req, provider, kRelevanceReask, parse_relevance_answer);
    if (!answer.value) {
        throw Error(Errc::ParseFailure, post.id);
    }
    RelevanceVerdict v;
    v.post_id = post.id;
    v.label = *answer.value;
    v.stage = stage;
    v.raw_response = answer.raw_responses.back();
    v.model_id = answer.model_id;
    v.template_hash = gateway.templates().get(template_id).hash();
    v.reasked = answer.raw_responses.size() > 1;
    return v;
}

// Per-post outcome of one batch, as stored in the checkpoint files.
struct PostOutcome {
    std::optional<RelevanceVerdict> detector;
    std::optional<RelevanceVerdict> validator;
    std::optional<json> quarantine;
};

json outcome_to_json(const std::string& post_id, const PostOutcome& o) {
    return json{{"post_id", post_id},
                {"detector", o.detector ? json(*o.detector) : json(nullptr)},
                {"validator", o.validator ? json(*o.validator) : json(nullptr)},
                {"quarantine", o.quarantine ? *o.quarantine : json(nullptr)}};
}

PostOutcome outcome_from_json(const json& j) {
    PostOutcome o;
    if (!j.at("detector").is_null()) {
        o.detector = j.at("detector").get<RelevanceVerdict>();
    }
    if (!j.at("validator").is_null()) {
        o.validator = j.at("validator").get<RelevanceVerdict>();
    }
    if (!j.at("quarantine").is_null()) {
        o.quarantine = j.at("quarantine");
    }
    return o;
}

json quarantine_entry(const std::string& post_id, RelevanceStage stage, const std::string& detail) {
    return json{{"post_id", post_id}, {"stage", relevance_stage_name(stage)}, {"error", "ParseFailure"},
                {"detail", detail}};
}

std::optional<std::vector<PostOutcome>> load_checkpoint(const fs::path& path,
                                                        const std::vector<CleanPost>& posts, std::size_t begin,
                                                        std::size_t end) {
    std::ifstream in(path);
    if (!in) {
        return std::nullopt;
    }
    std::vector<PostOutcome> out;
    std::string line;
    std::size_t i = begin;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || i >= end || j.value("post_id", "") != posts[i].id) {
            spdlog::warn("ignoring stale checkpoint {}", path.string());
            return std::nullopt;
        }
        out.push_back(outcome_from_json(j));
        ++i;
    }
    if (i != end) {
        return std::nullopt;
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

RelevanceVerdict detect_drug_relevance(const CleanPost& post, Gateway& gateway, const std::string& provider,
                                       const std::string& template_id) {
    return ask_relevance(post, gateway, provider, template_id, RelevanceStage::Detector);
}

RelevanceVerdict validate_relevance(const CleanPost& post, const RelevanceVerdict& detector, Gateway& gateway,
                                    const std::string& provider, const std::string& template_id) {
    if (detector.stage != RelevanceStage::Detector || detector.label != RelevanceLabel::Drug ||
        detector.post_id != post.id) {
        throw Error(Errc::Precondition, "validator requires a detector-positive verdict for post " + post.id);
    }
    return ask_relevance(post, gateway, provider, template_id, RelevanceStage::Validator);
}

void to_json(json& j, const RelevanceReport& r) {
    j = json{{"input_count", r.input_count},
             {"detector_positive_count", r.detector_positive_count},
             {"validated_positive_count", r.validated_positive_count},
             {"quarantined_count", r.quarantined_count},
             {"batches_reused", r.batches_reused},
             {"detector_seconds", r.detector_seconds},
             {"validator_seconds", r.validator_seconds}};
}

void from_json(const json& j, RelevanceReport& r) {
    j.at("input_count").get_to(r.input_count);
    j.at("detector_positive_count").get_to(r.detector_positive_count);
    j.at("validated_positive_count").get_to(r.validated_positive_count);
    r.quarantined_count = j.value("quarantined_count", std::size_t{0});
    r.batches_reused = j.value("batches_reused", std::size_t{0});
    r.detector_seconds = j.value("detector_seconds", 0.0);
    r.validator_seconds = j.value("validator_seconds", 0.0);
}

RelevanceReport run_relevance_stage(const std::vector<CleanPost>& posts, Gateway& gateway, StageStore& store,
                                    const RelevanceOptions& options) {
    if (options.batch_size == 0) {
        throw Error(Errc::Config, "relevance batch_size must be positive");
    }
    const fs::path batch_dir = store.dir() / "relevance_batches";
    fs::create_directories(batch_dir);

    RelevanceReport report;
    report.input_count = posts.size();
    std::vector<PostOutcome> outcomes;
    outcomes.reserve(posts.size());

    const std::size_t n_batches = (posts.size() + options.batch_size - 1) / options.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
        const std::size_t begin = b * options.batch_size;
        const std::size_t end = std::min(posts.size(), begin + options.batch_size);
        const fs::path checkpoint = batch_dir / fmt::format("batch_{:05d}.jsonl", b);
        if (auto cached = load_checkpoint(checkpoint, posts, begin, end)) {
            ++report.batches_reused;
            for (auto& o : *cached) {
                outcomes.push_back(std::move(o));
            }
            continue;
        }

        std::vector<PostOutcome> batch(end - begin);
        try {
            auto start = std::chrono::steady_clock::now();
            parallel_for(batch.size(), options.workers, [&](std::size_t k) {
                const auto& post = posts[begin + k];
                try {
                    batch[k].detector =
                        detect_drug_relevance(post, gateway, options.detector_provider, options.detector_template);
                } catch (const Error& e) {
                    if (e.code() != Errc::ParseFailure) {
                        throw;
                    }
                    batch[k].quarantine = quarantine_entry(post.id, RelevanceStage::Detector, e.what());
                }
            });
            report.detector_seconds += seconds_since(start);

            start = std::chrono::steady_clock::now();
            parallel_for(batch.size(), options.workers, [&](std::size_t k) {
                const auto& det = batch[k].detector;
                if (!det || det->label != RelevanceLabel::Drug) {
                    return;
                }
                const auto& post = posts[begin + k];
                try {
                    batch[k].validator = validate_relevance(post, *det, gateway, options.validator_provider,
                                                            options.validator_template);
                } catch (const Error& e) {
                    if (e.code() != Errc::ParseFailure) {
                        throw;
                    }
                    batch[k].quarantine = quarantine_entry(post.id, RelevanceStage::Validator, e.what());
                }
            });
            report.validator_seconds += seconds_since(start);
        } catch (const Error& e) {
            throw Error(Errc::StageFailure,
                        fmt::format("relevance batch {}/{} failed ({}); {} earlier batch(es) checkpointed in {}",
                                    b + 1, n_batches, e.what(), b, batch_dir.string()));
        }

        std::string contents;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            contents += outcome_to_json(posts[begin + k].id, batch[k]).dump();
            contents += '\n';
        }
        write_file_atomic(checkpoint, contents);
        for (auto& o : batch) {
            outcomes.push_back(std::move(o));
        }
    }

    std::vector<json> detector_positive;
    std::vector<json> validated;
    std::vector<json> quarantine;
    for (const auto& o : outcomes) {
        if (o.detector && o.detector->label == RelevanceLabel::Drug) {
            detector_positive.emplace_back(*o.detector);
        }
        if (o.validator && o.validator->label == RelevanceLabel::Drug) {
            validated.emplace_back(*o.validator);
        }
        if (o.quarantine) {
            quarantine.push_back(*o.quarantine);
        }
    }
    report.detector_positive_count = detector_positive.size();
    report.validated_positive_count = validated.size();
    report.quarantined_count = quarantine.size();

    store.write_stage(kDetectorStage, detector_positive, posts.size());
    store.write_stage(kValidatedStage, validated, detector_positive.size(),
                      json{{"quarantined", report.quarantined_count}});
    store.write_stage(kQuarantineStage, quarantine, posts.size());
    spdlog::info("relevance: {} posts, {} detector-positive, {} validated, {} quarantined", report.input_count,
                 report.detector_positive_count, report.validated_positive_count, report.quarantined_count);
    return report;
}

}  // namespace destigma
