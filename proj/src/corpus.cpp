#include "destigma/corpus.hpp"

#include "destigma/error.hpp"
#include "destigma/text.hpp"

#include <algorithm>
#include <fstream>

namespace destigma {

using nlohmann::json;

std::string CleanPost::text() const {
    if (title.empty()) {
        return body;
    }
    if (body.empty()) {
        return title;
    }
    return title + " " + body;
}

void to_json(json& j, const RawPost& p) {
    j = json{{"id", p.id},       {"subreddit", p.subreddit}, {"author", p.author},
             {"title", p.title}, {"body", p.body},           {"created_utc", p.created_utc}};
}

void from_json(const json& j, RawPost& p) {
    j.at("id").get_to(p.id);
    p.subreddit = j.value("subreddit", "");
    p.author = j.value("author", "");
    p.title = j.value("title", "");
    p.body = j.value("body", "");
    p.created_utc = j.value("created_utc", std::int64_t{0});
}

void to_json(json& j, const CleanPost& p) {
    j = json{{"id", p.id},
             {"subreddit", p.subreddit},
             {"title", p.title},
             {"body", p.body},
             {"combined_word_count", p.combined_word_count},
             {"created_utc", p.created_utc}};
}

void from_json(const json& j, CleanPost& p) {
    j.at("id").get_to(p.id);
    p.subreddit = j.value("subreddit", "");
    p.title = j.value("title", "");
    p.body = j.value("body", "");
    p.combined_word_count = j.value("combined_word_count", std::size_t{0});
    p.created_utc = j.value("created_utc", std::int64_t{0});
}

const char* reject_reason_name(RejectReason r) noexcept {
    switch (r) {
    case RejectReason::None: return "None";
    case RejectReason::RemovedBody: return "RemovedBody";
    case RejectReason::DeletedAuthor: return "DeletedAuthor";
    case RejectReason::TooShort: return "TooShort";
    }
    return "None";
}

FilterResult clean_filter(const RawPost& post, const CorpusRules& rules) {
    const auto body = text::trim(post.body);
    if (std::find(rules.removed_body_markers.begin(), rules.removed_body_markers.end(), body) !=
        rules.removed_body_markers.end()) {
        return {std::nullopt, RejectReason::RemovedBody};
    }
    if (std::find(rules.deleted_author_markers.begin(), rules.deleted_author_markers.end(),
                  post.author) != rules.deleted_author_markers.end()) {
        return {std::nullopt, RejectReason::DeletedAuthor};
    }
    const auto words = text::count_words(post.title) + text::count_words(post.body);
    if (words < rules.min_words) {
        return {std::nullopt, RejectReason::TooShort};
    }
    CleanPost clean{post.id, post.subreddit, post.title, post.body, words, post.created_utc};
    return {std::move(clean), RejectReason::None};
}

namespace {

std::string string_field(const json& j, const std::string& key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return {};
    }
    if (it->is_string()) {
        return it->get<std::string>();
    }
    return it->dump();
}

std::optional<std::int64_t> time_field(const json& j, const std::string& key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return 0;
    }
    if (it->is_number_integer()) {
        return it->get<std::int64_t>();
    }
    if (it->is_number_float()) {
        return static_cast<std::int64_t>(it->get<double>());
    }
    if (it->is_string()) {
        try {
            std::size_t used = 0;
            const auto& s = it->get_ref<const std::string&>();
            const auto v = std::stoll(s, &used);
            if (used == s.size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<RawPost> parse_raw_post(const json& j, const SourceSchema& schema) {
    if (!j.is_object()) {
        return std::nullopt;
    }
    RawPost post;
    post.id = string_field(j, schema.id_field);
    if (post.id.empty()) {
        return std::nullopt;
    }
    const auto created = time_field(j, schema.created_field);
    if (!created || *created < 0) {
        return std::nullopt;
    }
    post.created_utc = *created;
    post.subreddit = string_field(j, schema.subreddit_field);
    post.author = string_field(j, schema.author_field);
    post.title = string_field(j, schema.title_field);
    post.body = string_field(j, schema.body_field);
    return post;
}

LoadStats for_each_raw_post(const std::filesystem::path& path, const SourceSchema& schema,
                            const std::function<void(RawPost&&)>& sink) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::Io, "cannot open corpus " + path.string());
    }
    LoadStats stats;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        ++stats.lines;
        auto parsed = json::parse(line, nullptr, false);
        std::optional<RawPost> post;
        if (!parsed.is_discarded()) {
            post = parse_raw_post(parsed, schema);
        }
        if (!post) {
            stats.malformed_lines.push_back(line_no);
            continue;
        }
        ++stats.loaded;
        sink(std::move(*post));
    }
    if (in.bad()) {
        throw Error(Errc::Io, "read error in " + path.string());
    }
    if (stats.lines > 0 &&
        static_cast<double>(stats.malformed_lines.size()) > kMaxMalformedShare * static_cast<double>(stats.lines)) {
        std::string where;
        for (std::size_t i = 0; i < stats.malformed_lines.size() && i < 20; ++i) {
            where += (i ? "," : "") + std::to_string(stats.malformed_lines[i]);
        }
        if (stats.malformed_lines.size() > 20) {
            where += ",...";
        }
        throw Error(Errc::MalformedInput, std::to_string(stats.malformed_lines.size()) + " of " +
                                              std::to_string(stats.lines) + " lines malformed in " +
                                              path.string() + " (lines " + where + ")");
    }
    return stats;
}

LoadedCorpus load_corpus(const std::filesystem::path& path, const SourceSchema& schema) {
    LoadedCorpus out;
    out.stats = for_each_raw_post(path, schema, [&](RawPost&& p) { out.posts.push_back(std::move(p)); });
    return out;
}

}  // namespace destigma
