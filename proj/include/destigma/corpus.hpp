#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace destigma {

struct RawPost {
    std::string id;
    std::string subreddit;
    std::string author;
    std::string title;
    std::string body;
    std::int64_t created_utc{0};
};

void to_json(nlohmann::json& j, const RawPost& p);
void from_json(const nlohmann::json& j, RawPost& p);

struct CleanPost {
    std::string id;
    std::string subreddit;
    std::string title;
    std::string body;
    std::size_t combined_word_count{0};
    std::int64_t created_utc{0};

    // Title and body joined by one space; the unit every analysis works on.
    std::string text() const;
};

void to_json(nlohmann::json& j, const CleanPost& p);
void from_json(const nlohmann::json& j, CleanPost& p);

// Field names of the input dump. Defaults follow the Pushshift submission layout.
struct SourceSchema {
    std::string id_field{"id"};
    std::string subreddit_field{"subreddit"};
    std::string author_field{"author"};
    std::string title_field{"title"};
    std::string body_field{"selftext"};
    std::string created_field{"created_utc"};
};

struct CorpusRules {
    std::vector<std::string> removed_body_markers{"[removed]", "[deleted]"};
    std::vector<std::string> deleted_author_markers{"[deleted]"};
    std::size_t min_words{10};
};

enum class RejectReason { None, RemovedBody, DeletedAuthor, TooShort };

const char* reject_reason_name(RejectReason r) noexcept;

struct FilterResult {
    std::optional<CleanPost> accepted;
    RejectReason reason{RejectReason::None};

    explicit operator bool() const noexcept { return accepted.has_value(); }
};

FilterResult clean_filter(const RawPost& post, const CorpusRules& rules = {});

struct LoadStats {
    std::size_t lines{0};
    std::size_t loaded{0};
    std::vector<std::size_t> malformed_lines;  // 1-based
};

// Max share of malformed lines tolerated before loading is fatal.
inline constexpr double kMaxMalformedShare = 0.10;

// Streams posts in file order to `sink`. Malformed lines are skipped and
// recorded; blank lines are ignored. Throws Error(Io) when the file cannot be
// read and Error(MalformedInput) when more than 10% of lines are malformed.
LoadStats for_each_raw_post(const std::filesystem::path& path, const SourceSchema& schema,
                            const std::function<void(RawPost&&)>& sink);

struct LoadedCorpus {
    std::vector<RawPost> posts;
    LoadStats stats;
};

LoadedCorpus load_corpus(const std::filesystem::path& path, const SourceSchema& schema = {});

// Parses one dump record; nullopt when the record violates RawPost invariants.
std::optional<RawPost> parse_raw_post(const nlohmann::json& j, const SourceSchema& schema);

}  // namespace destigma
