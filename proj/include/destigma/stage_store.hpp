#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace destigma {

struct StageManifest {
    std::string stage_name;
    std::size_t input_count{0};
    std::size_t output_count{0};
    std::string content_digest;  // sha256 of the stage file bytes
    std::string created_at;      // ISO-8601 UTC
    nlohmann::json extra = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const StageManifest& m);
void from_json(const nlohmann::json& j, StageManifest& m);

// Streams records into `<dir>/<stage>.jsonl`. Data goes to a temporary file
// which is renamed into place on commit(); the manifest is written after the
// data file, so a stage without a manifest is treated as never run. A writer
// destroyed without commit() removes its temporary file.
class StageWriter {
public:
    StageWriter(std::filesystem::path dir, std::string stage_name);
    ~StageWriter();

    StageWriter(const StageWriter&) = delete;
    StageWriter& operator=(const StageWriter&) = delete;

    void append(const nlohmann::json& record);
    std::size_t count() const noexcept { return count_; }

    StageManifest commit(std::size_t input_count, nlohmann::json extra = nlohmann::json::object());

private:
    std::filesystem::path dir_;
    std::string stage_name_;
    std::filesystem::path tmp_path_;
    std::ofstream out_;
    std::size_t count_{0};
    bool committed_{false};
};

class StageStore {
public:
    explicit StageStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path data_path(const std::string& stage) const;
    std::filesystem::path manifest_path(const std::string& stage) const;

    // A stage is complete when its manifest parses and the digest still
    // matches the data file.
    std::optional<StageManifest> completed(const std::string& stage) const;

    // Writes a whole stage. If the stage is already complete nothing is
    // written and the existing manifest is returned unchanged.
    StageManifest write_stage(const std::string& stage, const std::vector<nlohmann::json>& records,
                              std::size_t input_count, nlohmann::json extra = nlohmann::json::object());

    std::vector<nlohmann::json> read_stage(const std::string& stage) const;

    // Raw lines of a stage file, for byte-level comparisons.
    std::vector<std::string> read_lines(const std::string& stage) const;

    // Removes data and manifest so the stage will be recomputed.
    void invalidate(const std::string& stage) const;

private:
    std::filesystem::path dir_;
};

// Atomic whole-file write via temporary + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string utc_timestamp();

}  // namespace destigma
