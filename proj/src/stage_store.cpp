#include "destigma/stage_store.hpp"

#include "destigma/error.hpp"
#include "destigma/hashing.hpp"

#include <chrono>
#include <ctime>
#include <system_error>

namespace destigma {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const StageManifest& m) {
    j = json{{"stage_name", m.stage_name},
             {"input_count", m.input_count},
             {"output_count", m.output_count},
             {"content_digest", m.content_digest},
             {"created_at", m.created_at}};
    if (!m.extra.empty()) {
        j["extra"] = m.extra;
    }
}

void from_json(const json& j, StageManifest& m) {
    j.at("stage_name").get_to(m.stage_name);
    j.at("input_count").get_to(m.input_count);
    j.at("output_count").get_to(m.output_count);
    j.at("content_digest").get_to(m.content_digest);
    m.created_at = j.value("created_at", "");
    m.extra = j.value("extra", json::object());
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(Errc::Io, "cannot write " + tmp.string());
        }
        out << contents;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(Errc::Io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(Errc::Io, "rename failed for " + path.string());
    }
}

StageWriter::StageWriter(fs::path dir, std::string stage_name)
    : dir_(std::move(dir)), stage_name_(std::move(stage_name)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    tmp_path_ = dir_ / (stage_name_ + ".jsonl.tmp");
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) {
        throw Error(Errc::Io, "cannot open " + tmp_path_.string());
    }
}

StageWriter::~StageWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        fs::remove(tmp_path_, ec);
    }
}

void StageWriter::append(const json& record) {
    out_ << record.dump() << '\n';
    if (!out_) {
        throw Error(Errc::Io, "write failed for " + tmp_path_.string());
    }
    ++count_;
}

StageManifest StageWriter::commit(std::size_t input_count, json extra) {
    out_.flush();
    out_.close();
    if (out_.fail()) {
        throw Error(Errc::Io, "close failed for " + tmp_path_.string());
    }
    const auto data_path = dir_ / (stage_name_ + ".jsonl");
    std::error_code ec;
    fs::rename(tmp_path_, data_path, ec);
    if (ec) {
        throw Error(Errc::Io, "rename failed for " + data_path.string());
    }
    committed_ = true;

    StageManifest m;
    m.stage_name = stage_name_;
    m.input_count = input_count;
    m.output_count = count_;
    m.content_digest = sha256_file_hex(data_path);
    m.created_at = utc_timestamp();
    m.extra = std::move(extra);
    write_file_atomic(dir_ / (stage_name_ + ".manifest.json"), json(m).dump(2) + "\n");
    return m;
}

StageStore::StageStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path StageStore::data_path(const std::string& stage) const { return dir_ / (stage + ".jsonl"); }

fs::path StageStore::manifest_path(const std::string& stage) const {
    return dir_ / (stage + ".manifest.json");
}

std::optional<StageManifest> StageStore::completed(const std::string& stage) const {
    std::ifstream in(manifest_path(stage));
    if (!in) {
        return std::nullopt;
    }
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        return std::nullopt;
    }
    StageManifest m;
    try {
        m = j.get<StageManifest>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (!fs::exists(data_path(stage)) || sha256_file_hex(data_path(stage)) != m.content_digest) {
        return std::nullopt;
    }
    return m;
}

StageManifest StageStore::write_stage(const std::string& stage, const std::vector<json>& records,
                                      std::size_t input_count, json extra) {
    if (auto existing = completed(stage)) {
        return *existing;
    }
    StageWriter writer(dir_, stage);
    for (const auto& r : records) {
        writer.append(r);
    }
    return writer.commit(input_count, std::move(extra));
}

std::vector<std::string> StageStore::read_lines(const std::string& stage) const {
    std::ifstream in(data_path(stage), std::ios::binary);
    if (!in) {
        throw Error(Errc::Io, "cannot read stage " + data_path(stage).string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

std::vector<json> StageStore::read_stage(const std::string& stage) const {
    std::vector<json> out;
    for (const auto& line : read_lines(stage)) {
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw Error(Errc::MalformedInput, "corrupt record in stage " + stage);
        }
        out.push_back(std::move(j));
    }
    return out;
}

void StageStore::invalidate(const std::string& stage) const {
    std::error_code ec;
    fs::remove(manifest_path(stage), ec);
    fs::remove(data_path(stage), ec);
}

}  // namespace destigma
