#include "destigma/mock_provider.hpp"

#include "destigma/error.hpp"
#include "destigma/text.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace destigma {

using nlohmann::json;

std::vector<MockFixture> parse_mock_fixtures(const std::string& jsonl) {
    std::vector<MockFixture> out;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(Errc::Config, "bad fixture at line " + std::to_string(line_no));
        }
        MockFixture f;
        f.template_id = j.value("template_id", "");
        if (const auto it = j.find("contains"); it != j.end()) {
            if (it->is_string()) {
                f.contains.push_back(it->get<std::string>());
            } else {
                f.contains = it->get<std::vector<std::string>>();
            }
        }
        f.response = j.value("response", "");
        f.model_id = j.value("model_id", "");
        f.error = j.value("error", "");
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<MockFixture> load_mock_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::Config, "cannot open fixture file " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_mock_fixtures(ss.str());
}

namespace {

bool matches(const MockFixture& f, const ChatRequest& r) {
    if (!f.template_id.empty() && f.template_id != "*" && f.template_id != r.template_id) {
        return false;
    }
    if (!f.model_id.empty() && f.model_id != r.model_id) {
        return false;
    }
    for (const auto& needle : f.contains) {
        if (r.prompt.find(needle) == std::string::npos) {
            return false;
        }
    }
    return true;
}

}  // namespace

Completion mock_complete(const std::vector<MockFixture>& fixtures, const ChatRequest& request) {
    for (const auto& f : fixtures) {
        if (!matches(f, request)) {
            continue;
        }
        if (!f.error.empty()) {
            using Kind = ProviderFailure::Kind;
            if (f.error == "auth") {
                throw ProviderFailure(Kind::Auth, 401, "mock: invalid credentials");
            }
            if (f.error == "rate_limited") {
                throw ProviderFailure(Kind::RateLimited, 429, "mock: rate limited");
            }
            if (f.error == "server") {
                throw ProviderFailure(Kind::ServerError, 503, "mock: server error");
            }
            throw ProviderFailure(Kind::Timeout, 0, "mock: timeout");
        }
        Completion c;
        c.text = f.response;
        c.model_id = request.model_id;
        c.prompt_tokens = static_cast<std::int64_t>(text::count_words(request.prompt));
        c.completion_tokens = static_cast<std::int64_t>(text::count_words(f.response));
        c.latency_ms = 0;
        c.provider = "mock";
        return c;
    }
    throw Error(Errc::MockMiss, "template " + request.template_id + ", prompt:\n" + request.prompt);
}

Completion MockProvider::send(const ChatRequest& request) { return mock_complete(fixtures_, request); }

}  // namespace destigma
