#pragma once

#include "destigma/gateway.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace destigma {

// One canned response. Matches when the template id agrees (empty or "*"
// matches any), the optional model id agrees, and every `contains` string is
// a substring of the rendered prompt. `error` simulates provider failures:
// "timeout", "rate_limited", "server", or "auth".
struct MockFixture {
    std::string template_id;
    std::vector<std::string> contains;
    std::string response;
    std::string model_id;
    std::string error;
};

std::vector<MockFixture> load_mock_fixtures(const std::filesystem::path& path);
std::vector<MockFixture> parse_mock_fixtures(const std::string& jsonl);

// First matching fixture in file order wins. Throws Error(MockMiss) with the
// rendered prompt when nothing matches.
Completion mock_complete(const std::vector<MockFixture>& fixtures, const ChatRequest& request);

class MockProvider final : public Provider {
public:
    explicit MockProvider(std::vector<MockFixture> fixtures) : fixtures_(std::move(fixtures)) {}

    Completion send(const ChatRequest& request) override;

private:
    std::vector<MockFixture> fixtures_;
};

}  // namespace destigma
