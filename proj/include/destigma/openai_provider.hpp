#pragma once

#include "destigma/gateway.hpp"

#include <json.hpp>

#include <string>

namespace destigma {

// OpenAI-compatible `/v1/chat/completions` client. Works for the hosted API
// (bearer token from the environment variable named in the config) and for
// local OpenAI-compatible servers, where the key is optional.
class OpenAiCompatibleProvider final : public Provider {
public:
    explicit OpenAiCompatibleProvider(ProviderConfig cfg);

    Completion send(const ChatRequest& request) override;

    static nlohmann::json build_body(const ChatRequest& request);
    static Completion parse_response(const nlohmann::json& body);

private:
    ProviderConfig cfg_;
    std::string api_key_;
    std::string path_prefix_;
    std::string origin_;
};

}  // namespace destigma
