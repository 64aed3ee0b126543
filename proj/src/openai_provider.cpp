#include "destigma/openai_provider.hpp"

#include "destigma/error.hpp"

#include <httplib.h>

#include <cstdlib>

namespace destigma {

using nlohmann::json;

OpenAiCompatibleProvider::OpenAiCompatibleProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
        throw Error(Errc::Config, "provider " + cfg_.name + " has no base_url");
    }
    if (!cfg_.api_key_env.empty()) {
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key != nullptr) {
            api_key_ = key;
        }
    }
    if (cfg_.kind == "openai" && api_key_.empty()) {
        throw Error(Errc::AuthError, "environment variable " + cfg_.api_key_env + " is not set for " + cfg_.name);
    }
    // Split "scheme://host[:port]/prefix" into origin and path prefix.
    const auto scheme_end = cfg_.base_url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = cfg_.base_url.find('/', host_start);
    origin_ = cfg_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "/v1" : cfg_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
}

json OpenAiCompatibleProvider::build_body(const ChatRequest& request) {
    return json{{"model", request.model_id},
                {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
                {"temperature", request.temperature},
                {"max_tokens", request.max_tokens}};
}

Completion OpenAiCompatibleProvider::parse_response(const json& body) {
    const auto& choices = body.at("choices");
    if (!choices.is_array() || choices.empty()) {
        throw ProviderFailure(ProviderFailure::Kind::ServerError, 200, "response has no choices");
    }
    const auto& choice = choices.at(0);
    Completion c;
    const auto& content = choice.at("message").at("content");
    c.text = content.is_string() ? content.get<std::string>() : std::string{};
    c.truncated = choice.value("finish_reason", "") == "length";
    c.model_id = body.value("model", "");
    if (const auto it = body.find("usage"); it != body.end() && it->is_object()) {
        c.prompt_tokens = it->value("prompt_tokens", std::int64_t{0});
        c.completion_tokens = it->value("completion_tokens", std::int64_t{0});
    }
    return c;
}

Completion OpenAiCompatibleProvider::send(const ChatRequest& request) {
    using Kind = ProviderFailure::Kind;
    httplib::Client client(origin_);
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    const auto res = client.Post(path_prefix_ + "/chat/completions", headers, build_body(request).dump(),
                                 "application/json");
    if (!res) {
        throw ProviderFailure(Kind::Timeout, 0, "transport error: " + httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
        throw ProviderFailure(Kind::Auth, status, "HTTP " + std::to_string(status));
    }
    if (status == 429) {
        throw ProviderFailure(Kind::RateLimited, status, "HTTP 429");
    }
    if (status == 408 || status >= 500) {
        throw ProviderFailure(status == 408 ? Kind::Timeout : Kind::ServerError, status,
                              "HTTP " + std::to_string(status));
    }
    if (status != 200) {
        throw ProviderFailure(Kind::Client, status, "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    const auto body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) {
        throw ProviderFailure(Kind::ServerError, status, "unparseable response body");
    }
    try {
        auto c = parse_response(body);
        // Servers often answer with a dated model snapshot; bill against the configured id.
        c.model_id = request.model_id;
        return c;
    } catch (const json::exception& e) {
        throw ProviderFailure(Kind::ServerError, status, std::string("unexpected response shape: ") + e.what());
    }
}

}  // namespace destigma
