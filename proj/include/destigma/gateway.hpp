#pragma once

#include "destigma/cost_ledger.hpp"
#include "destigma/prompt.hpp"
#include "destigma/rate_limiter.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>
#include <stdexcept>
#include <string>

namespace destigma {

struct PromptRequest {
    std::string template_id;
    SlotMap slots;
    std::string model_id;  // empty: the provider's configured model
    double temperature{0.0};
    int max_tokens{512};
};

// A fully rendered prompt as handed to a provider.
struct ChatRequest {
    std::string template_id;
    std::string prompt;
    std::string model_id;
    double temperature{0.0};
    int max_tokens{512};
};

struct Completion {
    std::string text;
    std::string model_id;
    std::int64_t prompt_tokens{0};
    std::int64_t completion_tokens{0};
    std::int64_t latency_ms{0};
    std::string provider;
    bool truncated{false};  // stopped at max_tokens
    int attempts{1};
};

// Raised by providers for transport and HTTP level failures. The gateway
// decides from `kind` whether an attempt is retried.
class ProviderFailure : public std::runtime_error {
public:
    enum class Kind { Timeout, RateLimited, ServerError, Auth, Client };

    ProviderFailure(Kind kind, int status, const std::string& what)
        : std::runtime_error(what), kind_(kind), status_(status) {}

    Kind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }
    bool transient() const noexcept {
        return kind_ == Kind::Timeout || kind_ == Kind::RateLimited || kind_ == Kind::ServerError;
    }

private:
    Kind kind_;
    int status_;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual Completion send(const ChatRequest& request) = 0;
};

struct ProviderConfig {
    std::string name;
    std::string kind{"mock"};  // "openai", "local" or "mock"
    std::string base_url;
    std::string model_id;
    std::string api_key_env;
    RateLimitConfig limits{};
    int max_inflight{4};
    double timeout_s{60.0};
    std::string fixtures;  // mock only
};

struct RetryPolicy {
    int max_attempts{5};
    Micros base_delay{std::chrono::seconds(1)};
    double factor{2.0};
};

// Provider-agnostic completion front end: renders templates, waits on the
// per-provider rate limiter and in-flight cap, retries transient failures
// with full-jitter exponential backoff and records the cost of each
// successful completion. Safe to share between worker threads.
class Gateway {
public:
    Gateway(TemplateLibrary templates, RateTable rates, std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>(),
            RetryPolicy retry = {}, std::uint64_t seed = 0);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    void add_provider(const ProviderConfig& cfg, std::unique_ptr<Provider> provider);
    bool has_provider(const std::string& name) const;
    const ProviderConfig& provider_config(const std::string& name) const;

    std::string render(const std::string& template_id, const SlotMap& slots) const;

    Completion complete(const PromptRequest& request, const std::string& provider);

    // Sends an already rendered prompt (used for re-asks that extend a prompt).
    Completion complete_rendered(ChatRequest request, const std::string& provider);

    const TemplateLibrary& templates() const noexcept { return templates_; }
    const RateTable& rates() const noexcept { return rates_; }
    const CostLedger& ledger() const noexcept { return ledger_; }
    Clock& clock() noexcept { return *clock_; }

private:
    struct Slot;

    Slot& slot(const std::string& name) const;
    Micros backoff(int retry_index);

    TemplateLibrary templates_;
    RateTable rates_;
    std::shared_ptr<Clock> clock_;
    RetryPolicy retry_;
    CostLedger ledger_;
    std::map<std::string, std::unique_ptr<Slot>> providers_;
    std::mutex rng_mu_;
    std::mt19937_64 rng_;
};

// Builds the provider implementation named by cfg.kind.
std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg);

}  // namespace destigma
