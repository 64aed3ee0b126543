#include "destigma/gateway.hpp"

#include "destigma/error.hpp"
#include "destigma/mock_provider.hpp"
#include "destigma/openai_provider.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace destigma {

struct Gateway::Slot {
    Slot(ProviderConfig c, std::unique_ptr<Provider> p)
        : cfg(std::move(c)), provider(std::move(p)), limiter(cfg.limits), inflight(std::max(1, cfg.max_inflight)) {}

    ProviderConfig cfg;
    std::unique_ptr<Provider> provider;
    RateLimiter limiter;
    std::counting_semaphore<1024> inflight;
};

namespace {

class InflightPermit {
public:
    explicit InflightPermit(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
    ~InflightPermit() { sem_.release(); }
    InflightPermit(const InflightPermit&) = delete;
    InflightPermit& operator=(const InflightPermit&) = delete;

private:
    std::counting_semaphore<1024>& sem_;
};

}  // namespace

Gateway::Gateway(TemplateLibrary templates, RateTable rates, std::shared_ptr<Clock> clock, RetryPolicy retry,
                 std::uint64_t seed)
    : templates_(std::move(templates)),
      rates_(std::move(rates)),
      clock_(std::move(clock)),
      retry_(retry),
      rng_(seed) {}

Gateway::~Gateway() = default;

void Gateway::add_provider(const ProviderConfig& cfg, std::unique_ptr<Provider> provider) {
    if (cfg.max_inflight < 1 || cfg.max_inflight > 1024) {
        throw Error(Errc::Config, "max_inflight out of range for provider " + cfg.name);
    }
    providers_[cfg.name] = std::make_unique<Slot>(cfg, std::move(provider));
}

bool Gateway::has_provider(const std::string& name) const { return providers_.count(name) > 0; }

Gateway::Slot& Gateway::slot(const std::string& name) const {
    const auto it = providers_.find(name);
    if (it == providers_.end()) {
        throw Error(Errc::UnknownProvider, name);
    }
    return *it->second;
}

const ProviderConfig& Gateway::provider_config(const std::string& name) const { return slot(name).cfg; }

std::string Gateway::render(const std::string& template_id, const SlotMap& slots) const {
    return render_prompt(templates_.get(template_id), slots);
}

Micros Gateway::backoff(int retry_index) {
    const double cap = static_cast<double>(retry_.base_delay.count()) * std::pow(retry_.factor, retry_index - 1);
    std::lock_guard lock(rng_mu_);
    std::uniform_real_distribution<double> jitter(0.0, cap);
    return Micros{static_cast<std::int64_t>(jitter(rng_))};
}

Completion Gateway::complete(const PromptRequest& request, const std::string& provider) {
    ChatRequest chat;
    chat.template_id = request.template_id;
    chat.prompt = render(request.template_id, request.slots);
    chat.model_id = request.model_id;
    chat.temperature = request.temperature;
    chat.max_tokens = request.max_tokens;
    return complete_rendered(std::move(chat), provider);
}

Completion Gateway::complete_rendered(ChatRequest request, const std::string& provider) {
    auto& s = slot(provider);
    if (request.model_id.empty()) {
        request.model_id = s.cfg.model_id;
    }
    const int max_attempts = std::max(1, retry_.max_attempts);
    for (int attempt = 1;; ++attempt) {
        clock_->sleep_for(s.limiter.acquire(clock_->now()));
        try {
            Completion c;
            {
                InflightPermit permit(s.inflight);
                const auto start = clock_->now();
                c = s.provider->send(request);
                c.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(clock_->now() - start).count();
            }
            if (c.model_id.empty()) {
                c.model_id = request.model_id;
            }
            c.provider = provider;
            c.attempts = attempt;
            if (c.truncated) {
                spdlog::warn("{}: completion for template {} hit max_tokens={}", provider, request.template_id,
                             request.max_tokens);
            }
            record_cost(ledger_, c, rates_);
            return c;
        } catch (const ProviderFailure& f) {
            if (f.kind() == ProviderFailure::Kind::Auth) {
                throw Error(Errc::AuthError, provider + ": " + f.what());
            }
            if (!f.transient()) {
                throw Error(Errc::ProviderUnavailable, provider + ": " + f.what());
            }
            spdlog::debug("{}: attempt {}/{} failed ({}), tokens=0", provider, attempt, max_attempts, f.what());
            if (attempt >= max_attempts) {
                throw Error(Errc::ProviderUnavailable,
                            provider + ": gave up after " + std::to_string(attempt) + " attempts: " + f.what());
            }
            clock_->sleep_for(backoff(attempt));
        }
    }
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& cfg) {
    if (cfg.kind == "mock") {
        return std::make_unique<MockProvider>(load_mock_fixtures(cfg.fixtures));
    }
    if (cfg.kind == "openai" || cfg.kind == "local") {
        return std::make_unique<OpenAiCompatibleProvider>(cfg);
    }
    throw Error(Errc::Config, "unknown provider kind '" + cfg.kind + "' for " + cfg.name);
}

}  // namespace destigma
