#pragma once

#include "destigma/gateway.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <string>

namespace testing {

// Provider answering through a callback; counts calls.
class FnProvider final : public destigma::Provider {
public:
    using Fn = std::function<std::string(const destigma::ChatRequest&)>;

    explicit FnProvider(Fn fn, std::shared_ptr<std::atomic<int>> calls = std::make_shared<std::atomic<int>>(0))
        : fn_(std::move(fn)), calls_(std::move(calls)) {}

    destigma::Completion send(const destigma::ChatRequest& request) override {
        ++*calls_;
        destigma::Completion c;
        c.text = fn_(request);
        c.model_id = request.model_id;
        c.prompt_tokens = 10;
        c.completion_tokens = 2;
        return c;
    }

private:
    Fn fn_;
    std::shared_ptr<std::atomic<int>> calls_;
};

inline destigma::ProviderConfig fast_provider(const std::string& name, const std::string& model = "m") {
    destigma::ProviderConfig c;
    c.name = name;
    c.model_id = model;
    c.limits = {1'000'000, 100'000};
    c.max_inflight = 8;
    return c;
}

inline destigma::RateTable free_rates() {
    destigma::RateTable t;
    t.fallback = destigma::TokenRate{0.0, 0.0};
    return t;
}

// Gateway over the bundled templates, a simulated clock and no retry delay.
inline std::unique_ptr<destigma::Gateway> make_gateway(const destigma::TemplateLibrary& templates) {
    return std::make_unique<destigma::Gateway>(templates, free_rates(),
                                               std::make_shared<destigma::SimulatedClock>(),
                                               destigma::RetryPolicy{2, destigma::Micros{0}, 2.0}, 3);
}

}  // namespace testing
